//! Pullback attractor sections, uniform attractors over a hull of
//! time-shifted symbols, set distances, invariance probes, and the
//! perturbation-strength convergence study.
//!
//! A section is approximated by evolving a bounded ensemble from the past:
//! `φ(T, θ_{−T} p)B` lands at time 0, and doubling `T` measures how far the
//! approximation is from converged (the Cauchy gap). All set statements are
//! made up to a declared tolerance combining that gap with the solver error.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::solver::{cocycle, integrate, state_distance, SolverConfig};
use crate::spectral::{Basis, PhaseState};
use crate::symbols::Symbol;
use crate::{Error, Result};

/// How to scatter an ensemble over the energy-space sphere of a given
/// radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    /// Independent Gaussian directions, normalized to the radius.
    Sphere { radius: f64 },
    /// Deterministic low-discrepancy pattern on the leading eight mode
    /// pairs, normalized to the radius.
    Grid { radius: f64 },
}

impl Sampling {
    pub fn radius(&self) -> f64 {
        match self {
            Sampling::Sphere { radius } | Sampling::Grid { radius } => *radius,
        }
    }
}

/// Reproducible initial-set description: `count` states on the sphere,
/// fully determined by the seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub count: usize,
    pub sampling: Sampling,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("ensemble must have at least one member".into()));
        }
        let r = self.sampling.radius();
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::Config(format!("ensemble radius must be ≥ 0, got {r}")));
        }
        Ok(())
    }

    /// Materializes the ensemble on a basis. Deterministic given the seed;
    /// the grid pattern additionally varies with the seed only through a
    /// fixed offset so that distinct seeds give distinct runs.
    pub fn draw(&self, basis: &Arc<Basis>) -> Result<Vec<PhaseState>> {
        self.validate()?;
        let n = basis.n_modes();
        let lambdas = basis.eigenvalues();
        let radius = self.sampling.radius();
        let mut out = Vec::with_capacity(self.count);
        match self.sampling {
            Sampling::Sphere { .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                for _ in 0..self.count {
                    let mut u = vec![0.0; n];
                    let mut v = vec![0.0; n];
                    for k in 0..n {
                        let (a, b) = gaussian_pair(&mut rng);
                        u[k] = a;
                        v[k] = b;
                    }
                    out.push(normalized_state(basis, lambdas, u, v, radius)?);
                }
            }
            Sampling::Grid { .. } => {
                let m = n.min(8);
                let offset = (self.seed % 7919) as f64;
                for j in 0..self.count {
                    let mut u = vec![0.0; n];
                    let mut v = vec![0.0; n];
                    for k in 0..m {
                        u[k] = 2.0 * weyl((j as f64 + 1.0 + offset) * GAMMAS[2 * k]) - 1.0;
                        v[k] = 2.0 * weyl((j as f64 + 1.0 + offset) * GAMMAS[2 * k + 1]) - 1.0;
                    }
                    out.push(normalized_state(basis, lambdas, u, v, radius)?);
                }
            }
        }
        Ok(out)
    }
}

/// Fractional parts of √prime: pairwise irrational directions for the
/// low-discrepancy pattern.
const GAMMAS: [f64; 16] = [
    1.4142135623730951,
    1.7320508075688772,
    2.23606797749979,
    2.6457513110645907,
    3.3166247903554,
    3.605551275463989,
    4.123105625617661,
    4.358898943540674,
    4.795831523312719,
    5.385164807134504,
    5.5677643628300215,
    6.082762530298219,
    6.4031242374328485,
    6.557438524302,
    6.855654600401044,
    7.280109889280518,
];

fn weyl(x: f64) -> f64 {
    x - x.floor()
}

/// One Box–Muller pair of standard normals.
fn gaussian_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let angle = std::f64::consts::TAU * u2;
    (r * angle.cos(), r * angle.sin())
}

fn normalized_state(
    basis: &Arc<Basis>,
    lambdas: &[f64],
    mut u: Vec<f64>,
    mut v: Vec<f64>,
    radius: f64,
) -> Result<PhaseState> {
    let mut norm_sq = 0.0;
    for k in 0..u.len() {
        norm_sq += lambdas[k] * u[k] * u[k] + v[k] * v[k];
    }
    if radius == 0.0 {
        u.fill(0.0);
        v.fill(0.0);
    } else if norm_sq > 0.0 {
        let s = radius / norm_sq.sqrt();
        u.iter_mut().for_each(|x| *x *= s);
        v.iter_mut().for_each(|x| *x *= s);
    } else {
        u[0] = radius / lambdas[0].sqrt();
    }
    PhaseState::new(basis.field_from_coeffs(u)?, basis.field_from_coeffs(v)?)
}

/// Horizon and tolerances for section approximation.
#[derive(Debug, Clone, Copy)]
pub struct SectionConfig {
    /// Pullback horizon `T`; the Cauchy check compares against `2T`.
    pub horizon: f64,
    /// Largest acceptable gap between the `T` and `2T` approximations.
    pub cauchy_tol: f64,
    pub solver: SolverConfig,
    /// When set, every landing state must lie inside this energy-norm ball.
    pub absorbing_radius: Option<f64>,
}

/// A finite approximation of an attractor section (or of a union of
/// sections): the landing states, which hull sample produced each of them,
/// and the accuracy bookkeeping.
#[derive(Debug, Clone)]
pub struct AttractorApprox {
    pub states: Vec<PhaseState>,
    /// Index into `symbols` for each state.
    pub membership: Vec<usize>,
    pub symbols: Vec<Symbol>,
    pub epsilon: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Measured distance between the `T` and `2T` approximations.
    pub cauchy_gap: f64,
    /// Declared set tolerance: max(Cauchy gap, 10× solver estimate).
    pub tolerance: f64,
}

impl AttractorApprox {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

fn evolve_ensemble(
    starts: &[PhaseState],
    p: &Symbol,
    horizon: f64,
    cfg: &SolverConfig,
) -> Result<Vec<PhaseState>> {
    let shifted = p.shift(-horizon);
    starts
        .par_iter()
        .map(|x| cocycle(x, horizon, &shifted, cfg))
        .collect()
}

/// Approximates the pullback section `A(p)` at time 0: starts the ensemble
/// at time `−T` and evolves it to 0, accepting the result only when the
/// `2T` re-run confirms convergence within the configured tolerance.
pub fn pullback_section(
    p: &Symbol,
    ensemble: &EnsembleSpec,
    basis: &Arc<Basis>,
    sc: &SectionConfig,
) -> Result<AttractorApprox> {
    if !(sc.horizon > 0.0) {
        return Err(Error::Config(format!("pullback horizon must be positive, got {}", sc.horizon)));
    }
    if !(sc.cauchy_tol > 0.0) {
        return Err(Error::Config("convergence tolerance must be positive".into()));
    }
    let starts = ensemble.draw(basis)?;
    let states = evolve_ensemble(&starts, p, sc.horizon, &sc.solver)?;
    let deeper = evolve_ensemble(&starts, p, 2.0 * sc.horizon, &sc.solver)?;
    let gap = semidist_states(&states, &deeper)?.max(semidist_states(&deeper, &states)?);
    if gap > sc.cauchy_tol {
        return Err(Error::HorizonTooShort { gap, tol: sc.cauchy_tol });
    }
    if let Some(r) = sc.absorbing_radius {
        for (member, s) in states.iter().enumerate() {
            if s.energy_norm(0.0)? > r {
                return Err(Error::NonAbsorbed { member, radius: r });
            }
        }
    }
    let amplitude = ensemble.sampling.radius().max(1.0);
    let tolerance = gap.max(10.0 * sc.solver.error_estimate(basis, sc.horizon, amplitude));
    Ok(AttractorApprox {
        states,
        membership: vec![0; ensemble.count],
        symbols: vec![p.clone()],
        epsilon: p.eps(),
        horizon: sc.horizon,
        seed: ensemble.seed,
        cauchy_gap: gap,
        tolerance,
    })
}

/// Union of pullback sections over hull samples, with per-state membership
/// preserved so the union structure stays inspectable.
pub fn uniform_attractor(
    hull: &[Symbol],
    ensemble: &EnsembleSpec,
    basis: &Arc<Basis>,
    sc: &SectionConfig,
) -> Result<AttractorApprox> {
    if hull.is_empty() {
        return Err(Error::Config("hull sample must be nonempty".into()));
    }
    let mut states = Vec::with_capacity(hull.len() * ensemble.count);
    let mut membership = Vec::with_capacity(hull.len() * ensemble.count);
    let mut gap: f64 = 0.0;
    let mut tolerance: f64 = 0.0;
    for (j, p) in hull.iter().enumerate() {
        let section = pullback_section(p, ensemble, basis, sc)?;
        gap = gap.max(section.cauchy_gap);
        tolerance = tolerance.max(section.tolerance);
        membership.extend(std::iter::repeat(j).take(section.len()));
        states.extend(section.states);
    }
    Ok(AttractorApprox {
        states,
        membership,
        symbols: hull.to_vec(),
        epsilon: hull[0].eps(),
        horizon: sc.horizon,
        seed: ensemble.seed,
        cauchy_gap: gap,
        tolerance,
    })
}

/// One-sided Hausdorff semidistance between finite state sets:
/// `max_{a∈A} min_{b∈B} ‖a − b‖` in the energy norm.
pub fn semidist_states(a: &[PhaseState], b: &[PhaseState]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("semidistance of an empty set is undefined".into()));
    }
    let mut worst: f64 = 0.0;
    for x in a {
        let mut best = f64::INFINITY;
        for y in b {
            let d = state_distance(x, y)?;
            if d < best {
                best = d;
            }
        }
        worst = worst.max(best);
    }
    Ok(worst)
}

pub fn hausdorff_semidist(a: &AttractorApprox, b: &AttractorApprox) -> Result<f64> {
    semidist_states(&a.states, &b.states)
}

/// Invariance residual: evolves the section of `p` by `t` and compares with
/// the section of the shifted symbol in both directions. The two sections
/// must have been computed at matching horizons.
pub fn invariance_check(
    p: &Symbol,
    section: &AttractorApprox,
    shifted_section: &AttractorApprox,
    t: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    if section.is_empty() || shifted_section.is_empty() {
        return Err(Error::Domain("invariance check needs nonempty sections".into()));
    }
    let mapped: Vec<PhaseState> = section
        .states
        .par_iter()
        .map(|x| cocycle(x, t, p, cfg))
        .collect::<Result<Vec<_>>>()?;
    let fwd = semidist_states(&mapped, &shifted_section.states)?;
    let bwd = semidist_states(&shifted_section.states, &mapped)?;
    Ok(fwd.max(bwd))
}

/// Evidence that a state on the attractor is the time-0 value of a bounded
/// complete orbit: the best backward candidate found over hull samples and
/// ensemble preimages.
#[derive(Debug, Clone, Copy)]
pub struct ProbeEvidence {
    pub landing_error: f64,
    /// Largest energy norm along the candidate orbit.
    pub orbit_sup: f64,
    pub symbol_index: usize,
    pub member_index: usize,
    /// True when the candidate stayed inside the ball and landed within
    /// tolerance.
    pub within_tolerance: bool,
}

/// Searches for a trajectory starting at `−t_back` inside the absorbing
/// ball that lands within `tolerance` of `x` at time 0. Failure to find one
/// is reported as evidence, not as an error.
pub fn lifted_invariance_probe(
    x: &PhaseState,
    hull: &[Symbol],
    ensemble: &EnsembleSpec,
    t_back: f64,
    cfg: &SolverConfig,
    ball_radius: f64,
    tolerance: f64,
) -> Result<ProbeEvidence> {
    if hull.is_empty() {
        return Err(Error::Config("hull sample must be nonempty".into()));
    }
    if !(t_back > 0.0 && ball_radius > 0.0 && tolerance > 0.0) {
        return Err(Error::Config("probe parameters must be positive".into()));
    }
    let starts = ensemble.draw(x.basis())?;
    let record = SolverConfig {
        record_every: ((0.5 / cfg.dt).round() as usize).max(1),
        ..*cfg
    };
    let mut candidates = Vec::with_capacity(hull.len() * starts.len());
    for (j, p) in hull.iter().enumerate() {
        let shifted = p.shift(-t_back);
        let evaluated: Vec<Result<(f64, f64)>> = starts
            .par_iter()
            .map(|y| {
                let traj = integrate(y, 0.0, t_back, &shifted, &record)?;
                let sup = traj
                    .energy_norms(0.0)?
                    .into_iter()
                    .fold(0.0f64, f64::max);
                let landing = state_distance(traj.last(), x)?;
                Ok((landing, sup))
            })
            .collect();
        for (i, r) in evaluated.into_iter().enumerate() {
            let (landing, sup) = r?;
            candidates.push((landing, sup, j, i));
        }
    }
    let in_ball = candidates
        .iter()
        .filter(|c| c.1 <= ball_radius)
        .min_by(|a, b| a.0.total_cmp(&b.0));
    let best = match in_ball {
        Some(c) => c,
        None => candidates
            .iter()
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("candidate list nonempty"),
    };
    Ok(ProbeEvidence {
        landing_error: best.0,
        orbit_sup: best.1,
        symbol_index: best.2,
        member_index: best.3,
        within_tolerance: best.1 <= ball_radius && best.0 <= tolerance,
    })
}

/// Largest smoother-norm value over the approximation: the uniform
/// 𝓔₁-boundedness claim is checked by comparing this across perturbation
/// strengths.
pub fn e1_bound(a: &AttractorApprox) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::Domain("empty approximation has no norm bound".into()));
    }
    let mut worst: f64 = 0.0;
    for s in &a.states {
        worst = worst.max(s.energy_norm(1.0)?);
    }
    Ok(worst)
}

/// One row of the convergence study toward the unperturbed attractor.
#[derive(Debug, Clone, Copy)]
pub struct SemicontinuityRow {
    pub epsilon: f64,
    /// `dist(𝓐_ε, 𝓐₀)`, one-sided toward the unperturbed attractor.
    pub distance: f64,
    pub cauchy_gap: f64,
    pub e1: f64,
}

/// Computes the attractor per perturbation strength (a union over
/// `hull_count` shifts when the symbol is genuinely time-dependent) and the
/// semidistance toward the ε = 0 attractor.
pub fn semicontinuity_study<F>(
    family: F,
    eps_grid: &[f64],
    hull_count: usize,
    ensemble: &EnsembleSpec,
    basis: &Arc<Basis>,
    sc: &SectionConfig,
) -> Result<Vec<SemicontinuityRow>>
where
    F: Fn(f64) -> Result<Symbol>,
{
    if !eps_grid.contains(&0.0) {
        return Err(Error::Config("the grid must contain ε = 0".into()));
    }
    if hull_count == 0 {
        return Err(Error::Config("hull sample count must be positive".into()));
    }
    let mut approxes = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let p = family(eps)?;
        let approx = if p.is_autonomous() {
            pullback_section(&p, ensemble, basis, sc)?
        } else {
            let hull = crate::symbols::hull_sample(&p, &crate::symbols::hull_shifts(&p, hull_count));
            uniform_attractor(&hull, ensemble, basis, sc)?
        };
        approxes.push(approx);
    }
    let base_idx = eps_grid.iter().position(|&e| e == 0.0).expect("checked above");
    let mut rows = Vec::with_capacity(eps_grid.len());
    for (i, approx) in approxes.iter().enumerate() {
        let distance = if i == base_idx {
            0.0
        } else {
            hausdorff_semidist(approx, &approxes[base_idx])?
        };
        rows.push(SemicontinuityRow {
            epsilon: eps_grid[i],
            distance,
            cauchy_gap: approx.cauchy_gap,
            e1: e1_bound(approx)?,
        });
    }
    Ok(rows)
}
