//! Duhamel decomposition `u = v + w`: the free linear evolution `v` of the
//! initial data decays exponentially, while the forced linear remainder `w`
//! (zero data, forcing `p(t, u(t))`) carries extra smoothness. The
//! regularity ladder quantifies that smoothing one fractional step at a
//! time.

use crate::diagnostics::{grid_index, linear_decay_fit, DecayFit};
use crate::quad::simpson_uniform;
use crate::solver::{
    integrate_with_shadow, solve_linear, state_axpy, state_distance, LinearForcing,
    SolverConfig, Trajectory,
};
use crate::symbols::Symbol;
use crate::{Error, Result};

/// Builds the smoothness ladder `0, α₁, min(1, (5/2)α_i), …, 1`.
pub fn ladder(alpha1: f64) -> Result<Vec<f64>> {
    if !(alpha1 > 0.0 && alpha1 < 1.0) {
        return Err(Error::Config(format!(
            "first ladder rung must lie in (0, 1), got {alpha1}"
        )));
    }
    let mut out = vec![0.0];
    let mut a = alpha1;
    while a < 1.0 {
        out.push(a);
        a = (2.5 * a).min(1.0);
    }
    out.push(1.0);
    Ok(out)
}

pub const DEFAULT_ALPHA1: f64 = 0.18;

/// The computed decomposition with its consistency certificate.
#[derive(Debug, Clone)]
pub struct SplitResult {
    /// Free linear evolution of the initial data.
    pub v_traj: Trajectory,
    /// Forced linear response with zero data.
    pub w_traj: Trajectory,
    /// Smoothness exponents, starting at 0 and ending at 1.
    pub ladder: Vec<f64>,
    /// Max over recorded times of ‖(v+w) − u‖ in the energy norm.
    pub consistency: f64,
    /// Allowed bound: ten times the solver error estimate.
    pub tolerance: f64,
}

/// Splits a recorded trajectory. The nonlinear solve is replayed with a
/// linear shadow that shares the projected forcing `p(t, u)` at every
/// integration stage, so `w` solves the forced linear problem driven by the
/// same discrete forcing the nonlinear solution saw; `v` uses the exact
/// per-mode propagator. The replay must land on the recorded grid of
/// `traj`, so pass the configuration that produced it (or one with the same
/// stride).
pub fn split(traj: &Trajectory, p: &Symbol, cfg: &SolverConfig) -> Result<SplitResult> {
    split_with_alpha1(traj, p, cfg, DEFAULT_ALPHA1)
}

pub fn split_with_alpha1(
    traj: &Trajectory,
    p: &Symbol,
    cfg: &SolverConfig,
    alpha1: f64,
) -> Result<SplitResult> {
    if traj.is_empty() {
        return Err(Error::Shape("trajectory has no recorded states".into()));
    }
    let t0 = traj.times()[0];
    let t1 = traj.times()[traj.len() - 1];
    let (u_replay, w_traj) = integrate_with_shadow(traj.initial(), t0, t1, p, cfg)?;
    if u_replay.len() != traj.len() || (u_replay.stride() - traj.stride()).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "replay grid ({} states, stride {}) does not match the recorded grid \
             ({} states, stride {})",
            u_replay.len(),
            u_replay.stride(),
            traj.len(),
            traj.stride()
        )));
    }
    let v_traj = solve_linear(traj.initial(), t0, t1, LinearForcing::Zero, cfg)?;

    let amplitude = traj.initial().energy_norm(0.0)?.max(1.0);
    let tolerance = 10.0 * cfg.error_estimate(traj.basis(), t1 - t0, amplitude);
    let mut consistency: f64 = 0.0;
    for i in 0..traj.len() {
        let vw = state_axpy(1.0, &v_traj.states()[i], 1.0, &w_traj.states()[i])?;
        consistency = consistency.max(state_distance(&vw, &traj.states()[i])?);
        // The replayed nonlinear solution must be the recorded one; a
        // mismatch means `traj` came from a different symbol or scheme.
        let replay_gap = state_distance(&u_replay.states()[i], &traj.states()[i])?;
        if replay_gap > tolerance.max(1e-9) {
            return Err(Error::Config(format!(
                "replay diverges from the recorded trajectory by {replay_gap:.3e}; \
                 was it produced by this symbol and configuration?"
            )));
        }
    }
    Ok(SplitResult { v_traj, w_traj, ladder: ladder(alpha1)?, consistency, tolerance })
}

impl SplitResult {
    pub fn consistent(&self) -> bool {
        self.consistency <= self.tolerance
    }
}

/// One ladder step: `v` measured in the current smoothness, `w` in the next.
#[derive(Debug, Clone)]
pub struct LadderRung {
    pub alpha: f64,
    pub next_alpha: f64,
    /// Decay fit of `v` in the 𝓔_α norm; `None` when the data vanish (no
    /// envelope to fit).
    pub v_decay: Option<DecayFit>,
    /// `sup_t ‖(w, w_t)‖` in the 𝓔 norm of the next rung.
    pub w_sup: f64,
    /// Log-scale growth slope of the `w` norm over the second half of the
    /// horizon.
    pub w_growth_slope: f64,
    /// Set when the slope exceeds 0.01: the higher norm fails to settle.
    pub w_growth_flagged: bool,
}

#[derive(Debug, Clone)]
pub struct LadderReport {
    pub rungs: Vec<LadderRung>,
}

impl LadderReport {
    pub fn any_flagged(&self) -> bool {
        self.rungs.iter().any(|r| r.w_growth_flagged)
    }
}

/// Per-rung decay fits for `v` and sup bounds for `w` one smoothness step
/// higher.
pub fn ladder_norms(result: &SplitResult) -> Result<LadderReport> {
    let mut rungs = Vec::with_capacity(result.ladder.len() - 1);
    for i in 0..result.ladder.len() - 1 {
        let alpha = result.ladder[i];
        let next_alpha = result.ladder[i + 1];
        let v_decay = match linear_decay_fit(&result.v_traj, alpha) {
            Ok(fit) => Some(fit),
            Err(Error::FitRejected(_)) => None,
            Err(e) => return Err(e),
        };
        let w_norms = result.w_traj.energy_norms(next_alpha)?;
        let w_sup = w_norms.iter().copied().fold(0.0, f64::max);
        let w_growth_slope = second_half_log_slope(result.w_traj.times(), &w_norms);
        rungs.push(LadderRung {
            alpha,
            next_alpha,
            v_decay,
            w_sup,
            w_growth_slope,
            w_growth_flagged: w_growth_slope > 0.01,
        });
    }
    Ok(LadderReport { rungs })
}

/// Least-squares slope of `log ‖w‖` over the second half of the horizon;
/// zero when the data give fewer than four positive samples.
fn second_half_log_slope(times: &[f64], norms: &[f64]) -> f64 {
    let half = times.len() / 2;
    let pts: Vec<(f64, f64)> = times[half..]
        .iter()
        .zip(&norms[half..])
        .filter(|(_, &n)| n > 0.0)
        .map(|(&t, &n)| (t, n.ln()))
        .collect();
    if pts.len() < 4 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let lm = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (t, l) in &pts {
        sxx += (t - tm) * (t - tm);
        sxy += (t - tm) * (l - lm);
    }
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// `∫_{t0}^{t0+h} ‖p(t, u(t))‖_{ℍ^s} dt`: the pointwise nonlinearity along
/// the trajectory, projected onto the retained modes and measured in the
/// fractional norm. Demonstrates the integrability the ladder consumes.
pub fn forcing_fractional_norm(
    traj: &Trajectory,
    p: &Symbol,
    s: f64,
    t0: f64,
    h: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("smoothness must lie in [0, 1], got {s}")));
    }
    let i0 = grid_index(traj, t0)?;
    let i1 = grid_index(traj, t0 + h)?;
    if i1 <= i0 {
        return Err(Error::Domain(format!("window [{t0}, {}] is empty", t0 + h)));
    }
    let basis = traj.basis();
    let mut series = Vec::with_capacity(i1 - i0 + 1);
    for i in i0..=i1 {
        let t = traj.times()[i];
        let values = traj.states()[i].u.evaluate();
        let forced: Vec<f64> = values.iter().map(|&v| p.eval(t, v)).collect();
        if forced.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation { context: "pointwise nonlinearity".into(), t });
        }
        series.push(basis.project(&forced)?.sobolev_norm(s)?);
    }
    simpson_uniform(&series, traj.stride())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{integrate, Method};
    use crate::spectral::{Basis, Domain, PhaseState};
    use crate::symbols::BaseFn;
    use std::sync::Arc;

    const PI: f64 = std::f64::consts::PI;

    fn basis_n(n: usize) -> Arc<Basis> {
        Basis::build(Domain::interval(PI, (4 * n).max(32)).unwrap(), n).unwrap()
    }

    fn state_from(basis: &Arc<Basis>, u: Vec<f64>, ut: Vec<f64>) -> PhaseState {
        PhaseState::new(
            basis.field_from_coeffs(u).unwrap(),
            basis.field_from_coeffs(ut).unwrap(),
        )
        .unwrap()
    }

    fn zero_symbol() -> Symbol {
        Symbol::autonomous(BaseFn::zero())
    }

    #[test]
    fn ladder_follows_the_five_halves_rule() {
        let close = |got: &[f64], want: &[f64]| {
            got.len() == want.len()
                && got.iter().zip(want).all(|(g, w)| (g - w).abs() < 1e-12)
        };
        assert!(close(&ladder(0.18).unwrap(), &[0.0, 0.18, 0.45, 1.0]));
        assert!(close(&ladder(0.3).unwrap(), &[0.0, 0.3, 0.75, 1.0]));
        assert!(close(&ladder(0.5).unwrap(), &[0.0, 0.5, 1.0]));
        assert!(ladder(0.0).is_err());
        assert!(ladder(1.0).is_err());
    }

    #[test]
    fn free_dynamics_split_has_zero_w_and_exact_v() {
        let basis = basis_n(3);
        let state = state_from(&basis, vec![1.0, -0.4, 0.2], vec![0.0, 0.3, 0.0]);
        let cfg = SolverConfig::new(1e-2)
            .unwrap()
            .with_method(Method::ExpMode)
            .with_record_every(10);
        let traj = integrate(&state, 0.0, 5.0, &zero_symbol(), &cfg).unwrap();
        let result = split(&traj, &zero_symbol(), &cfg).unwrap();
        for w in result.w_traj.states() {
            assert!(w.u.coeffs().iter().all(|&c| c == 0.0));
            assert!(w.ut.coeffs().iter().all(|&c| c == 0.0));
        }
        // Both u and v come from the exact propagator, differing only in
        // step granularity, so they agree to roundoff.
        for i in 0..traj.len() {
            let d = state_distance(&result.v_traj.states()[i], &traj.states()[i]).unwrap();
            assert!(d <= 1e-12, "v deviates from u by {d}");
        }
    }

    #[test]
    fn zero_data_split_puts_everything_in_w() {
        let basis = basis_n(3);
        let zero = state_from(&basis, vec![0.0; 3], vec![0.0; 3]);
        // A constant source keeps the trajectory nontrivial.
        let p = Symbol::autonomous(BaseFn::constant(0.7));
        let cfg = SolverConfig::new(1e-2).unwrap().with_record_every(10);
        let traj = integrate(&zero, 0.0, 5.0, &p, &cfg).unwrap();
        let result = split(&traj, &p, &cfg).unwrap();
        for v in result.v_traj.states() {
            assert!(v.u.coeffs().iter().all(|&c| c == 0.0));
        }
        // With identical linear parts and shared stage forcing, w replays
        // u bit for bit.
        for i in 0..traj.len() {
            assert_eq!(
                result.w_traj.states()[i].u.coeffs(),
                traj.states()[i].u.coeffs()
            );
        }
    }

    #[test]
    fn builtin_family_split_is_consistent_and_v_decays() {
        let basis = basis_n(8);
        let coeffs: Vec<f64> = (0..8).map(|k| 0.8f64.powi(k as i32) * 0.5).collect();
        let state = state_from(&basis, coeffs, vec![0.0; 8]);
        let p = Symbol::builtin(1.0, 0.3).unwrap();
        let cfg = SolverConfig::new(1e-3).unwrap().with_record_every(50);
        let traj = integrate(&state, 0.0, 30.0, &p, &cfg).unwrap();
        let result = split(&traj, &p, &cfg).unwrap();
        assert!(result.consistent(), "consistency {} > {}", result.consistency, result.tolerance);
        assert!(result.consistency <= 1e-6);
        let fit = linear_decay_fit(&result.v_traj, 0.0).unwrap();
        assert!((fit.rate - 0.5).abs() < 0.1, "v decay rate {}", fit.rate);
    }

    #[test]
    fn split_is_linear_in_the_initial_data() {
        let basis = basis_n(4);
        let state = state_from(&basis, vec![0.5, -0.2, 0.1, 0.0], vec![0.1, 0.0, 0.0, 0.2]);
        let doubled = state_from(&basis, vec![1.0, -0.4, 0.2, 0.0], vec![0.2, 0.0, 0.0, 0.4]);
        let p = Symbol::builtin(1.0, 0.2).unwrap();
        let cfg = SolverConfig::new(1e-2).unwrap().with_record_every(20);
        let t1 = integrate(&state, 0.0, 4.0, &p, &cfg).unwrap();
        let t2 = integrate(&doubled, 0.0, 4.0, &p, &cfg).unwrap();
        let s1 = split(&t1, &p, &cfg).unwrap();
        let s2 = split(&t2, &p, &cfg).unwrap();
        // Doubling is exact in IEEE arithmetic, so v doubles bit for bit.
        for i in 0..s1.v_traj.len() {
            let a = s1.v_traj.states()[i].u.coeffs();
            let b = s2.v_traj.states()[i].u.coeffs();
            for k in 0..a.len() {
                assert_eq!(2.0 * a[k], b[k]);
            }
        }
    }

    #[test]
    fn ladder_norms_report_no_growth_for_decaying_runs() {
        let basis = basis_n(6);
        let coeffs: Vec<f64> = (0..6).map(|k| 0.7f64.powi(k as i32)).collect();
        let state = state_from(&basis, coeffs, vec![0.0; 6]);
        let p = Symbol::builtin(1.0, 0.4).unwrap();
        let cfg = SolverConfig::new(1e-2).unwrap().with_record_every(10);
        let traj = integrate(&state, 0.0, 20.0, &p, &cfg).unwrap();
        let result = split(&traj, &p, &cfg).unwrap();
        let report = ladder_norms(&result).unwrap();
        assert_eq!(report.rungs.len(), result.ladder.len() - 1);
        assert!(!report.any_flagged());
        for rung in &report.rungs {
            let fit = rung.v_decay.as_ref().expect("nonzero v data");
            assert!(fit.rate >= 0.4, "rate {} at rung {}", fit.rate, rung.alpha);
            assert!(rung.w_sup.is_finite());
        }
    }

    #[test]
    fn ladder_norms_zero_forcing_gives_zero_w_bounds() {
        let basis = basis_n(2);
        let state = state_from(&basis, vec![1.0, 0.2], vec![0.0, 0.0]);
        let cfg = SolverConfig::new(1e-2).unwrap().with_record_every(10);
        let traj = integrate(&state, 0.0, 10.0, &zero_symbol(), &cfg).unwrap();
        let result = split(&traj, &zero_symbol(), &cfg).unwrap();
        let report = ladder_norms(&result).unwrap();
        for rung in &report.rungs {
            assert_eq!(rung.w_sup, 0.0);
            assert!(!rung.w_growth_flagged);
        }
    }

    #[test]
    fn forcing_norm_examples() {
        let basis = basis_n(16);
        let state = state_from(&basis, vec![0.0; 16], vec![0.0; 16]);
        let cfg = SolverConfig::new(1e-2).unwrap().with_record_every(10);
        let traj = integrate(&state, 0.0, 2.0, &zero_symbol(), &cfg).unwrap();

        assert_eq!(
            forcing_fractional_norm(&traj, &zero_symbol(), 0.0, 0.0, 1.0).unwrap(),
            0.0
        );

        // Constant forcing: the integrand is ‖P_N 1‖ = √(8/π · Σ_{odd k ≤ N} k⁻²)
        // at every time (the L² norm of the truncated sine series of 1,
        // which approaches √π as N grows).
        let one = Symbol::autonomous(BaseFn::constant(1.0));
        let got = forcing_fractional_norm(&traj, &one, 0.0, 0.0, 1.0).unwrap();
        let series: f64 = (1..=16).filter(|k| k % 2 == 1).map(|k| 1.0 / (k * k) as f64).sum();
        let truncated = (8.0 / PI * series).sqrt();
        assert!((got - truncated).abs() < 1e-10, "{got} vs {truncated}");
        assert!(got < PI.sqrt());

        // Linearity in the window length for a time-constant integrand.
        let two = forcing_fractional_norm(&traj, &one, 0.0, 0.0, 2.0).unwrap();
        assert!((two - 2.0 * got).abs() < 1e-10);
    }

    #[test]
    fn forcing_norm_finite_for_builtin_family() {
        let basis = basis_n(6);
        let coeffs: Vec<f64> = (0..6).map(|k| 0.8f64.powi(k as i32)).collect();
        let state = state_from(&basis, coeffs, vec![0.0; 6]);
        let p = Symbol::builtin(1.0, 0.5).unwrap();
        let cfg = SolverConfig::new(1e-2).unwrap().with_record_every(5);
        let traj = integrate(&state, 0.0, 8.0, &p, &cfg).unwrap();
        for s in [0.0, 0.45, 1.0] {
            let val = forcing_fractional_norm(&traj, &p, s, 0.0, 4.0).unwrap();
            assert!(val.is_finite() && val >= 0.0);
        }
        assert!(forcing_fractional_norm(&traj, &p, 1.5, 0.0, 1.0).is_err());
    }
}
