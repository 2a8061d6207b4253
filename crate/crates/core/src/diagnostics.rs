//! Scalar functionals and inequality checks over recorded trajectories:
//! the energy functional and its decomposition, dissipation certificates,
//! a Gronwall-type descent bound with an ODE comparison oracle, absorbing
//! ball detection, space-time norms, decay fits, and the continuation
//! horizon formula.

use crate::quad::simpson_uniform;
use crate::solver::Trajectory;
use crate::symbols::Symbol;
use crate::{Error, Result};

/// Terms of the energy functional
/// `I = (u_t,u) + ½‖u‖² + ‖u_t‖² + ‖∇u‖² − 2∫F₀(u)`,
/// one value per recorded time. `total` is the sum of the five parts in a
/// fixed order.
#[derive(Debug, Clone)]
pub struct EnergyBreakdown {
    pub times: Vec<f64>,
    /// ‖u_t‖²
    pub i1: Vec<f64>,
    /// ½‖u‖²
    pub i2: Vec<f64>,
    /// ‖∇u‖²
    pub i3: Vec<f64>,
    /// (u_t, u)
    pub i4: Vec<f64>,
    /// −2∫F₀(u)dx with F₀ the antiderivative of the autonomous part
    pub i5: Vec<f64>,
    pub total: Vec<f64>,
}

impl EnergyBreakdown {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Max over times of |I − (I₁+…+I₅)|. Zero up to floating-point
    /// reassociation by construction; exposed so the invariant is checkable.
    pub fn additivity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            let sum = self.i1[i] + self.i2[i] + self.i3[i] + self.i4[i] + self.i5[i];
            worst = worst.max((self.total[i] - sum).abs());
        }
        worst
    }

    /// Largest `c ≥ 0` such that `I(t) ≥ c·‖(u,u_t)‖²_{𝓔₀} − c` at every
    /// recorded time, given the energy norms. `None` when no recorded time
    /// constrains the fit (all energies below 1, inequality vacuous for any
    /// c bounded by the minimum of I + c there).
    pub fn coercivity_constant(&self, energy_norms: &[f64]) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (i, e) in energy_norms.iter().enumerate() {
            let denom = e * e - 1.0;
            if denom > 1e-9 {
                let c = self.total[i] / denom;
                best = Some(best.map_or(c, |b: f64| b.min(c)));
            }
        }
        best.map(|c| c.max(0.0))
    }
}

/// Five-term split of the energy functional along a trajectory. The
/// autonomous part of `p` supplies `F₀`; the time-dependent perturbation
/// does not enter `I₅`.
pub fn energy_breakdown(traj: &Trajectory, p: &Symbol) -> Result<EnergyBreakdown> {
    if traj.is_empty() {
        return Err(Error::Shape("trajectory has no recorded states".into()));
    }
    let basis = traj.basis();
    let weights = basis.quad_weights();
    let n = traj.len();
    let mut out = EnergyBreakdown {
        times: traj.times().to_vec(),
        i1: Vec::with_capacity(n),
        i2: Vec::with_capacity(n),
        i3: Vec::with_capacity(n),
        i4: Vec::with_capacity(n),
        i5: Vec::with_capacity(n),
        total: Vec::with_capacity(n),
    };
    for state in traj.states() {
        let l2_ut = state.ut.sobolev_norm(0.0)?;
        let l2_u = state.u.sobolev_norm(0.0)?;
        let h1_u = state.u.sobolev_norm(1.0)?;
        let i1 = l2_ut * l2_ut;
        let i2 = 0.5 * l2_u * l2_u;
        let i3 = h1_u * h1_u;
        let mut i4 = 0.0;
        for (cu, cv) in state.u.coeffs().iter().zip(state.ut.coeffs()) {
            i4 += cu * cv;
        }
        let values = state.u.evaluate();
        let mut f0_integral = 0.0;
        for (w, v) in weights.iter().zip(&values) {
            f0_integral += w * p.antiderivative_f0(*v);
        }
        if !f0_integral.is_finite() {
            return Err(Error::Evaluation {
                context: "quadrature of the nonlinearity antiderivative".into(),
                t: f64::NAN,
            });
        }
        let i5 = -2.0 * f0_integral;
        out.i1.push(i1);
        out.i2.push(i2);
        out.i3.push(i3);
        out.i4.push(i4);
        out.i5.push(i5);
        out.total.push(i1 + i2 + i3 + i4 + i5);
    }
    Ok(out)
}

/// Certificate for `dI/dt ≤ −C_decay(‖u_t‖² + ‖∇u‖²) + C_src`, fitted on a
/// logarithmic grid. `holds()` is true when the worst residual stays within
/// the centered-difference slack.
#[derive(Debug, Clone, Copy)]
pub struct DissipationFit {
    pub c_decay: f64,
    pub c_src: f64,
    pub worst_residual: f64,
    pub slack: f64,
}

impl DissipationFit {
    pub fn holds(&self) -> bool {
        self.worst_residual <= self.slack
    }
}

const C_GRID_POINTS: usize = 61;

fn c_grid() -> impl Iterator<Item = f64> {
    (0..C_GRID_POINTS).map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / (C_GRID_POINTS - 1) as f64))
}

/// Fits the certificate over pooled samples `(dI/dt, ‖u_t‖²+‖∇u‖²)`. The
/// returned pair has the smallest admissible `C_src` on the grid and, for
/// that allowance, the largest admissible `C_decay` (the most informative
/// certificate with the least source term).
fn fit_dissipation_pair(samples: &[(f64, f64)], slack: f64) -> DissipationFit {
    let admissible = |cd: f64, cs: f64| {
        samples.iter().all(|&(didt, d)| didt + cd * d - cs <= slack)
    };
    let cd_min = c_grid().next().expect("grid nonempty");
    let cs_fit = c_grid().find(|&cs| admissible(cd_min, cs));
    let (c_decay, c_src) = match cs_fit {
        Some(cs) => {
            let cd = c_grid()
                .filter(|&cd| admissible(cd, cs))
                .fold(cd_min, f64::max);
            (cd, cs)
        }
        // Nothing on the grid certifies the inequality; report the weakest
        // grid pair so the residual shows the violation.
        None => (cd_min, c_grid().last().expect("grid nonempty")),
    };
    let worst_residual = samples
        .iter()
        .map(|&(didt, d)| didt + c_decay * d - c_src)
        .fold(f64::NEG_INFINITY, f64::max);
    DissipationFit { c_decay, c_src, worst_residual, slack }
}

fn dissipation_samples(traj: &Trajectory, p: &Symbol, out: &mut Vec<(f64, f64)>) -> Result<f64> {
    if traj.len() < 3 {
        return Err(Error::Shape(format!(
            "dissipation fit needs at least 3 recorded times, got {}",
            traj.len()
        )));
    }
    let bd = energy_breakdown(traj, p)?;
    let dt = traj.stride();
    for i in 1..bd.len() - 1 {
        let didt = (bd.total[i + 1] - bd.total[i - 1]) / (2.0 * dt);
        let d = bd.i1[i] + bd.i3[i];
        out.push((didt, d));
    }
    Ok(10.0 * dt * dt)
}

/// Fits the dissipation certificate for a single trajectory. `dI/dt` is
/// estimated by centered differences on the recorded grid, so the check
/// carries an explicit O(Δ²) slack of `10·Δ²`.
pub fn dissipation_residual(traj: &Trajectory, p: &Symbol) -> Result<DissipationFit> {
    let mut samples = Vec::new();
    let slack = dissipation_samples(traj, p, &mut samples)?;
    Ok(fit_dissipation_pair(&samples, slack))
}

/// Fits one certificate valid across every run simultaneously; the slack is
/// the largest of the per-run slacks.
pub fn dissipation_common(runs: &[(&Trajectory, &Symbol)]) -> Result<DissipationFit> {
    if runs.is_empty() {
        return Err(Error::Shape("no runs supplied".into()));
    }
    let mut pool = DissipationPool::new();
    for (traj, p) in runs {
        pool.add(traj, p)?;
    }
    pool.fit()
}

/// Accumulates dissipation samples across runs that are too many to hold in
/// memory at once; trajectories can be dropped after `add`. `fit` produces
/// the same certificate [`dissipation_common`] would.
#[derive(Debug, Default)]
pub struct DissipationPool {
    samples: Vec<(f64, f64)>,
    slack: f64,
}

impl DissipationPool {
    pub fn new() -> Self {
        Self { samples: Vec::new(), slack: 0.0 }
    }

    pub fn add(&mut self, traj: &Trajectory, p: &Symbol) -> Result<()> {
        let slack = dissipation_samples(traj, p, &mut self.samples)?;
        self.slack = self.slack.max(slack);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn fit(&self) -> Result<DissipationFit> {
        if self.samples.is_empty() {
            return Err(Error::Shape("no dissipation samples pooled".into()));
        }
        Ok(fit_dissipation_pair(&self.samples, self.slack))
    }
}

/// One term of the descent hypothesis `dI/dt ≤ −a·I_i^α + b` (required for
/// every term index wherever `I_i ≥ 0`).
#[derive(Debug, Clone, Copy)]
pub struct GronwallTerm {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct GronwallSpec {
    pub terms: Vec<GronwallTerm>,
    pub initial: f64,
    pub eta: f64,
}

impl GronwallSpec {
    fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::Config("descent spec needs at least one term".into()));
        }
        for (i, t) in self.terms.iter().enumerate() {
            if !(t.a > 0.0 && t.b > 0.0 && t.alpha > 0.0)
                || !t.a.is_finite()
                || !t.b.is_finite()
                || !t.alpha.is_finite()
            {
                return Err(Error::Config(format!(
                    "term {i}: constants must be positive and finite, got (a, b, α) = ({}, {}, {})",
                    t.a, t.b, t.alpha
                )));
            }
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::Config(format!("slack η must be positive, got {}", self.eta)));
        }
        if !self.initial.is_finite() {
            return Err(Error::Config("initial value must be finite".into()));
        }
        Ok(())
    }
}

/// Certified asymptotic bound and entry time. The proof's descent argument
/// yields the rate: while `I > bound + η`, some term exceeds
/// `(b_i/a_i + δ)^{1/α_i}` where `δ` solves `Σ(b_i/a_i + δ)^{1/α_i} = bound + η`,
/// so `dI/dt ≤ −(min a_i)·δ` there.
#[derive(Debug, Clone, Copy)]
pub struct GronwallCertificate {
    /// `Σ (b_i/a_i)^{1/α_i}`
    pub bound: f64,
    /// `bound + η`; the level certified for all `t ≥ entry_time`
    pub certified: f64,
    pub entry_time: f64,
    /// `(min a_i)·δ`
    pub descent_rate: f64,
    pub delta: f64,
}

pub fn gronwall_bound(spec: &GronwallSpec) -> Result<GronwallCertificate> {
    spec.validate()?;
    let bound: f64 = spec.terms.iter().map(|t| (t.b / t.a).powf(1.0 / t.alpha)).sum();
    let certified = bound + spec.eta;
    let level = |delta: f64| -> f64 {
        spec.terms.iter().map(|t| (t.b / t.a + delta).powf(1.0 / t.alpha)).sum()
    };
    // level(δ) is strictly increasing with level(0) = bound < certified.
    let mut hi = 1.0;
    while level(hi) < certified {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::FitRejected("descent slack solve diverged".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if level(mid) < certified {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    let delta = 0.5 * (lo + hi);
    let a_min = spec.terms.iter().map(|t| t.a).fold(f64::INFINITY, f64::min);
    let descent_rate = a_min * delta;
    let entry_time = ((spec.initial - certified) / descent_rate).max(0.0);
    Ok(GronwallCertificate { bound, certified, entry_time, descent_rate, delta })
}

/// Worst-case comparison trajectory for the descent hypothesis: with the
/// split `I_i = w_i·I` (weights ≥ 0 summing to 1), the slowest admissible
/// descent is `I' = min_i(−a_i (w_i I)₊^{α_i} + b_i)`. Integrated with RK4;
/// returns `(t, I(t))` samples. Any certificate must dominate this curve
/// past its entry time.
pub fn gronwall_comparison_ode(
    spec: &GronwallSpec,
    weights: &[f64],
    horizon: f64,
    dt: f64,
) -> Result<Vec<(f64, f64)>> {
    spec.validate()?;
    if weights.len() != spec.terms.len() {
        return Err(Error::Shape(format!(
            "{} weights for {} terms",
            weights.len(),
            spec.terms.len()
        )));
    }
    if weights.iter().any(|w| *w < 0.0) {
        return Err(Error::Config("weights must be nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Config("weights must not all vanish".into()));
    }
    if !(dt > 0.0 && horizon > 0.0) {
        return Err(Error::Config("horizon and step must be positive".into()));
    }
    let w: Vec<f64> = weights.iter().map(|x| x / total).collect();
    let slope = |i_val: f64| -> f64 {
        spec.terms
            .iter()
            .zip(&w)
            .map(|(t, wi)| -t.a * (wi * i_val).max(0.0).powf(t.alpha) + t.b)
            .fold(f64::INFINITY, f64::min)
    };
    let steps = (horizon / dt).ceil() as usize;
    let h = horizon / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut i_val = spec.initial;
    out.push((0.0, i_val));
    for s in 0..steps {
        let k1 = slope(i_val);
        let k2 = slope(i_val + 0.5 * h * k1);
        let k3 = slope(i_val + 0.5 * h * k2);
        let k4 = slope(i_val + h * k3);
        i_val += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push(((s + 1) as f64 * h, i_val));
    }
    Ok(out)
}

/// Per-member first entry times into the energy-norm ball of the given
/// radius, requiring each member to stay inside for the rest of its horizon.
#[derive(Debug, Clone)]
pub struct AbsorbingReport {
    pub entry_times: Vec<f64>,
    pub max_entry: f64,
    pub min_entry: f64,
    /// `(max − min) / max`, zero when all entries coincide or are zero.
    pub spread: f64,
}

pub fn absorbing_entry(trajs: &[Trajectory], radius: f64) -> Result<AbsorbingReport> {
    if trajs.is_empty() {
        return Err(Error::Shape("no trajectories supplied".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("ball radius must be positive, got {radius}")));
    }
    let mut entry_times = Vec::with_capacity(trajs.len());
    for (member, traj) in trajs.iter().enumerate() {
        let norms = traj.energy_norms(0.0)?;
        let last_outside = norms.iter().rposition(|&n| n > radius);
        let entry = match last_outside {
            None => traj.times()[0],
            Some(idx) if idx + 1 < norms.len() => traj.times()[idx + 1],
            Some(_) => return Err(Error::NonAbsorbed { member, radius }),
        };
        entry_times.push(entry);
    }
    let max_entry = entry_times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_entry = entry_times.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if max_entry > 0.0 { (max_entry - min_entry) / max_entry } else { 0.0 };
    Ok(AbsorbingReport { entry_times, max_entry, min_entry, spread })
}

pub(crate) fn grid_index(traj: &Trajectory, t: f64) -> Result<usize> {
    let t0 = traj.times()[0];
    let rel = (t - t0) / traj.stride();
    let idx = rel.round();
    if (rel - idx).abs() > 1e-6 {
        return Err(Error::Domain(format!(
            "time {t} does not lie on the recorded grid (stride {})",
            traj.stride()
        )));
    }
    let idx = idx as isize;
    if idx < 0 || idx as usize >= traj.len() {
        return Err(Error::Domain(format!("time {t} outside the recorded horizon")));
    }
    Ok(idx as usize)
}

/// `‖u‖_{L⁴(t0, t0+h; L¹²)}` over one window; endpoints must lie on the
/// recorded grid.
pub fn strichartz_norm(traj: &Trajectory, t0: f64, h: f64) -> Result<f64> {
    let i0 = grid_index(traj, t0)?;
    let i1 = grid_index(traj, t0 + h)?;
    if i1 <= i0 {
        return Err(Error::Domain(format!("window [{t0}, {}] is empty", t0 + h)));
    }
    let l12 = traj.l12_norms();
    let fourth: Vec<f64> = l12[i0..=i1].iter().map(|v| v.powi(4)).collect();
    Ok(simpson_uniform(&fourth, traj.stride())?.max(0.0).powf(0.25))
}

/// Sliding-window space-time norms, one start per recorded grid point.
#[derive(Debug, Clone)]
pub struct WindowSeries {
    pub h: f64,
    pub t_starts: Vec<f64>,
    pub norms: Vec<f64>,
}

impl WindowSeries {
    pub fn max(&self) -> f64 {
        self.norms.iter().copied().fold(0.0, f64::max)
    }
}

pub fn strichartz_windows(traj: &Trajectory, h: f64) -> Result<WindowSeries> {
    let stride = traj.stride();
    let len = (h / stride).round() as usize;
    if len == 0 || (h - len as f64 * stride).abs() > 1e-6 * h.max(1.0) {
        return Err(Error::Domain(format!(
            "window length {h} is not a multiple of the recorded stride {stride}"
        )));
    }
    if len >= traj.len() {
        return Err(Error::Domain(format!(
            "window length {h} exceeds the recorded horizon"
        )));
    }
    let l12 = traj.l12_norms();
    let fourth: Vec<f64> = l12.iter().map(|v| v.powi(4)).collect();
    let mut t_starts = Vec::with_capacity(traj.len() - len);
    let mut norms = Vec::with_capacity(traj.len() - len);
    for i0 in 0..traj.len() - len {
        let val = simpson_uniform(&fourth[i0..=i0 + len], stride)?.max(0.0).powf(0.25);
        t_starts.push(traj.times()[i0]);
        norms.push(val);
    }
    Ok(WindowSeries { h, t_starts, norms })
}

/// Empirically required constant for the window bound
/// `‖u‖_{L⁴(t0,t0+h;L¹²)} ≤ C_h (‖(u₀,u₁)‖_{𝓔₀} + ‖G‖_{L¹(L²)})` on a linear
/// run: the worst window norm divided by the data term. `forcing_l1l2` is 0
/// for free runs.
pub fn strichartz_required_constant(
    traj: &Trajectory,
    h: f64,
    forcing_l1l2: f64,
) -> Result<f64> {
    let windows = strichartz_windows(traj, h)?;
    let data = traj.initial().energy_norm(0.0)? + forcing_l1l2;
    if data <= 0.0 {
        return Err(Error::Domain("zero data: required constant undefined".into()));
    }
    Ok(windows.max() / data)
}

/// Both sides of the space-time interpolation inequality
/// `‖u‖_{L⁵(0,t;L¹⁰)} ≤ ‖u‖_{L⁴(0,t;L¹²)}^{4/5} · (sup_{[0,t]} ‖∇u‖)^{1/5}`
/// evaluated on the recorded window `[start, t]`.
pub fn interpolation_check(traj: &Trajectory, t: f64) -> Result<(f64, f64)> {
    let i1 = grid_index(traj, t)?;
    if i1 == 0 {
        return Err(Error::Domain("interpolation window is empty".into()));
    }
    let stride = traj.stride();
    let states = &traj.states()[..=i1];
    let mut tenth = Vec::with_capacity(states.len());
    let mut grad_sup: f64 = 0.0;
    for s in states {
        tenth.push(s.u.lp_space_norm(10.0)?.powi(5));
        grad_sup = grad_sup.max(s.u.sobolev_norm(1.0)?);
    }
    let lhs = simpson_uniform(&tenth, stride)?.max(0.0).powf(0.2);
    let l12 = &traj.l12_norms()[..=i1];
    let fourth: Vec<f64> = l12.iter().map(|v| v.powi(4)).collect();
    let l4l12_fourth = simpson_uniform(&fourth, stride)?.max(0.0);
    let rhs = l4l12_fourth.powf(0.2) * grad_sup.powf(0.2);
    Ok((lhs, rhs))
}

/// Exponential decay fit `‖(u,u_t)‖_{𝓔_s}(t) ≈ C e^{−rate·t}` for a free
/// linear trajectory.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    pub rate: f64,
    pub prefactor: f64,
    /// RMS residual of the least-squares line in log scale.
    pub residual: f64,
}

/// Fits the decay rate on windowed envelope maxima: the energy norm of an
/// oscillatory mode sweeps a periodic factor under the exponential
/// envelope, so a direct fit through all samples carries the oscillation
/// into the residual. Sampling the maximum of each window (one slow
/// oscillation long) at its own time isolates the envelope. Rejected when
/// the data vanish or the log-scale residual reaches 0.1.
pub fn linear_decay_fit(traj: &Trajectory, s: f64) -> Result<DecayFit> {
    let norms = traj.energy_norms(s)?;
    let peak = norms.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(Error::FitRejected("zero trajectory: nothing to fit".into()));
    }
    // One full oscillation of the energy norm of the slowest underdamped
    // mode lasts π/ω₁; for overdamped spectra fall back to an eighth of
    // the horizon.
    let lam1 = traj.basis().eigenvalues()[0];
    let span = traj.times()[traj.len() - 1] - traj.times()[0];
    let stride = traj.stride();
    let mut window = if lam1 > 0.26 {
        std::f64::consts::PI / (lam1 - 0.25).sqrt() + stride
    } else {
        span / 8.0
    };
    window = window.clamp(3.0 * stride, span / 4.0);
    let per_window = (window / stride).ceil() as usize;
    let n_windows = traj.len() / per_window;
    if n_windows < 4 {
        return Err(Error::FitRejected(format!(
            "horizon holds only {n_windows} fit windows; at least 4 required"
        )));
    }
    let mut ts = Vec::with_capacity(n_windows);
    let mut logs = Vec::with_capacity(n_windows);
    for w in 0..n_windows {
        let lo = w * per_window;
        let hi = ((w + 1) * per_window).min(traj.len());
        let (arg, val) = norms[lo..hi]
            .iter()
            .enumerate()
            .fold((lo, f64::NEG_INFINITY), |(ai, av), (i, &v)| {
                if v > av {
                    (lo + i, v)
                } else {
                    (ai, av)
                }
            });
        if val <= 0.0 {
            return Err(Error::FitRejected("window with no positive data".into()));
        }
        ts.push(traj.times()[arg]);
        logs.push(val.ln());
    }
    let n = ts.len() as f64;
    let t_mean = ts.iter().sum::<f64>() / n;
    let l_mean = logs.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (t, l) in ts.iter().zip(&logs) {
        sxx += (t - t_mean) * (t - t_mean);
        sxy += (t - t_mean) * (l - l_mean);
    }
    if sxx <= 0.0 {
        return Err(Error::FitRejected("degenerate fit window times".into()));
    }
    let slope = sxy / sxx;
    let intercept = l_mean - slope * t_mean;
    let mut ss = 0.0;
    for (t, l) in ts.iter().zip(&logs) {
        let r = l - (intercept + slope * t);
        ss += r * r;
    }
    let residual = (ss / n).sqrt();
    if residual >= 0.1 {
        return Err(Error::FitRejected(format!(
            "log-scale fit residual {residual:.3} exceeds 0.1"
        )));
    }
    Ok(DecayFit { rate: -slope, prefactor: intercept.exp(), residual })
}

/// Certified continuation horizon
/// `t_max = (min{1/(2 C R^{1/5} ((C₁R)^{4−4κ/5} + 2)), 1})^{5/κ}`.
/// The constants `C`, `C₁` are inputs: the formula is a calculator, not an
/// estimator.
pub fn tmax_bound(r: f64, c: f64, c1: f64, kappa: f64) -> Result<f64> {
    if !(r > 0.0 && c > 0.0 && c1 > 0.0) {
        return Err(Error::Domain("all constants must be positive".into()));
    }
    if !(kappa > 0.0 && kappa < 4.0) {
        return Err(Error::Domain(format!("κ must lie in (0, 4), got {kappa}")));
    }
    let inner = 1.0 / (2.0 * c * r.powf(0.2) * ((c1 * r).powf(4.0 - 0.8 * kappa) + 2.0));
    Ok(inner.min(1.0).powf(5.0 / kappa))
}
