//! Time-dependent nonlinearities ("symbols") of the closed parametric form
//!
//! ```text
//! p(t, u) = f0(u) + ε a(t + φ) b(u),
//! ```
//!
//! where `f0(u) = -u|u|^{4-κ} + g(u)` with `g` a polynomial of degree ≤ 3,
//! `a` is sine, cosine or the quasiperiodic `sin t + sin(√2 t)`, and
//! `b(u) = sin(u³)`. The module provides pointwise evaluation, the time-shift
//! flow on the phase parameter, hull sampling, numerical checks of the
//! standing assumptions on the family, and a metric on symbols modelled on
//! the `C(ℝ; C¹(ℝ))` topology.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const TAU: f64 = std::f64::consts::TAU;

fn abs_pow(u: f64, e: f64) -> f64 {
    if e == 3.0 {
        let a = u.abs();
        a * a * a
    } else if e == 2.0 {
        u * u
    } else if e == 1.0 {
        u.abs()
    } else if e == 0.0 {
        1.0
    } else {
        u.abs().powf(e)
    }
}

/// Autonomous part `f0(u) = -u|u|^{4-κ} + g(u)`. The damping term can be
/// switched off, and `g` is a polynomial of degree at most 3 (coefficients
/// in ascending order), so constants, linear tilts and cubic wells are all
/// expressible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseFn {
    damping: bool,
    kappa: f64,
    poly: Vec<f64>,
}

impl BaseFn {
    /// The default family `-u|u|^{4-κ}` with no polynomial part.
    pub fn builtin(kappa: f64) -> Result<Self> {
        Self::new(true, kappa, Vec::new())
    }

    /// `f0 ≡ 0`.
    pub fn zero() -> Self {
        Self { damping: false, kappa: 1.0, poly: Vec::new() }
    }

    /// Constant `f0 ≡ c`.
    pub fn constant(c: f64) -> Self {
        Self { damping: false, kappa: 1.0, poly: vec![c] }
    }

    /// Pure polynomial `f0(u) = Σ coeffs[i] u^i`, degree ≤ 3.
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(false, 1.0, coeffs)
    }

    /// Full form with both the damping term and a polynomial part.
    pub fn new(damping: bool, kappa: f64, poly: Vec<f64>) -> Result<Self> {
        if damping && !(kappa > 0.0 && kappa <= 4.0) {
            return Err(Error::Config(format!("kappa must lie in (0, 4], got {kappa}")));
        }
        if poly.len() > 4 {
            return Err(Error::Config(format!(
                "polynomial part is capped at degree 3, got degree {}",
                poly.len() - 1
            )));
        }
        if poly.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("polynomial coefficients must be finite".into()));
        }
        Ok(Self { damping, kappa, poly })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn is_zero(&self) -> bool {
        !self.damping && self.poly.iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, u: f64) -> f64 {
        let mut v = 0.0;
        if self.damping {
            v -= u * abs_pow(u, 4.0 - self.kappa);
        }
        let mut poly = 0.0;
        for &c in self.poly.iter().rev() {
            poly = poly * u + c;
        }
        v + poly
    }

    pub fn eval_du(&self, u: f64) -> f64 {
        let mut v = 0.0;
        if self.damping {
            v -= (5.0 - self.kappa) * abs_pow(u, 4.0 - self.kappa);
        }
        let mut dpoly = 0.0;
        for i in (1..self.poly.len()).rev() {
            dpoly = dpoly * u + i as f64 * self.poly[i];
        }
        v + dpoly
    }

    /// Antiderivative `F0(u) = ∫_0^u f0(v) dv`, in closed form: the damping
    /// term integrates to `-|u|^{6-κ}/(6-κ)` and the polynomial part term by
    /// term.
    pub fn antiderivative(&self, u: f64) -> f64 {
        let mut v = 0.0;
        if self.damping {
            let e = 6.0 - self.kappa;
            v -= abs_pow(u, e) / e;
        }
        for (i, &c) in self.poly.iter().enumerate() {
            v += c * u.powi(i as i32 + 1) / (i as f64 + 1.0);
        }
        v
    }
}

/// Time profile `a(t)` of the perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalPart {
    Sin,
    Cos,
    /// `sin t + sin(√2 t)`; almost periodic but not periodic.
    Quasiperiodic,
}

impl TemporalPart {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            TemporalPart::Sin => t.sin(),
            TemporalPart::Cos => t.cos(),
            TemporalPart::Quasiperiodic => t.sin() + (std::f64::consts::SQRT_2 * t).sin(),
        }
    }

    /// Exact period, if any.
    pub fn period(&self) -> Option<f64> {
        match self {
            TemporalPart::Sin | TemporalPart::Cos => Some(TAU),
            TemporalPart::Quasiperiodic => None,
        }
    }

    /// Window length representative of the profile's recurrence, used for
    /// sampling moduli of continuity and quasiperiodic hulls.
    pub fn sampling_window(&self) -> f64 {
        match self.period() {
            Some(p) => p,
            None => TAU * (1.0 + std::f64::consts::SQRT_2),
        }
    }
}

/// Amplitude profile `b(u)` of the perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeFn {
    /// `b(u) = sin(u³)`; bounded with polynomially growing derivative.
    SinCubed,
}

impl ShapeFn {
    pub fn value(&self, u: f64) -> f64 {
        match self {
            ShapeFn::SinCubed => (u * u * u).sin(),
        }
    }

    pub fn deriv(&self, u: f64) -> f64 {
        match self {
            ShapeFn::SinCubed => 3.0 * u * u * (u * u * u).cos(),
        }
    }
}

/// A member of the symbol family together with its phase. The time-shift
/// flow acts by advancing the phase, so a symbol also names a point of the
/// hull of its generating function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Symbol {
    base: BaseFn,
    eps: f64,
    temporal: TemporalPart,
    shape: ShapeFn,
    phase: f64,
}

impl Symbol {
    pub fn new(base: BaseFn, eps: f64, temporal: TemporalPart, phase: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::Config(format!("perturbation size must lie in [0, 1], got {eps}")));
        }
        if !phase.is_finite() {
            return Err(Error::Config(format!("phase must be finite, got {phase}")));
        }
        Ok(Self { base, eps, temporal, shape: ShapeFn::SinCubed, phase })
    }

    /// Default family `-u|u|^{4-κ} + ε sin(t) sin(u³)` at phase zero.
    pub fn builtin(kappa: f64, eps: f64) -> Result<Self> {
        Self::new(BaseFn::builtin(kappa)?, eps, TemporalPart::Sin, 0.0)
    }

    /// Autonomous symbol `p(t, u) = f0(u)`.
    pub fn autonomous(base: BaseFn) -> Self {
        Self { base, eps: 0.0, temporal: TemporalPart::Sin, shape: ShapeFn::SinCubed, phase: 0.0 }
    }

    pub fn base(&self) -> &BaseFn {
        &self.base
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn temporal(&self) -> TemporalPart {
        self.temporal
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// Same symbol with a different perturbation size.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.base.clone(), eps, self.temporal, self.phase)
    }

    pub fn is_autonomous(&self) -> bool {
        self.eps == 0.0
    }

    /// Identically zero right-hand side.
    pub fn is_zero(&self) -> bool {
        self.base.is_zero() && self.eps == 0.0
    }

    pub fn eval(&self, t: f64, u: f64) -> f64 {
        let mut v = self.base.eval(u);
        if self.eps != 0.0 {
            v += self.eps * self.temporal.value(t + self.phase) * self.shape.value(u);
        }
        v
    }

    /// Partial derivative `∂p/∂u`.
    pub fn eval_du(&self, t: f64, u: f64) -> f64 {
        let mut v = self.base.eval_du(u);
        if self.eps != 0.0 {
            v += self.eps * self.temporal.value(t + self.phase) * self.shape.deriv(u);
        }
        v
    }

    /// Time-shifted symbol `p(· + dt, ·)`: the phase advances by `dt`.
    ///
    /// The phase accumulates without modular reduction so that composing
    /// shifts agrees bit-for-bit with a single shift by the total amount
    /// whenever the f64 sums involved are exact; reduction to a canonical
    /// phase happens only in [`hull_sample`].
    pub fn shift(&self, dt: f64) -> Self {
        let mut s = self.clone();
        s.phase += dt;
        s
    }

    /// Antiderivative of the autonomous part, see [`BaseFn::antiderivative`].
    pub fn antiderivative_f0(&self, u: f64) -> f64 {
        self.base.antiderivative(u)
    }
}

/// Hull samples `{θ_s p : s ∈ shifts}` with canonical phases.
///
/// For periodic time profiles the phases are reduced modulo the period and
/// deduplicated, so the result is a finite subset of the phase circle. For
/// the quasiperiodic profile every shift produces a distinct symbol.
pub fn hull_sample(p: &Symbol, shifts: &[f64]) -> Vec<Symbol> {
    let mut out: Vec<Symbol> = Vec::with_capacity(shifts.len());
    for &s in shifts {
        let mut q = p.shift(s);
        if let Some(period) = p.temporal.period() {
            q.phase = q.phase.rem_euclid(period);
        }
        if !out.iter().any(|r| (r.phase - q.phase).abs() < 1e-12) {
            out.push(q);
        }
    }
    out
}

/// Default hull shift pattern: `count` equispaced shifts over one period for
/// periodic profiles, or a golden-ratio low-discrepancy sequence over the
/// sampling window for quasiperiodic ones.
pub fn hull_shifts(p: &Symbol, count: usize) -> Vec<f64> {
    let window = p.temporal.sampling_window();
    match p.temporal.period() {
        Some(period) => (0..count).map(|k| period * k as f64 / count as f64).collect(),
        None => {
            let golden = 0.618_033_988_749_894_9_f64;
            (0..count).map(|k| (k as f64 * golden).fract() * window).collect()
        }
    }
}

/// Numerical audit of the standing assumptions on a symbol family
/// `ε ↦ p_ε`, sampled on the supplied grids. All suprema are over the grids,
/// so the report is evidence, not proof.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    /// `(ε, sup_{t,u} |p_ε(t, u) - f0(u)|)` per grid value of ε.
    pub h2_sup_deviation: Vec<(f64, f64)>,
    /// Uniform bound on the deviation over the whole ε grid.
    pub h3_uniform_bound: f64,
    /// Measured `max f0(u)/u` over the u grid and its margin below λ₁.
    pub h4_limsup: f64,
    pub h4_margin: f64,
    /// Least-squares and envelope constants in `|∂p/∂u| ≤ C (1 + |u|^{4-κ})`.
    pub h5_growth_constant: f64,
    pub h5_envelope_constant: f64,
    pub h5_exponent: f64,
    /// `(δ, ω_p(δ), ω_{∂p}(δ))`: moduli of continuity in t on ℝ × [-R, R].
    pub h6_moduli: Vec<(f64, f64, f64)>,
    /// Bounded and uniformly continuous on ℝ × [-R, R] (the checkable
    /// characterisation of translation-compactness for this family).
    pub translation_compact: bool,
    pub pass_h2: bool,
    pub pass_h3: bool,
    pub pass_h4: bool,
    pub pass_h5: bool,
    pub pass_h6: bool,
}

impl AssumptionReport {
    pub fn pass(&self) -> bool {
        self.pass_h2 && self.pass_h3 && self.pass_h4 && self.pass_h5 && self.pass_h6
    }
}

/// Runs the assumption audit for the family generated by `proto` (its ε is
/// replaced by each value of `eps_grid`). `lambda1` is the first eigenvalue
/// of the spatial operator, used for the sub-resonance margin.
pub fn check_assumptions(
    proto: &Symbol,
    eps_grid: &[f64],
    t_grid: &[f64],
    u_grid: &[f64],
    lambda1: f64,
) -> Result<AssumptionReport> {
    if eps_grid.is_empty() || t_grid.is_empty() || u_grid.is_empty() {
        return Err(Error::Domain("assumption check needs nonempty grids".into()));
    }
    let symbols: Vec<Symbol> =
        eps_grid.iter().map(|&e| proto.with_eps(e)).collect::<Result<_>>()?;

    // (H2): the perturbation vanishes with ε, uniformly on the grid.
    let mut h2 = Vec::with_capacity(symbols.len());
    for s in &symbols {
        let mut dev: f64 = 0.0;
        for &u in u_grid {
            let f0 = s.base.eval(u);
            for &t in t_grid {
                dev = dev.max((s.eval(t, u) - f0).abs());
            }
        }
        h2.push((s.eps, dev));
    }
    let h3: f64 = h2.iter().fold(0.0f64, |m, &(_, d)| m.max(d));
    let mut sorted = h2.clone();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let (eps_lo, dev_lo) = sorted[0];
    let (eps_hi, dev_hi) = sorted[sorted.len() - 1];
    let monotone = sorted.windows(2).all(|w| w[0].1 <= w[1].1 + 1e-12);
    let vanishing = if eps_hi > 0.0 {
        dev_lo <= 1.5 * dev_hi * (eps_lo / eps_hi) + 1e-12
    } else {
        dev_lo <= 1e-12
    };
    let pass_h2 = monotone && vanishing;
    let pass_h3 = h3.is_finite();

    // (H4): limsup f0(u)/u stays below λ₁ on the sample range.
    let mut h4_limsup = f64::NEG_INFINITY;
    for &u in u_grid {
        if u.abs() > 1e-9 {
            h4_limsup = h4_limsup.max(proto.base.eval(u) / u);
        }
    }
    let h4_margin = lambda1 - h4_limsup;
    let pass_h4 = h4_limsup.is_finite() && h4_margin > 0.0;

    // (H5): growth of ∂p/∂u against 1 + |u|^{4-κ}.
    let exponent = 4.0 - proto.base.kappa;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut envelope: f64 = 0.0;
    for &u in u_grid {
        let x = 1.0 + abs_pow(u, exponent);
        let mut y: f64 = 0.0;
        for s in &symbols {
            for &t in t_grid {
                y = y.max(s.eval_du(t, u).abs());
            }
        }
        sxy += x * y;
        sxx += x * x;
        envelope = envelope.max(y / x);
    }
    let h5_lsq = sxy / sxx;
    let pass_h5 = h5_lsq.is_finite() && envelope.is_finite();

    // (H6): moduli of continuity of p and ∂p/∂u in t, over one recurrence
    // window and the sampled u range.
    let window = proto.temporal.sampling_window();
    let mut moduli = Vec::new();
    let n_t = 256;
    for k in 1..=8 {
        let delta = window / 2f64.powi(k + 2);
        let mut om_f: f64 = 0.0;
        let mut om_df: f64 = 0.0;
        for s in &symbols {
            for &u in u_grid {
                for i in 0..n_t {
                    let t = window * i as f64 / n_t as f64;
                    om_f = om_f.max((s.eval(t + delta, u) - s.eval(t, u)).abs());
                    om_df = om_df.max((s.eval_du(t + delta, u) - s.eval_du(t, u)).abs());
                }
            }
        }
        moduli.push((delta, om_f, om_df));
    }
    let (_, om_f_max, om_df_max) = moduli[0];
    let (_, om_f_min, om_df_min) = moduli[moduli.len() - 1];
    let pass_h6 = om_f_min <= 0.25 * om_f_max + 1e-12 && om_df_min <= 0.25 * om_df_max + 1e-12;
    let translation_compact = pass_h3 && pass_h6;

    Ok(AssumptionReport {
        h2_sup_deviation: h2,
        h3_uniform_bound: h3,
        h4_limsup,
        h4_margin,
        h5_growth_constant: h5_lsq,
        h5_envelope_constant: envelope,
        h5_exponent: exponent,
        h6_moduli: moduli,
        translation_compact,
        pass_h2,
        pass_h3,
        pass_h4,
        pass_h5,
        pass_h6,
    })
}

/// Value of the symbol metric together with its reported uncertainty
/// (series truncation plus grid refinement).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetricEstimate {
    pub value: f64,
    pub uncertainty: f64,
}

/// Metric on symbols modelled on the `C(ℝ; C¹(ℝ))` topology:
///
/// ```text
/// d(g1, g2) = Σ_{i≥1} 2^{-i} ψ( sup_{|t|≤i} Σ_{j≥1} 2^{-j} ψ(‖g1(t,·) - g2(t,·)‖_{C¹([-j,j])}) ),
/// ```
///
/// with `ψ(x) = x/(1+x)`. Both series are truncated at `i_max`; the C¹ sup
/// over each u window uses `grid + 1` equispaced samples including the
/// endpoints, and the t sup uses `grid + 1` samples of `[-i_max, i_max]`.
/// The reported uncertainty is the tail bound `2^{1-i_max}` plus the change
/// under halving the grid.
pub fn c1_metric(g1: &Symbol, g2: &Symbol, i_max: usize, grid: usize) -> Result<MetricEstimate> {
    if i_max < 1 {
        return Err(Error::Domain("metric truncation index must be ≥ 1".into()));
    }
    if grid < 8 || grid % 2 != 0 {
        return Err(Error::Domain(format!("metric grid must be even and ≥ 8, got {grid}")));
    }
    let fine = metric_value(g1, g2, i_max, grid);
    let coarse = metric_value(g1, g2, i_max, grid / 2);
    let tail = 2f64.powi(1 - i_max as i32);
    Ok(MetricEstimate { value: fine, uncertainty: (fine - coarse).abs() + tail })
}

fn metric_value(g1: &Symbol, g2: &Symbol, i_max: usize, grid: usize) -> f64 {
    let psi = |x: f64| x / (1.0 + x);
    let nu = grid + 1;

    // The difference factorises as A(u) + s1(t) B1(u) - s2(t) B2(u) with
    // t-independent tables per u window, which keeps the double sup cheap.
    let mut tables = Vec::with_capacity(i_max);
    for j in 1..=i_max {
        let r = j as f64;
        let mut a = vec![0.0; nu];
        let mut da = vec![0.0; nu];
        let mut b1 = vec![0.0; nu];
        let mut db1 = vec![0.0; nu];
        let mut b2 = vec![0.0; nu];
        let mut db2 = vec![0.0; nu];
        for q in 0..nu {
            let u = -r + 2.0 * r * q as f64 / grid as f64;
            a[q] = g1.base.eval(u) - g2.base.eval(u);
            da[q] = g1.base.eval_du(u) - g2.base.eval_du(u);
            b1[q] = g1.eps * g1.shape.value(u);
            db1[q] = g1.eps * g1.shape.deriv(u);
            b2[q] = g2.eps * g2.shape.value(u);
            db2[q] = g2.eps * g2.shape.deriv(u);
        }
        tables.push((a, da, b1, db1, b2, db2));
    }

    let tmax = i_max as f64;
    let mut d_vals = vec![0.0; nu];
    for (ti, d_out) in d_vals.iter_mut().enumerate() {
        let t = -tmax + 2.0 * tmax * ti as f64 / grid as f64;
        let s1 = g1.temporal.value(t + g1.phase);
        let s2 = g2.temporal.value(t + g2.phase);
        let mut d = 0.0;
        let mut weight = 0.5;
        for (a, da, b1, db1, b2, db2) in &tables {
            let mut m: f64 = 0.0;
            let mut md: f64 = 0.0;
            for q in 0..nu {
                m = m.max((a[q] + s1 * b1[q] - s2 * b2[q]).abs());
                md = md.max((da[q] + s1 * db1[q] - s2 * db2[q]).abs());
            }
            d += weight * psi(m + md);
            weight *= 0.5;
        }
        *d_out = d;
    }

    // Outer series: running sup over the nested t windows [-i, i].
    let center = grid / 2;
    let per_unit = grid as f64 / (2.0 * tmax);
    let mut running = d_vals[center];
    let mut lo = center;
    let mut hi = center;
    let mut value = 0.0;
    let mut weight = 0.5;
    for i in 1..=i_max {
        let target_lo = ((tmax - i as f64) * per_unit).round() as usize;
        let target_hi = grid - target_lo;
        while lo > target_lo {
            lo -= 1;
            running = running.max(d_vals[lo]);
        }
        while hi < target_hi {
            hi += 1;
            running = running.max(d_vals[hi]);
        }
        value += weight * psi(running);
        weight *= 0.5;
    }
    value
}
