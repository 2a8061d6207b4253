//! Fixed-step integrators for the Galerkin truncation of
//! `u_tt + u_t - Δu = p(t, u)`.
//!
//! In mode coordinates the system is, per retained mode `k`,
//!
//! ```text
//! û_k'' + û_k' + λ_k û_k = (p(t, u), e_k),
//! ```
//!
//! with the right-hand side evaluated by sampling `u` on the quadrature
//! grid, applying `p` pointwise and projecting back. Two steppers are
//! provided: classical RK4, and an exponential scheme that applies the
//! exact 2×2 propagator of the damped linear part per mode and treats the
//! projected nonlinearity by a midpoint Duhamel quadrature. The exponential
//! scheme is exact (to roundoff) when the right-hand side vanishes.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::spectral::{same_basis, Basis, PhaseState};
use crate::symbols::Symbol;
use crate::{Error, Result};

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Classical fourth-order Runge–Kutta with fixed step.
    Rk4,
    /// Exact per-mode linear propagator plus midpoint quadrature for the
    /// projected nonlinearity.
    ExpMode,
}

/// Integrator configuration. `record_every` thins the stored trajectory:
/// states are kept every that many steps, so the recorded grid has uniform
/// stride `dt · record_every`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub method: Method,
    pub record_every: usize,
    /// Energy-norm ceiling for the blow-up guard.
    pub blowup_ceiling: f64,
}

impl SolverConfig {
    pub fn new(dt: f64) -> Result<Self> {
        let cfg = Self { dt, method: Method::Rk4, record_every: 1, blowup_ceiling: 1e6 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_record_every(mut self, record_every: usize) -> Self {
        self.record_every = record_every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("step size must be positive, got {}", self.dt)));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        if !(self.blowup_ceiling > 0.0) {
            return Err(Error::Config("blow-up ceiling must be positive".into()));
        }
        Ok(())
    }

    /// A priori order-of-magnitude estimate of the accumulated integration
    /// error in the energy norm, for data of the given amplitude over the
    /// given horizon. Used to derive tolerances for identity checks.
    pub fn error_estimate(&self, basis: &Basis, horizon: f64, amplitude: f64) -> f64 {
        let lam_max = basis.eigenvalues().last().copied().unwrap_or(1.0);
        let omega = lam_max.sqrt();
        let est = match self.method {
            Method::Rk4 => amplitude * horizon * omega.powi(5) * self.dt.powi(4) / 120.0,
            Method::ExpMode => amplitude * horizon * lam_max * self.dt.powi(2) / 24.0,
        };
        est.max(1e-14)
    }

    /// Largest stable step for the explicit scheme on the stiffest retained
    /// mode (RK4's imaginary-axis stability interval is about 2.8/ω).
    fn check_stability(&self, basis: &Basis) -> Result<()> {
        if self.method == Method::Rk4 {
            let lam_max = basis.eigenvalues().last().copied().unwrap_or(1.0);
            let limit = 2.5 / lam_max.sqrt();
            if self.dt > limit {
                return Err(Error::Config(format!(
                    "dt = {} exceeds the explicit stability limit {:.3e} for the stiffest mode",
                    self.dt, limit
                )));
            }
        }
        Ok(())
    }
}

/// A recorded solution: states on a uniform time grid, together with the
/// symbol and configuration that produced them.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<PhaseState>,
    symbol: Symbol,
    config: SolverConfig,
    stride: f64,
    l12_cache: OnceLock<Vec<f64>>,
}

impl Trajectory {
    /// Wraps externally produced states (closed-form profiles, reloaded
    /// data) as a trajectory. Times must be ascending and uniformly spaced;
    /// all states must share one basis.
    pub fn from_recorded(
        times: Vec<f64>,
        states: Vec<PhaseState>,
        symbol: Symbol,
        config: SolverConfig,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(Error::Shape(format!(
                "{} times for {} states",
                times.len(),
                states.len()
            )));
        }
        let stride = if times.len() > 1 { times[1] - times[0] } else { config.dt };
        if !(stride > 0.0) {
            return Err(Error::Shape("recorded times must be strictly ascending".into()));
        }
        for i in 1..times.len() {
            let gap = times[i] - times[i - 1];
            if (gap - stride).abs() > 1e-9 * stride.max(1.0) {
                return Err(Error::Shape(format!(
                    "recorded grid is not uniform: stride {gap} at index {i} vs {stride}"
                )));
            }
        }
        let basis = states[0].basis();
        if !states.iter().all(|s| same_basis(s.basis(), basis)) {
            return Err(Error::Shape("states live on different bases".into()));
        }
        Ok(Self { times, states, symbol, config, stride, l12_cache: OnceLock::new() })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[PhaseState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Uniform spacing of the recorded grid.
    pub fn stride(&self) -> f64 {
        self.stride
    }

    pub fn basis(&self) -> &Arc<Basis> {
        self.states[0].basis()
    }

    pub fn symbol(&self) -> &Symbol {
        &self.symbol
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn initial(&self) -> &PhaseState {
        &self.states[0]
    }

    pub fn last(&self) -> &PhaseState {
        &self.states[self.states.len() - 1]
    }

    /// Spatial L¹² norms of `u` per recorded time, computed once and cached.
    pub fn l12_norms(&self) -> &[f64] {
        self.l12_cache.get_or_init(|| {
            self.states
                .iter()
                .map(|s| s.u.lp_space_norm(12.0).expect("12 is a valid exponent"))
                .collect()
        })
    }

    /// Energy norms per recorded time.
    pub fn energy_norms(&self, s: f64) -> Result<Vec<f64>> {
        self.states.iter().map(|st| st.energy_norm(s)).collect()
    }
}

/// Exact propagator of `(u, v)' = (v, -v - λu)` over a step `t`, stored as
/// the four entries of the 2×2 matrix. All three root configurations of
/// `r² + r + λ = 0` are handled.
#[derive(Debug, Clone, Copy)]
struct ModeProp {
    e11: f64,
    e12: f64,
    e21: f64,
    e22: f64,
}

fn mode_propagator(lambda: f64, t: f64) -> ModeProp {
    let disc = 1.0 - 4.0 * lambda;
    let decay = (-0.5 * t).exp();
    if disc.abs() < 1e-12 {
        // Double root r = -1/2.
        ModeProp {
            e11: decay * (1.0 + 0.5 * t),
            e12: decay * t,
            e21: decay * (-0.25 * t),
            e22: decay * (1.0 - 0.5 * t),
        }
    } else if disc < 0.0 {
        // Complex pair -1/2 ± iω.
        let omega = 0.5 * (-disc).sqrt();
        let (s, c) = (omega * t).sin_cos();
        ModeProp {
            e11: decay * (c + 0.5 * s / omega),
            e12: decay * s / omega,
            e21: -decay * lambda * s / omega,
            e22: decay * (c - 0.5 * s / omega),
        }
    } else {
        // Distinct real roots -1/2 ± μ.
        let mu = 0.5 * disc.sqrt();
        let rp = -0.5 + mu;
        let rm = -0.5 - mu;
        let ep = (rp * t).exp();
        let em = (rm * t).exp();
        let span = rp - rm;
        ModeProp {
            e11: (-rm * ep + rp * em) / span,
            e12: (ep - em) / span,
            e21: lambda * (em - ep) / span,
            e22: (rp * ep - rm * em) / span,
        }
    }
}

impl ModeProp {
    #[inline]
    fn apply(&self, u: f64, v: f64) -> (f64, f64) {
        (self.e11 * u + self.e12 * v, self.e21 * u + self.e22 * v)
    }
}

/// Scratch buffers for right-hand-side evaluation; reused across steps so
/// the hot loop does not allocate.
struct Workspace {
    values: Vec<f64>,
    weighted: Vec<f64>,
    proj: Vec<f64>,
}

impl Workspace {
    fn new(basis: &Basis) -> Self {
        Self {
            values: vec![0.0; basis.n_quad()],
            weighted: vec![0.0; basis.n_quad()],
            proj: vec![0.0; basis.n_modes()],
        }
    }

    /// Projection coefficients of `p(t, u)` where `u` has coefficients
    /// `coeffs`; result left in `self.proj`.
    fn project_symbol(&mut self, basis: &Basis, symbol: &Symbol, t: f64, coeffs: &[f64]) {
        let n = basis.n_modes();
        let nq = basis.n_quad();
        self.values.fill(0.0);
        for k in 0..n {
            let c = coeffs[k];
            if c == 0.0 {
                continue;
            }
            let row = basis.eigenfunction_values(k);
            for q in 0..nq {
                self.values[q] += c * row[q];
            }
        }
        let weights = basis.quad_weights();
        for q in 0..nq {
            self.weighted[q] = weights[q] * symbol.eval(t, self.values[q]);
        }
        for k in 0..n {
            let row = basis.eigenfunction_values(k);
            let mut acc = 0.0;
            for q in 0..nq {
                acc += self.weighted[q] * row[q];
            }
            self.proj[k] = acc;
        }
    }
}

fn energy_sq(lambdas: &[f64], y: &[f64]) -> f64 {
    let n = lambdas.len();
    let mut acc = 0.0;
    for k in 0..n {
        acc += lambdas[k] * y[k] * y[k] + y[n + k] * y[n + k];
    }
    acc
}

/// Nonlinear right-hand side into `dy`.
fn rhs(
    basis: &Basis,
    symbol: &Symbol,
    ws: &mut Workspace,
    t: f64,
    y: &[f64],
    dy: &mut [f64],
) {
    let n = basis.n_modes();
    let lambdas = basis.eigenvalues();
    if symbol.is_zero() {
        ws.proj.fill(0.0);
    } else {
        ws.project_symbol(basis, symbol, t, &y[..n]);
    }
    for k in 0..n {
        dy[k] = y[n + k];
        dy[n + k] = -y[n + k] - lambdas[k] * y[k] + ws.proj[k];
    }
}

struct StepPlan {
    dt_eff: f64,
    n_blocks: usize,
    record_every: usize,
}

fn plan_steps(t0: f64, t1: f64, cfg: &SolverConfig) -> Result<StepPlan> {
    cfg.validate()?;
    if !(t1 > t0) {
        return Err(Error::Config(format!("horizon must satisfy t1 > t0, got [{t0}, {t1}]")));
    }
    let span = t1 - t0;
    let m = cfg.record_every;
    let n_blocks = ((span / (cfg.dt * m as f64)).round() as usize).max(1);
    let dt_eff = span / (n_blocks * m) as f64;
    Ok(StepPlan { dt_eff, n_blocks, record_every: m })
}

/// Core fixed-step loop shared by all entry points. Calls `on_record` with
/// the flat state at every recorded time, including the initial one.
fn run_loop(
    basis: &Arc<Basis>,
    symbol: &Symbol,
    cfg: &SolverConfig,
    t0: f64,
    plan: &StepPlan,
    y: &mut [f64],
    shadow: Option<&mut [f64]>,
    mut on_record: impl FnMut(usize, &[f64], Option<&[f64]>),
) -> Result<()> {
    let n = basis.n_modes();
    let lambdas = basis.eigenvalues();
    let dt = plan.dt_eff;
    let mut ws = Workspace::new(basis);
    let ceiling_sq = cfg.blowup_ceiling * cfg.blowup_ceiling;
    let mut w_state = shadow;

    let guard = |y: &[f64], t: f64| -> Result<()> {
        let e2 = energy_sq(lambdas, y);
        if !e2.is_finite() {
            return Err(Error::Evaluation { context: "integrator state".into(), t });
        }
        if e2 > ceiling_sq {
            return Err(Error::BlowUp { t, norm: e2.sqrt(), ceiling: cfg.blowup_ceiling });
        }
        Ok(())
    };

    guard(y, t0)?;
    on_record(0, y, w_state.as_deref());

    match cfg.method {
        Method::Rk4 => {
            let dim = 2 * n;
            let mut k1 = vec![0.0; dim];
            let mut k2 = vec![0.0; dim];
            let mut k3 = vec![0.0; dim];
            let mut k4 = vec![0.0; dim];
            let mut tmp = vec![0.0; dim];
            // Shadow stage buffers (forced linear system sharing the
            // projection of p(t, u) at every stage).
            let mut wk = w_state.as_ref().map(|_| {
                (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim])
            });

            let mut step_index = 0usize;
            for block in 0..plan.n_blocks {
                for _ in 0..plan.record_every {
                    let t = t0 + step_index as f64 * dt;
                    // Four stages; the shadow reuses ws.proj from each stage.
                    rhs(basis, symbol, &mut ws, t, y, &mut k1);
                    if let (Some(w), Some((wk1, _, _, _, wtmp))) = (&mut w_state, &mut wk) {
                        linear_forced_rhs(lambdas, &ws.proj, w, wk1);
                        for i in 0..dim {
                            wtmp[i] = w[i] + 0.5 * dt * wk1[i];
                        }
                    }
                    for i in 0..dim {
                        tmp[i] = y[i] + 0.5 * dt * k1[i];
                    }

                    rhs(basis, symbol, &mut ws, t + 0.5 * dt, &tmp, &mut k2);
                    if let (Some(_), Some((_, wk2, _, _, wtmp))) = (&mut w_state, &mut wk) {
                        linear_forced_rhs(lambdas, &ws.proj, wtmp, wk2);
                    }
                    if let Some((_, wk2, _, _, wtmp)) = &mut wk {
                        let w = w_state.as_ref().unwrap();
                        for i in 0..dim {
                            wtmp[i] = w[i] + 0.5 * dt * wk2[i];
                        }
                    }
                    for i in 0..dim {
                        tmp[i] = y[i] + 0.5 * dt * k2[i];
                    }

                    rhs(basis, symbol, &mut ws, t + 0.5 * dt, &tmp, &mut k3);
                    if let Some((_, _, wk3, _, wtmp)) = &mut wk {
                        linear_forced_rhs(lambdas, &ws.proj, wtmp, wk3);
                        let w = w_state.as_ref().unwrap();
                        for i in 0..dim {
                            wtmp[i] = w[i] + dt * wk3[i];
                        }
                    }
                    for i in 0..dim {
                        tmp[i] = y[i] + dt * k3[i];
                    }

                    rhs(basis, symbol, &mut ws, t + dt, &tmp, &mut k4);
                    if let Some((wk1, wk2, wk3, wk4, wtmp)) = &mut wk {
                        linear_forced_rhs(lambdas, &ws.proj, wtmp, wk4);
                        let w = w_state.as_mut().unwrap();
                        for i in 0..dim {
                            w[i] += dt / 6.0 * (wk1[i] + 2.0 * wk2[i] + 2.0 * wk3[i] + wk4[i]);
                        }
                    }
                    for i in 0..dim {
                        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                    }
                    step_index += 1;
                    guard(y, t0 + step_index as f64 * dt)?;
                }
                on_record(block + 1, y, w_state.as_deref());
            }
        }
        Method::ExpMode => {
            let full: Vec<ModeProp> =
                lambdas.iter().map(|&l| mode_propagator(l, dt)).collect();
            let half: Vec<ModeProp> =
                lambdas.iter().map(|&l| mode_propagator(l, 0.5 * dt)).collect();
            let mut u_half = vec![0.0; n];

            let mut step_index = 0usize;
            for block in 0..plan.n_blocks {
                for _ in 0..plan.record_every {
                    let t = t0 + step_index as f64 * dt;
                    for k in 0..n {
                        let (uh, _) = half[k].apply(y[k], y[n + k]);
                        u_half[k] = uh;
                    }
                    let forced = !symbol.is_zero();
                    if forced {
                        ws.project_symbol(basis, symbol, t + 0.5 * dt, &u_half);
                    } else {
                        ws.proj.fill(0.0);
                    }
                    for k in 0..n {
                        let (u1, v1) = full[k].apply(y[k], y[n + k]);
                        y[k] = u1 + dt * half[k].e12 * ws.proj[k];
                        y[n + k] = v1 + dt * half[k].e22 * ws.proj[k];
                    }
                    if let Some(w) = &mut w_state {
                        for k in 0..n {
                            let (u1, v1) = full[k].apply(w[k], w[n + k]);
                            w[k] = u1 + dt * half[k].e12 * ws.proj[k];
                            w[n + k] = v1 + dt * half[k].e22 * ws.proj[k];
                        }
                    }
                    step_index += 1;
                    guard(y, t0 + step_index as f64 * dt)?;
                }
                on_record(block + 1, y, w_state.as_deref());
            }
        }
    }
    Ok(())
}

#[inline]
fn linear_forced_rhs(lambdas: &[f64], proj: &[f64], y: &[f64], dy: &mut [f64]) {
    let n = lambdas.len();
    for k in 0..n {
        dy[k] = y[n + k];
        dy[n + k] = -y[n + k] - lambdas[k] * y[k] + proj[k];
    }
}

fn flat_state(state: &PhaseState) -> Vec<f64> {
    let mut y = Vec::with_capacity(2 * state.u.coeffs().len());
    y.extend_from_slice(state.u.coeffs());
    y.extend_from_slice(state.ut.coeffs());
    y
}

fn unflatten(basis: &Arc<Basis>, y: &[f64]) -> PhaseState {
    let n = basis.n_modes();
    let u = basis.field_from_coeffs(y[..n].to_vec()).expect("length by construction");
    let ut = basis.field_from_coeffs(y[n..].to_vec()).expect("length by construction");
    PhaseState::new(u, ut).expect("same basis by construction")
}

/// Integrates the truncated system from `t0` to `t1` and records states
/// every `cfg.record_every` steps. The step is adjusted to the nearest
/// value that makes the horizon an integer number of recorded strides.
pub fn integrate(
    initial: &PhaseState,
    t0: f64,
    t1: f64,
    symbol: &Symbol,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    let basis = initial.basis().clone();
    cfg.check_stability(&basis)?;
    let plan = plan_steps(t0, t1, cfg)?;
    let stride = plan.record_every as f64 * plan.dt_eff;
    let mut y = flat_state(initial);
    let mut times = Vec::with_capacity(plan.n_blocks + 1);
    let mut states = Vec::with_capacity(plan.n_blocks + 1);
    run_loop(&basis, symbol, cfg, t0, &plan, &mut y, None, |i, y, _| {
        times.push(t0 + i as f64 * stride);
        states.push(unflatten(&basis, y));
    })?;
    Ok(Trajectory {
        times,
        states,
        symbol: symbol.clone(),
        config: *cfg,
        stride,
        l12_cache: OnceLock::new(),
    })
}

/// Nonlinear trajectory together with the forced linear "shadow" `w`:
/// `w` solves `w_tt + w_t - Δw = p(t, u)` with zero initial data, where the
/// projection of `p(t, u)` is shared with the nonlinear solve at every
/// stage. The pair is the raw material for the Duhamel splitting `u = v + w`.
pub fn integrate_with_shadow(
    initial: &PhaseState,
    t0: f64,
    t1: f64,
    symbol: &Symbol,
    cfg: &SolverConfig,
) -> Result<(Trajectory, Trajectory)> {
    let basis = initial.basis().clone();
    cfg.check_stability(&basis)?;
    let plan = plan_steps(t0, t1, cfg)?;
    let stride = plan.record_every as f64 * plan.dt_eff;
    let mut y = flat_state(initial);
    let mut w = vec![0.0; y.len()];
    let mut times = Vec::with_capacity(plan.n_blocks + 1);
    let mut states = Vec::with_capacity(plan.n_blocks + 1);
    let mut w_states = Vec::with_capacity(plan.n_blocks + 1);
    run_loop(&basis, symbol, cfg, t0, &plan, &mut y, Some(&mut w), |i, y, w| {
        times.push(t0 + i as f64 * stride);
        states.push(unflatten(&basis, y));
        w_states.push(unflatten(&basis, w.expect("shadow state present")));
    })?;
    let zero = Symbol::autonomous(crate::symbols::BaseFn::zero());
    Ok((
        Trajectory {
            times: times.clone(),
            states,
            symbol: symbol.clone(),
            config: *cfg,
            stride,
            l12_cache: OnceLock::new(),
        },
        Trajectory {
            times,
            states: w_states,
            symbol: zero,
            config: *cfg,
            stride,
            l12_cache: OnceLock::new(),
        },
    ))
}

/// Forcing for the linear problem `u_tt + u_t - Δu = G(x, t)`.
pub enum LinearForcing<'a> {
    /// `G ≡ 0`; solved with the exact per-mode propagator, so the only
    /// discretization error is roundoff.
    Zero,
    /// Projected forcing coefficients `(G(t), e_k)` in basis order.
    Modes(&'a dyn Fn(f64) -> Vec<f64>),
}

/// Solves the forced linear problem on `[t0, t1]`. With `LinearForcing::Zero`
/// the recorded states are exact; otherwise the configured method is used
/// with the forcing sampled at stage times.
pub fn solve_linear(
    initial: &PhaseState,
    t0: f64,
    t1: f64,
    forcing: LinearForcing<'_>,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    let basis = initial.basis().clone();
    let plan = plan_steps(t0, t1, cfg)?;
    let stride = plan.record_every as f64 * plan.dt_eff;
    let lambdas = basis.eigenvalues();
    let n = basis.n_modes();
    let zero_symbol = Symbol::autonomous(crate::symbols::BaseFn::zero());

    match forcing {
        LinearForcing::Zero => {
            let props: Vec<ModeProp> =
                lambdas.iter().map(|&l| mode_propagator(l, stride)).collect();
            let mut y = flat_state(initial);
            let mut times = Vec::with_capacity(plan.n_blocks + 1);
            let mut states = Vec::with_capacity(plan.n_blocks + 1);
            times.push(t0);
            states.push(unflatten(&basis, &y));
            for i in 1..=plan.n_blocks {
                for k in 0..n {
                    let (u1, v1) = props[k].apply(y[k], y[n + k]);
                    y[k] = u1;
                    y[n + k] = v1;
                }
                times.push(t0 + i as f64 * stride);
                states.push(unflatten(&basis, &y));
            }
            Ok(Trajectory {
                times,
                states,
                symbol: zero_symbol,
                config: *cfg,
                stride,
                l12_cache: OnceLock::new(),
            })
        }
        LinearForcing::Modes(g) => {
            cfg.check_stability(&basis)?;
            let dim = 2 * n;
            let mut y = flat_state(initial);
            let mut times = Vec::with_capacity(plan.n_blocks + 1);
            let mut states = Vec::with_capacity(plan.n_blocks + 1);
            times.push(t0);
            states.push(unflatten(&basis, &y));
            let dt = plan.dt_eff;
            let fetch = |t: f64| -> Result<Vec<f64>> {
                let gv = g(t);
                if gv.len() != n {
                    return Err(Error::Shape(format!(
                        "forcing returned {} coefficients, expected {n}",
                        gv.len()
                    )));
                }
                if gv.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Evaluation { context: "linear forcing".into(), t });
                }
                Ok(gv)
            };
            match cfg.method {
                Method::Rk4 => {
                    let mut k1 = vec![0.0; dim];
                    let mut k2 = vec![0.0; dim];
                    let mut k3 = vec![0.0; dim];
                    let mut k4 = vec![0.0; dim];
                    let mut tmp = vec![0.0; dim];
                    let mut step_index = 0usize;
                    for i in 1..=plan.n_blocks {
                        for _ in 0..plan.record_every {
                            let t = t0 + step_index as f64 * dt;
                            let g0 = fetch(t)?;
                            let gh = fetch(t + 0.5 * dt)?;
                            let g1 = fetch(t + dt)?;
                            linear_forced_rhs(lambdas, &g0, &y, &mut k1);
                            for j in 0..dim {
                                tmp[j] = y[j] + 0.5 * dt * k1[j];
                            }
                            linear_forced_rhs(lambdas, &gh, &tmp, &mut k2);
                            for j in 0..dim {
                                tmp[j] = y[j] + 0.5 * dt * k2[j];
                            }
                            linear_forced_rhs(lambdas, &gh, &tmp, &mut k3);
                            for j in 0..dim {
                                tmp[j] = y[j] + dt * k3[j];
                            }
                            linear_forced_rhs(lambdas, &g1, &tmp, &mut k4);
                            for j in 0..dim {
                                y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
                            }
                            step_index += 1;
                        }
                        times.push(t0 + i as f64 * stride);
                        states.push(unflatten(&basis, &y));
                    }
                }
                Method::ExpMode => {
                    let full: Vec<ModeProp> =
                        lambdas.iter().map(|&l| mode_propagator(l, dt)).collect();
                    let half: Vec<ModeProp> =
                        lambdas.iter().map(|&l| mode_propagator(l, 0.5 * dt)).collect();
                    let mut step_index = 0usize;
                    for i in 1..=plan.n_blocks {
                        for _ in 0..plan.record_every {
                            let t = t0 + step_index as f64 * dt;
                            let gh = fetch(t + 0.5 * dt)?;
                            for k in 0..n {
                                let (u1, v1) = full[k].apply(y[k], y[n + k]);
                                y[k] = u1 + dt * half[k].e12 * gh[k];
                                y[n + k] = v1 + dt * half[k].e22 * gh[k];
                            }
                            step_index += 1;
                        }
                        times.push(t0 + i as f64 * stride);
                        states.push(unflatten(&basis, &y));
                    }
                }
            }
            Ok(Trajectory {
                times,
                states,
                symbol: zero_symbol,
                config: *cfg,
                stride,
                l12_cache: OnceLock::new(),
            })
        }
    }
}

/// Solution operator `φ(t, p)x`: evolves `x` from time 0 to time `t` under
/// the symbol `p` without recording intermediate states. `t = 0` returns the
/// state unchanged.
pub fn cocycle(x: &PhaseState, t: f64, symbol: &Symbol, cfg: &SolverConfig) -> Result<PhaseState> {
    if t < 0.0 {
        return Err(Error::Domain(format!("cocycle time must be ≥ 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(x.clone());
    }
    let basis = x.basis().clone();
    cfg.check_stability(&basis)?;
    // Record nothing but the endpoint: treat the whole horizon as one block.
    let plan = plan_steps(0.0, t, cfg)?;
    let steps = plan.n_blocks * plan.record_every;
    let plan = StepPlan { dt_eff: plan.dt_eff, n_blocks: 1, record_every: steps };
    let mut y = flat_state(x);
    let mut out = None;
    run_loop(&basis, symbol, cfg, 0.0, &plan, &mut y, None, |i, y, _| {
        if i == 1 {
            out = Some(unflatten(&basis, y));
        }
    })?;
    Ok(out.expect("endpoint recorded"))
}

/// Euclidean distance between two states in the energy norm `E_0`.
pub fn state_distance(a: &PhaseState, b: &PhaseState) -> Result<f64> {
    if !same_basis(a.basis(), b.basis()) {
        return Err(Error::Shape("states live on different bases".into()));
    }
    let n = a.basis().n_modes();
    let lambdas = a.basis().eigenvalues();
    let mut acc = 0.0;
    for k in 0..n {
        let du = a.u.coeffs()[k] - b.u.coeffs()[k];
        let dv = a.ut.coeffs()[k] - b.ut.coeffs()[k];
        acc += lambdas[k] * du * du + dv * dv;
    }
    Ok(acc.sqrt())
}

/// Linear combination `a·x + b·y` of two states on a shared basis.
pub fn state_axpy(a: f64, x: &PhaseState, b: f64, y: &PhaseState) -> Result<PhaseState> {
    if !same_basis(x.basis(), y.basis()) {
        return Err(Error::Shape("states live on different bases".into()));
    }
    let basis = x.basis();
    let u: Vec<f64> = x
        .u
        .coeffs()
        .iter()
        .zip(y.u.coeffs())
        .map(|(xu, yu)| a * xu + b * yu)
        .collect();
    let ut: Vec<f64> = x
        .ut
        .coeffs()
        .iter()
        .zip(y.ut.coeffs())
        .map(|(xv, yv)| a * xv + b * yv)
        .collect();
    PhaseState::new(basis.field_from_coeffs(u)?, basis.field_from_coeffs(ut)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Domain;
    use crate::symbols::BaseFn;

    const PI: f64 = std::f64::consts::PI;

    fn basis_n(n: usize) -> Arc<Basis> {
        Basis::build(Domain::interval(PI, (4 * n).max(16)).unwrap(), n).unwrap()
    }

    fn zero_symbol() -> Symbol {
        Symbol::autonomous(BaseFn::zero())
    }

    /// Free single mode with λ = 1 and data (1, 0):
    /// u(t) = e^{-t/2} (cos(√3 t/2) + sin(√3 t/2)/√3).
    fn single_mode_exact(t: f64) -> f64 {
        let om = 3f64.sqrt() / 2.0;
        (-0.5 * t).exp() * ((om * t).cos() + (om * t).sin() / 3f64.sqrt())
    }

    fn single_mode_state(basis: &Arc<Basis>) -> PhaseState {
        let mut u = vec![0.0; basis.n_modes()];
        u[0] = 1.0;
        PhaseState::new(
            basis.field_from_coeffs(u).unwrap(),
            basis.zero_field(),
        )
        .unwrap()
    }

    #[test]
    fn rk4_free_single_mode_matches_closed_form() {
        let basis = basis_n(1);
        let state = single_mode_state(&basis);
        let cfg = SolverConfig::new(1e-3).unwrap().with_record_every(500);
        let traj = integrate(&state, 0.0, 5.0, &zero_symbol(), &cfg).unwrap();
        for (t, s) in traj.times().iter().zip(traj.states()) {
            let exact = single_mode_exact(*t);
            let got = s.u.coeffs()[0];
            assert!(
                (got - exact).abs() <= 1e-6 * exact.abs().max(1e-3),
                "t = {t}: {got} vs {exact}"
            );
        }
    }

    #[test]
    fn exp_mode_free_single_mode_is_exact() {
        let basis = basis_n(1);
        let state = single_mode_state(&basis);
        let cfg = SolverConfig::new(1e-2)
            .unwrap()
            .with_method(Method::ExpMode)
            .with_record_every(100);
        let traj = integrate(&state, 0.0, 5.0, &zero_symbol(), &cfg).unwrap();
        for (t, s) in traj.times().iter().zip(traj.states()) {
            let exact = single_mode_exact(*t);
            assert!(
                (s.u.coeffs()[0] - exact).abs() <= 1e-12,
                "t = {t}: {} vs {exact}",
                s.u.coeffs()[0]
            );
        }
    }

    #[test]
    fn propagator_handles_all_root_configurations() {
        // Overdamped, critical and oscillatory modes all satisfy the ODE:
        // finite-difference check of u'' + u' + λ u = 0 via dense sampling.
        for lambda in [0.05, 0.25, 1.0, 64.0] {
            let h = 1e-4;
            let p = |t: f64| mode_propagator(lambda, t);
            for t in [0.3, 1.7] {
                let um = p(t - h).apply(1.0, 0.25).0;
                let u0 = p(t).apply(1.0, 0.25).0;
                let up = p(t + h).apply(1.0, 0.25).0;
                let upp = (up - 2.0 * u0 + um) / (h * h);
                let ud = (up - um) / (2.0 * h);
                let residual = upp + ud + lambda * u0;
                assert!(residual.abs() < 1e-5, "λ = {lambda}, t = {t}: {residual}");
            }
            // Semigroup property.
            let a = p(0.7);
            let b = p(0.4);
            let c = p(1.1);
            let (u, v) = b.apply(a.e11, a.e21);
            assert!((u - c.e11).abs() < 1e-12 && (v - c.e21).abs() < 1e-12);
        }
    }

    #[test]
    fn rk4_error_drops_sixteenfold_under_step_halving() {
        let basis = basis_n(4);
        let u = basis.field_from_coeffs(vec![0.5, -0.3, 0.2, 0.1]).unwrap();
        let ut = basis.field_from_coeffs(vec![0.0, 0.4, -0.1, 0.0]).unwrap();
        let state = PhaseState::new(u, ut).unwrap();
        let symbol = Symbol::builtin(1.0, 0.5).unwrap();
        let reference = {
            let cfg = SolverConfig::new(1.25e-4).unwrap().with_record_every(8000);
            integrate(&state, 0.0, 1.0, &symbol, &cfg).unwrap()
        };
        let err_at = |dt: f64| -> f64 {
            let steps = (1.0 / dt).round() as usize;
            let cfg = SolverConfig::new(dt).unwrap().with_record_every(steps);
            let traj = integrate(&state, 0.0, 1.0, &symbol, &cfg).unwrap();
            state_distance(traj.last(), reference.last()).unwrap()
        };
        let coarse = err_at(4e-3);
        let fine = err_at(2e-3);
        let ratio = coarse / fine;
        assert!(
            (10.0..30.0).contains(&ratio),
            "expected ~16x error reduction, got {ratio} ({coarse} / {fine})"
        );
    }

    #[test]
    fn forced_linear_constant_settles_to_steady_state() {
        // û'' + û' + û = 1 settles at û = 1.
        let basis = basis_n(1);
        let state = PhaseState::new(basis.zero_field(), basis.zero_field()).unwrap();
        // The transient decays like e^{-t/2}, so T = 50 leaves ~1.4e-11 of it.
        let cfg = SolverConfig::new(1e-3).unwrap().with_record_every(5000);
        let forcing = |_t: f64| vec![1.0];
        let traj =
            solve_linear(&state, 0.0, 50.0, LinearForcing::Modes(&forcing), &cfg).unwrap();
        let last = traj.last();
        assert!((last.u.coeffs()[0] - 1.0).abs() < 1e-9);
        assert!(last.ut.coeffs()[0].abs() < 1e-9);
    }

    #[test]
    fn exp_mode_linear_forced_matches_rk4() {
        let basis = basis_n(2);
        let state = PhaseState::new(
            basis.field_from_coeffs(vec![1.0, -0.5]).unwrap(),
            basis.zero_field(),
        )
        .unwrap();
        let forcing = |t: f64| vec![t.cos(), 0.5 * (2.0 * t).sin()];
        let rk = SolverConfig::new(1e-3).unwrap().with_record_every(2000);
        let ex = SolverConfig::new(1e-3)
            .unwrap()
            .with_method(Method::ExpMode)
            .with_record_every(2000);
        let a = solve_linear(&state, 0.0, 2.0, LinearForcing::Modes(&forcing), &rk).unwrap();
        let b = solve_linear(&state, 0.0, 2.0, LinearForcing::Modes(&forcing), &ex).unwrap();
        let d = state_distance(a.last(), b.last()).unwrap();
        assert!(d < 1e-5, "schemes disagree by {d}");
    }

    #[test]
    fn cocycle_satisfies_identity_and_composition() {
        let basis = basis_n(4);
        let state = PhaseState::new(
            basis.field_from_coeffs(vec![0.8, 0.1, -0.2, 0.05]).unwrap(),
            basis.field_from_coeffs(vec![0.0, -0.3, 0.1, 0.0]).unwrap(),
        )
        .unwrap();
        let p = Symbol::builtin(1.0, 0.7).unwrap();
        let cfg = SolverConfig::new(1e-3).unwrap();

        let id = cocycle(&state, 0.0, &p, &cfg).unwrap();
        assert_eq!(state_distance(&id, &state).unwrap(), 0.0);

        // φ(t+s, p) = φ(t, θ_s p) ∘ φ(s, p) for a few (s, t) pairs.
        for (s, t) in [(0.5, 0.75), (1.0, 2.0), (2.5, 1.5)] {
            let whole = cocycle(&state, t + s, &p, &cfg).unwrap();
            let first = cocycle(&state, s, &p, &cfg).unwrap();
            let second = cocycle(&first, t, &p.shift(s), &cfg).unwrap();
            let gap = state_distance(&whole, &second).unwrap();
            let tol = 10.0 * cfg.error_estimate(&basis, t + s, 1.0);
            assert!(gap <= tol, "(s, t) = ({s}, {t}): gap {gap} vs tol {tol}");
        }
    }

    #[test]
    fn blowup_guard_trips_on_unstable_growth() {
        // f0(u) = u³ feeds energy without bound from a large start.
        let basis = basis_n(1);
        let state = PhaseState::new(
            basis.field_from_coeffs(vec![40.0]).unwrap(),
            basis.zero_field(),
        )
        .unwrap();
        let grow = Symbol::autonomous(BaseFn::polynomial(vec![0.0, 0.0, 0.0, 1.0]).unwrap());
        let mut cfg = SolverConfig::new(1e-3).unwrap();
        cfg.blowup_ceiling = 1e3;
        let res = integrate(&state, 0.0, 50.0, &grow, &cfg);
        match res {
            Err(Error::BlowUp { norm, .. }) => assert!(norm > 1e3),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unstable_step_for_stiff_modes() {
        let basis = basis_n(16);
        let state = single_mode_state(&basis);
        let cfg = SolverConfig::new(0.5).unwrap();
        assert!(matches!(
            integrate(&state, 0.0, 1.0, &zero_symbol(), &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn shadow_reproduces_nonlinear_solution_minus_free_part() {
        let basis = basis_n(8);
        let coeffs: Vec<f64> = (0..8).map(|k| 0.9f64.powi(k as i32 + 1)).collect();
        let state = PhaseState::new(
            basis.field_from_coeffs(coeffs).unwrap(),
            basis.zero_field(),
        )
        .unwrap();
        let p = Symbol::builtin(1.0, 0.6).unwrap();
        let cfg = SolverConfig::new(1e-3).unwrap().with_record_every(100);
        let (u_traj, w_traj) = integrate_with_shadow(&state, 0.0, 4.0, &p, &cfg).unwrap();
        let v_traj = solve_linear(&state, 0.0, 4.0, LinearForcing::Zero, &cfg).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..u_traj.len() {
            let vw = state_axpy(1.0, &v_traj.states()[i], 1.0, &w_traj.states()[i]).unwrap();
            worst = worst.max(state_distance(&vw, &u_traj.states()[i]).unwrap());
        }
        assert!(worst <= 1e-6, "split consistency residual {worst}");
    }

    #[test]
    fn trajectory_grid_is_uniform_and_hits_endpoints() {
        let basis = basis_n(2);
        let state = single_mode_state(&basis);
        let cfg = SolverConfig::new(1e-2).unwrap().with_record_every(7);
        let traj = integrate(&state, 0.0, 1.0, &zero_symbol(), &cfg).unwrap();
        let stride = traj.stride();
        for (i, t) in traj.times().iter().enumerate() {
            assert!((t - i as f64 * stride).abs() < 1e-12);
        }
        let last = *traj.times().last().unwrap();
        assert!((last - 1.0).abs() < 1e-12);
    }
}
