//! Experiment configuration: one TOML file with nested sections for the
//! domain, the symbol family, the integrator, the experiment and its knobs,
//! and the output. Configs round-trip through serialize/parse unchanged, so
//! a manifest can always reconstruct the run that produced it.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use dampwave::attractor::Sampling;
use dampwave::solver::{Method, SolverConfig};
use dampwave::spectral::{Basis, Domain, PhaseState};
use dampwave::symbols::{BaseFn, Symbol, TemporalPart};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub domain: DomainBlock,
    pub family: FamilyBlock,
    pub solver: SolverBlock,
    pub experiment: ExperimentBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBlock {
    /// 1 for an interval, 2 for a rectangle.
    pub dim: usize,
    /// Side lengths, one per dimension.
    pub lengths: Vec<f64>,
    /// Number of retained eigenmodes.
    pub modes: usize,
    /// Quadrature points per retained mode and axis.
    #[serde(default = "default_oversample")]
    pub oversample: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyBlock {
    /// Include the defocusing term −u|u|^{4−κ}.
    #[serde(default = "default_true")]
    pub damping: bool,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Polynomial part g, coefficients in ascending order (degree ≤ 3).
    #[serde(default)]
    pub g: Vec<f64>,
    /// Time profile of the perturbation.
    #[serde(default = "default_temporal")]
    pub a: TemporalPart,
    /// Perturbation sizes; the first entry drives single-symbol
    /// experiments, the whole list drives the convergence study.
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    /// Initial phases; the first entry drives single-symbol experiments.
    #[serde(default = "default_phases")]
    pub phases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    pub dt: f64,
    #[serde(default = "default_method")]
    pub method: Method,
    /// Integration horizon for trajectory experiments, pullback horizon for
    /// attractor experiments.
    pub horizon: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_ceiling")]
    pub blowup_ceiling: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    Diagnose,
    Split,
    Attractor,
    Semicontinuity,
    Metric,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Simulate,
        ExperimentKind::Diagnose,
        ExperimentKind::Split,
        ExperimentKind::Attractor,
        ExperimentKind::Semicontinuity,
        ExperimentKind::Metric,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Diagnose => "diagnose",
            ExperimentKind::Split => "split",
            ExperimentKind::Attractor => "attractor",
            ExperimentKind::Semicontinuity => "semicontinuity",
            ExperimentKind::Metric => "metric",
        }
    }

    pub fn summary(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "integrate one trajectory and record the full time series",
            ExperimentKind::Diagnose => {
                "energy breakdown, dissipation certificate, window norms, interpolation"
            }
            ExperimentKind::Split => "linear/smoother decomposition with the regularity ladder",
            ExperimentKind::Attractor => "pullback sections over hull samples, invariance residuals",
            ExperimentKind::Semicontinuity => "attractor distance study across perturbation sizes",
            ExperimentKind::Metric => "symbol metric values between time shifts of the family",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingKind {
    Sphere,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    pub kind: ExperimentKind,
    /// Initial mode coefficients of u (zero-padded to the mode count).
    #[serde(default)]
    pub initial_u: Vec<f64>,
    /// Initial mode coefficients of u_t.
    #[serde(default)]
    pub initial_ut: Vec<f64>,
    /// Ensemble size for attractor experiments.
    #[serde(default = "default_members")]
    pub members: usize,
    /// Initial-set radius in the energy norm.
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_sampling")]
    pub sampling: SamplingKind,
    /// Hull sample count for non-autonomous symbols.
    #[serde(default = "default_hull_count")]
    pub hull_count: usize,
    /// Largest acceptable gap between the T and 2T section approximations.
    #[serde(default = "default_cauchy_tol")]
    pub cauchy_tol: f64,
    /// When set, landing states must lie inside this ball.
    #[serde(default)]
    pub absorbing_radius: Option<f64>,
    /// First ladder exponent for the split experiment.
    #[serde(default = "default_alpha1")]
    pub alpha1: f64,
    /// Window lengths for the space-time norm diagnostics, ascending.
    #[serde(default = "default_windows")]
    pub windows: Vec<f64>,
    /// Time shifts for the metric experiment.
    #[serde(default = "default_shifts")]
    pub shifts: Vec<f64>,
    /// Evolution times for the invariance residual.
    #[serde(default = "default_invariance_times")]
    pub invariance_times: Vec<f64>,
    /// Series truncation index of the symbol metric.
    #[serde(default = "default_metric_i_max")]
    pub metric_i_max: usize,
    /// Grid points per window in the symbol metric.
    #[serde(default = "default_metric_grid")]
    pub metric_grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    /// Output directory; flags and the DAMPWAVE_OUT_DIR variable take over
    /// when absent.
    #[serde(default)]
    pub dir: Option<String>,
    /// Artifact kinds to emit.
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: None, formats: default_formats() }
    }
}

fn default_seed() -> u64 {
    0
}

fn default_oversample() -> usize {
    4
}

fn default_true() -> bool {
    true
}

fn default_kappa() -> f64 {
    1.0
}

fn default_temporal() -> TemporalPart {
    TemporalPart::Sin
}

fn default_eps() -> Vec<f64> {
    vec![0.0]
}

fn default_phases() -> Vec<f64> {
    vec![0.0]
}

fn default_method() -> Method {
    Method::ExpMode
}

fn default_record_every() -> usize {
    1
}

fn default_ceiling() -> f64 {
    1e6
}

fn default_members() -> usize {
    16
}

fn default_radius() -> f64 {
    1.0
}

fn default_sampling() -> SamplingKind {
    SamplingKind::Sphere
}

fn default_hull_count() -> usize {
    4
}

fn default_cauchy_tol() -> f64 {
    0.1
}

fn default_alpha1() -> f64 {
    dampwave::splitting::DEFAULT_ALPHA1
}

fn default_windows() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0]
}

fn default_shifts() -> Vec<f64> {
    vec![0.0]
}

fn default_invariance_times() -> Vec<f64> {
    vec![std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2]
}

fn default_metric_i_max() -> usize {
    20
}

fn default_metric_grid() -> usize {
    2048
}

fn default_formats() -> Vec<String> {
    vec!["csv".to_string(), "json".to_string()]
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate(path)?;
        Ok(cfg)
    }

    fn validate(&self, path: &str) -> Result<(), CliError> {
        let fail = |message: String| CliError::Config { path: path.to_string(), message };
        if !(self.domain.dim == 1 || self.domain.dim == 2) {
            return Err(fail(format!("domain.dim must be 1 or 2, got {}", self.domain.dim)));
        }
        if self.domain.lengths.len() != self.domain.dim {
            return Err(fail(format!(
                "domain.lengths needs {} entries, got {}",
                self.domain.dim,
                self.domain.lengths.len()
            )));
        }
        if self.domain.modes == 0 {
            return Err(fail("domain.modes must be at least 1".into()));
        }
        if self.domain.oversample == 0 {
            return Err(fail("domain.oversample must be at least 1".into()));
        }
        if self.family.eps.is_empty() {
            return Err(fail("family.eps must list at least one value".into()));
        }
        if self.family.phases.is_empty() {
            return Err(fail("family.phases must list at least one value".into()));
        }
        if !(self.solver.horizon > 0.0) {
            return Err(fail(format!(
                "solver.horizon must be positive, got {}",
                self.solver.horizon
            )));
        }
        let n = self.domain.modes;
        if self.experiment.initial_u.len() > n || self.experiment.initial_ut.len() > n {
            return Err(fail(format!(
                "experiment.initial_u/initial_ut exceed the mode count {n}"
            )));
        }
        for w in self.experiment.windows.windows(2) {
            if w[1] <= w[0] {
                return Err(fail("experiment.windows must be strictly ascending".into()));
            }
        }
        if self.experiment.kind == ExperimentKind::Semicontinuity
            && !self.family.eps.contains(&0.0)
        {
            return Err(fail(
                "family.eps must contain 0.0 for the semicontinuity experiment".into(),
            ));
        }
        for f in &self.output.formats {
            if f != "csv" && f != "json" {
                return Err(fail(format!("output.formats entries must be csv or json, got {f}")));
            }
        }
        self.solver.to_config().map_err(|e| fail(e.to_string()))?;
        self.family.base().map_err(|e| fail(e.to_string()))?;
        Ok(())
    }

    pub fn build_basis(&self) -> Result<Arc<Basis>, CliError> {
        let quad = (self.domain.modes * self.domain.oversample).max(32);
        let domain = match self.domain.dim {
            1 => Domain::interval(self.domain.lengths[0], quad),
            _ => Domain::rectangle(self.domain.lengths[0], self.domain.lengths[1], quad),
        }
        .map_err(|e| CliError::module("building the domain", e))?;
        Basis::build(domain, self.domain.modes)
            .map_err(|e| CliError::module("building the basis", e))
    }

    /// Initial state from the configured coefficient lists, zero-padded.
    pub fn initial_state(&self, basis: &Arc<Basis>) -> Result<PhaseState, CliError> {
        let n = basis.n_modes();
        let pad = |src: &[f64]| {
            let mut c = vec![0.0; n];
            c[..src.len()].copy_from_slice(src);
            c
        };
        let u = basis
            .field_from_coeffs(pad(&self.experiment.initial_u))
            .map_err(|e| CliError::module("initial data", e))?;
        let ut = basis
            .field_from_coeffs(pad(&self.experiment.initial_ut))
            .map_err(|e| CliError::module("initial data", e))?;
        PhaseState::new(u, ut).map_err(|e| CliError::module("initial data", e))
    }
}

impl FamilyBlock {
    pub fn base(&self) -> Result<BaseFn, dampwave::Error> {
        BaseFn::new(self.damping, self.kappa, self.g.clone())
    }

    pub fn symbol(&self, eps: f64, phase: f64) -> Result<Symbol, dampwave::Error> {
        Symbol::new(self.base()?, eps, self.a, phase)
    }

    /// Symbol at the first configured perturbation size and phase.
    pub fn primary_symbol(&self) -> Result<Symbol, dampwave::Error> {
        self.symbol(self.eps[0], self.phases[0])
    }
}

impl SolverBlock {
    pub fn to_config(&self) -> dampwave::Result<SolverConfig> {
        let cfg = SolverConfig {
            dt: self.dt,
            method: self.method,
            record_every: self.record_every,
            blowup_ceiling: self.blowup_ceiling,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ExperimentBlock {
    pub fn sampling(&self) -> Sampling {
        match self.sampling {
            SamplingKind::Sphere => Sampling::Sphere { radius: self.radius },
            SamplingKind::Grid => Sampling::Grid { radius: self.radius },
        }
    }
}
