use thiserror::Error;

/// Errors shared across the crate.
///
/// Numerical routines return `Config`/`Shape`/`Domain` for bad inputs before
/// doing any work; the remaining variants report failures detected while a
/// computation is running (blow-up guard, unconverged horizons, rejected
/// fits).
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value (domain lengths, mode counts, step sizes).
    #[error("configuration error: {0}")]
    Config(String),

    /// Two objects that must share a basis or length do not.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A scalar argument lies outside the admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// A function evaluation produced a non-finite value.
    #[error("evaluation error: non-finite value in {context} at t = {t}")]
    Evaluation { context: String, t: f64 },

    /// The integrator state left the guard ball before the horizon.
    #[error("blow-up guard tripped at t = {t}: energy norm {norm:.3e} exceeds ceiling {ceiling:.3e}")]
    BlowUp { t: f64, norm: f64, ceiling: f64 },

    /// An ensemble member never settled inside the requested ball.
    #[error("member {member} never entered the radius-{radius} ball within the horizon")]
    NonAbsorbed { member: usize, radius: f64 },

    /// Pullback sections at horizons T and 2T still differ by more than the tolerance.
    #[error("pullback horizon too short: Cauchy gap {gap:.3e} exceeds tolerance {tol:.3e}")]
    HorizonTooShort { gap: f64, tol: f64 },

    /// A least-squares fit was rejected (degenerate data or residual too large).
    #[error("fit rejected: {0}")]
    FitRejected(String),
}
