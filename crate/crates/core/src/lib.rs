//! Spectral Galerkin toolkit for the weakly damped wave equation
//!
//! ```text
//! u_tt + u_t - Δu = p(t, u),   u|_∂Ω = 0,
//! ```
//!
//! on box domains, where `p` is a closed parametric family of time-dependent
//! nonlinearities `p(t, u) = f0(u) + ε a(t + φ) b(u)`. The crate truncates the
//! equation to the first `N` Dirichlet eigenmodes and provides:
//!
//! * the eigenbasis, fractional Sobolev and energy norms ([`spectral`]),
//! * the symbol family, its time-shift flow, hulls and a `C(ℝ; C¹(ℝ))` metric
//!   ([`symbols`]),
//! * fixed-step integrators for the truncated system, including an exact
//!   per-mode propagator for the linear part ([`solver`]),
//! * energy budgets, dissipation fits, Gronwall-type certified bounds and
//!   space-time norm diagnostics ([`diagnostics`]),
//! * a linear/nonlinear Duhamel splitting with a fractional-regularity ladder
//!   ([`splitting`]),
//! * pullback/uniform attractor approximation and set-distance studies
//!   ([`attractor`]).
//!
//! All reductions run in a fixed summation order so that repeated runs with
//! the same configuration and seed produce bit-identical results.

pub mod attractor;
pub mod diagnostics;
mod error;
pub mod quad;
pub mod report;
pub mod solver;
pub mod spectral;
pub mod splitting;
pub mod symbols;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
