//! Dirichlet eigenbasis on box domains, spectral fields and the fractional
//! Sobolev / energy norms built from it.
//!
//! On `(0, L)` the eigenpairs are `λ_k = (kπ/L)²`, `e_k = √(2/L) sin(kπx/L)`;
//! on a rectangle they are tensor products ordered by eigenvalue with ties
//! broken lexicographically by multi-index. All spatial integrals use a
//! Gauss–Legendre rule per axis whose node count must be at least four times
//! the highest retained mode index, which keeps the basis Gram matrix equal
//! to the identity to near machine precision.

use std::sync::Arc;

use crate::quad::{gauss_legendre, simpson_uniform};
use crate::{Error, Result};

/// Box domain: an interval `(0, L)` or a rectangle `(0, Lx) × (0, Ly)`,
/// together with the Gauss–Legendre node count used per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lengths: Vec<f64>,
    quad_points: usize,
}

impl Domain {
    /// Interval `(0, length)`.
    pub fn interval(length: f64, quad_points: usize) -> Result<Self> {
        Self::new(vec![length], quad_points)
    }

    /// Rectangle `(0, lx) × (0, ly)`.
    pub fn rectangle(lx: f64, ly: f64, quad_points: usize) -> Result<Self> {
        Self::new(vec![lx, ly], quad_points)
    }

    fn new(lengths: Vec<f64>, quad_points: usize) -> Result<Self> {
        if lengths.is_empty() || lengths.len() > 2 {
            return Err(Error::Config(format!(
                "only 1- and 2-dimensional boxes are supported, got {} axes",
                lengths.len()
            )));
        }
        for &l in &lengths {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::Config(format!("box side must be positive and finite, got {l}")));
            }
        }
        if quad_points == 0 {
            return Err(Error::Config("quadrature node count must be positive".into()));
        }
        Ok(Self { lengths, quad_points })
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn quad_points(&self) -> usize {
        self.quad_points
    }

    /// Measure of the box.
    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }
}

/// First `N` Dirichlet eigenmodes of `-Δ` on a box, with the quadrature data
/// and the table of eigenfunction values needed to project and evaluate.
#[derive(Debug)]
pub struct Basis {
    domain: Domain,
    lambdas: Vec<f64>,
    modes: Vec<[usize; 2]>,
    /// Flattened quadrature points; coordinate `a` of point `q` is `points[q][a]`.
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
    /// Eigenfunction values, row-major: `table[k * n_quad + q] = e_k(x_q)`.
    table: Vec<f64>,
}

impl Basis {
    /// Builds the basis of the first `n_modes` eigenmodes, sorted by
    /// eigenvalue with lexicographic tie-breaking on the multi-index.
    ///
    /// Fails if `n_modes` is zero or if the domain's quadrature resolution is
    /// below four nodes per retained mode index on some axis.
    pub fn build(domain: Domain, n_modes: usize) -> Result<Arc<Self>> {
        if n_modes == 0 {
            return Err(Error::Config("basis needs at least one mode".into()));
        }
        let dim = domain.dim();
        let factors: Vec<f64> = domain
            .lengths
            .iter()
            .map(|l| (std::f64::consts::PI / l).powi(2))
            .collect();

        // The n_modes smallest eigenvalues all have per-axis indices ≤ n_modes,
        // so enumerating the cube of side n_modes is exhaustive.
        let mut candidates: Vec<(f64, [usize; 2])> = Vec::new();
        if dim == 1 {
            for j in 1..=n_modes {
                candidates.push((factors[0] * (j * j) as f64, [j, 0]));
            }
        } else {
            for j in 1..=n_modes {
                for k in 1..=n_modes {
                    let lam = factors[0] * (j * j) as f64 + factors[1] * (k * k) as f64;
                    candidates.push((lam, [j, k]));
                }
            }
        }
        candidates.sort_by(|a, b| {
            a.0.partial_cmp(&b.0).expect("finite eigenvalues").then(a.1.cmp(&b.1))
        });
        candidates.truncate(n_modes);

        let mut max_index = [0usize; 2];
        for (_, m) in &candidates {
            for a in 0..dim {
                max_index[a] = max_index[a].max(m[a]);
            }
        }
        for a in 0..dim {
            if domain.quad_points < 4 * max_index[a] {
                return Err(Error::Config(format!(
                    "{} quadrature nodes per axis is too coarse for mode index {}; need at least {}",
                    domain.quad_points,
                    max_index[a],
                    4 * max_index[a]
                )));
            }
        }

        // Tensor quadrature grid, axis 0 major.
        let mut axis_nodes = Vec::with_capacity(dim);
        let mut axis_weights = Vec::with_capacity(dim);
        for a in 0..dim {
            let (x, w) = gauss_legendre(domain.quad_points, domain.lengths[a])?;
            axis_nodes.push(x);
            axis_weights.push(w);
        }
        let n_quad = domain.quad_points.pow(dim as u32);
        let mut points = Vec::with_capacity(n_quad);
        let mut weights = Vec::with_capacity(n_quad);
        if dim == 1 {
            for q in 0..domain.quad_points {
                points.push([axis_nodes[0][q], 0.0]);
                weights.push(axis_weights[0][q]);
            }
        } else {
            for q0 in 0..domain.quad_points {
                for q1 in 0..domain.quad_points {
                    points.push([axis_nodes[0][q0], axis_nodes[1][q1]]);
                    weights.push(axis_weights[0][q0] * axis_weights[1][q1]);
                }
            }
        }

        let lambdas: Vec<f64> = candidates.iter().map(|c| c.0).collect();
        let modes: Vec<[usize; 2]> = candidates.iter().map(|c| c.1).collect();
        let mut table = vec![0.0; n_modes * n_quad];
        for (k, mode) in modes.iter().enumerate() {
            for (q, p) in points.iter().enumerate() {
                let mut v = 1.0;
                for a in 0..dim {
                    let l = domain.lengths[a];
                    v *= (2.0 / l).sqrt() * (mode[a] as f64 * std::f64::consts::PI * p[a] / l).sin();
                }
                table[k * n_quad + q] = v;
            }
        }

        Ok(Arc::new(Self { domain, lambdas, modes, points, weights, table }))
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn n_modes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn n_quad(&self) -> usize {
        self.weights.len()
    }

    /// Eigenvalues in basis order (nondecreasing).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambdas
    }

    /// Per-mode multi-indices; the unused axis of a 1-d mode is zero.
    pub fn mode_indices(&self) -> &[[usize; 2]] {
        &self.modes
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn quad_nodes(&self) -> &[[f64; 2]] {
        &self.points
    }

    /// `e_k(x_q)` for mode `k` at quadrature point `q`.
    pub fn eigenfunction_value(&self, k: usize, q: usize) -> f64 {
        self.table[k * self.n_quad() + q]
    }

    /// All grid values of mode `k`, indexed by quadrature point.
    pub fn eigenfunction_values(&self, k: usize) -> &[f64] {
        let nq = self.n_quad();
        &self.table[k * nq..(k + 1) * nq]
    }

    /// L² projection of grid samples onto the retained modes:
    /// `c_k = Σ_q w_q values[q] e_k(x_q)`.
    pub fn project(self: &Arc<Self>, values: &[f64]) -> Result<SpectralField> {
        if values.len() != self.n_quad() {
            return Err(Error::Shape(format!(
                "expected {} grid samples, got {}",
                self.n_quad(),
                values.len()
            )));
        }
        let nq = self.n_quad();
        let mut coeffs = vec![0.0; self.n_modes()];
        for (k, c) in coeffs.iter_mut().enumerate() {
            let row = &self.table[k * nq..(k + 1) * nq];
            let mut acc = 0.0;
            for q in 0..nq {
                acc += self.weights[q] * values[q] * row[q];
            }
            *c = acc;
        }
        Ok(SpectralField { basis: Arc::clone(self), coeffs })
    }

    /// Wraps raw mode coefficients as a field.
    pub fn field_from_coeffs(self: &Arc<Self>, coeffs: Vec<f64>) -> Result<SpectralField> {
        if coeffs.len() != self.n_modes() {
            return Err(Error::Shape(format!(
                "expected {} coefficients, got {}",
                self.n_modes(),
                coeffs.len()
            )));
        }
        Ok(SpectralField { basis: Arc::clone(self), coeffs })
    }

    pub fn zero_field(self: &Arc<Self>) -> SpectralField {
        SpectralField { basis: Arc::clone(self), coeffs: vec![0.0; self.n_modes()] }
    }
}

/// True if the two bases are interchangeable (same object or same build).
pub fn same_basis(a: &Arc<Basis>, b: &Arc<Basis>) -> bool {
    Arc::ptr_eq(a, b) || (a.domain == b.domain && a.modes == b.modes)
}

/// A truncated field `u = Σ_k c_k e_k`, tied to the basis it was built with.
#[derive(Debug, Clone)]
pub struct SpectralField {
    basis: Arc<Basis>,
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Point values on the quadrature grid: `u(x_q) = Σ_k c_k e_k(x_q)`.
    pub fn evaluate(&self) -> Vec<f64> {
        let nq = self.basis.n_quad();
        let mut values = vec![0.0; nq];
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = &self.basis.table[k * nq..(k + 1) * nq];
            for q in 0..nq {
                values[q] += c * row[q];
            }
        }
        values
    }

    /// Fractional Sobolev norm `‖u‖_{H^s} = √(Σ_k λ_k^s c_k²)`, `s ≥ 0`.
    /// `s = 0` is the L² norm and `s = 1` the Dirichlet norm `‖∇u‖`.
    pub fn sobolev_norm(&self, s: f64) -> Result<f64> {
        if s < 0.0 || !s.is_finite() {
            return Err(Error::Domain(format!("Sobolev exponent must be ≥ 0, got {s}")));
        }
        let mut acc = 0.0;
        for (lam, c) in self.basis.lambdas.iter().zip(&self.coeffs) {
            let w = if s == 0.0 { 1.0 } else if s == 1.0 { *lam } else { lam.powf(s) };
            acc += w * c * c;
        }
        Ok(acc.sqrt())
    }

    /// Spatial Lᵖ norm `(∫ |u|^p)^{1/p}` evaluated with the quadrature rule,
    /// `p ≥ 1` finite.
    pub fn lp_space_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::Domain(format!("Lebesgue exponent must be ≥ 1, got {p}")));
        }
        let values = self.evaluate();
        let mut acc = 0.0;
        for (w, v) in self.basis.weights.iter().zip(&values) {
            acc += w * v.abs().powf(p);
        }
        Ok(acc.powf(1.0 / p))
    }
}

/// Position/velocity pair `(u, u_t)` over a shared basis.
#[derive(Debug, Clone)]
pub struct PhaseState {
    pub u: SpectralField,
    pub ut: SpectralField,
}

impl PhaseState {
    pub fn new(u: SpectralField, ut: SpectralField) -> Result<Self> {
        if !same_basis(&u.basis, &ut.basis) {
            return Err(Error::Shape("position and velocity live on different bases".into()));
        }
        Ok(Self { u, ut })
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.u.basis
    }

    /// Energy norm `‖(u, u_t)‖_{E_s} = √(‖u‖²_{H^{s+1}} + ‖u_t‖²_{H^s})`,
    /// `0 ≤ s ≤ 1`.
    pub fn energy_norm(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain(format!("energy index must lie in [0, 1], got {s}")));
        }
        let a = self.u.sobolev_norm(s + 1.0)?;
        let b = self.ut.sobolev_norm(s)?;
        Ok(a.hypot(b))
    }
}

/// Space-time norm `‖u‖_{L^q(0, T; L^p)}` of a uniformly sampled series of
/// fields with spacing `dt`, computed by a composite Simpson rule in time.
pub fn lpt_norm(series: &[SpectralField], dt: f64, q: f64, p: f64) -> Result<f64> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::Domain(format!("time exponent must be ≥ 1, got {q}")));
    }
    if series.len() < 2 {
        return Err(Error::Domain("space-time norm needs at least two samples".into()));
    }
    for f in &series[1..] {
        if !same_basis(&f.basis, &series[0].basis) {
            return Err(Error::Shape("series mixes fields from different bases".into()));
        }
    }
    let mut powers = Vec::with_capacity(series.len());
    for f in series {
        powers.push(f.lp_space_norm(p)?.powf(q));
    }
    Ok(simpson_uniform(&powers, dt)?.max(0.0).powf(1.0 / q))
}
