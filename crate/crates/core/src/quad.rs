//! Quadrature primitives: Gauss–Legendre rules for spatial integrals and
//! composite Simpson rules for time series on uniform grids.

use crate::{Error, Result};

/// Gauss–Legendre nodes and weights on `(0, length)`.
///
/// Nodes are computed by Newton iteration on the Legendre polynomial; an
/// `n`-point rule integrates polynomials of degree `2n - 1` exactly and is
/// spectrally accurate on smooth integrands such as products of eigenmodes.
pub fn gauss_legendre(n: usize, length: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Config("quadrature rule needs at least one node".into()));
    }
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::Config(format!("interval length must be positive, got {length}")));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    // Symmetric rule: solve for the roots in (0, 1] and mirror them.
    let half = n.div_ceil(2);
    for i in 0..half {
        // Tricomi's initial guess for the i-th root of P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_n' by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    // Map from (-1, 1) to (0, length).
    for i in 0..n {
        nodes[i] = 0.5 * length * (nodes[i] + 1.0);
        weights[i] *= 0.5 * length;
    }
    Ok((nodes, weights))
}

/// Integral of uniformly sampled values with spacing `dt` by a composite
/// Simpson rule (fourth order). An odd interval count is handled by a 3/8
/// rule on the final three intervals; a single interval falls back to the
/// trapezoid rule.
pub fn simpson_uniform(values: &[f64], dt: f64) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Domain("composite rule needs at least two samples".into()));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Domain(format!("sample spacing must be positive, got {dt}")));
    }
    let intervals = values.len() - 1;
    if intervals == 1 {
        return Ok(0.5 * dt * (values[0] + values[1]));
    }
    // Peel off three intervals for the 3/8 rule when the count is odd.
    let (simpson_end, tail) = if intervals % 2 == 0 {
        (values.len() - 1, 0.0)
    } else {
        let m = values.len() - 4;
        let t = 3.0 * dt / 8.0
            * (values[m] + 3.0 * values[m + 1] + 3.0 * values[m + 2] + values[m + 3]);
        (m, t)
    };
    let mut acc = 0.0;
    if simpson_end >= 2 {
        acc += values[0] + values[simpson_end];
        let mut i = 1;
        while i < simpson_end {
            acc += 4.0 * values[i];
            i += 2;
        }
        let mut i = 2;
        while i < simpson_end {
            acc += 2.0 * values[i];
            i += 2;
        }
        acc *= dt / 3.0;
    }
    Ok(acc + tail)
}

/// Adaptive Simpson quadrature with absolute tolerance. Used as an
/// independent cross-check for closed-form antiderivatives.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let err = left + right - whole;
        if depth == 0 || err.abs() <= 15.0 * tol {
            return left + right + err / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let fa = f(lo);
    let fm = f(0.5 * (lo + hi));
    let fb = f(hi);
    let whole = simpson(fa, fm, fb, hi - lo);
    sign * recurse(f, lo, hi, fa, fm, fb, whole, tol, 48)
}
