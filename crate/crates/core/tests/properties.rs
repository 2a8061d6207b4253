//! Property-based checks of structural invariants: quadrature and
//! projection exactness, norm monotonicity and homogeneity, symbol algebra,
//! ensemble determinism, set-distance axioms, descent certificates, and the
//! cocycle composition law.

use std::f64::consts::PI;
use std::sync::Arc;

use dampwave::attractor::{semidist_states, EnsembleSpec, Sampling};
use dampwave::diagnostics::{
    energy_breakdown, gronwall_bound, gronwall_comparison_ode, tmax_bound, GronwallSpec,
    GronwallTerm,
};
use dampwave::quad::simpson_uniform;
use dampwave::solver::{cocycle, integrate, Method, SolverConfig};
use dampwave::spectral::{Basis, Domain, PhaseState};
use dampwave::splitting::ladder;
use dampwave::symbols::{c1_metric, hull_sample, BaseFn, Symbol, TemporalPart};
use proptest::prelude::*;

fn basis_on_pi(n_modes: usize) -> Arc<Basis> {
    Basis::build(Domain::interval(PI, (4 * n_modes).max(32)).unwrap(), n_modes).unwrap()
}

fn state_from(basis: &Arc<Basis>, u: Vec<f64>, ut: Vec<f64>) -> PhaseState {
    PhaseState::new(basis.field_from_coeffs(u).unwrap(), basis.field_from_coeffs(ut).unwrap())
        .unwrap()
}

fn symbol_strategy() -> impl Strategy<Value = Symbol> {
    (
        any::<bool>(),
        0.5..3.5f64,
        prop::collection::vec(-0.5..0.5f64, 0..=4),
        0.0..1.0f64,
        0..3u8,
        -3.0..3.0f64,
    )
        .prop_map(|(damping, kappa, poly, eps, temporal, phase)| {
            let base = BaseFn::new(damping, kappa, poly).unwrap();
            let temporal = match temporal {
                0 => TemporalPart::Sin,
                1 => TemporalPart::Cos,
                _ => TemporalPart::Quasiperiodic,
            };
            Symbol::new(base, eps, temporal, phase).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Projecting the point values of an in-span field recovers its
    /// coefficients: the quadrature is exact on the resolved modes.
    #[test]
    fn projection_roundtrip(coeffs in prop::collection::vec(-3.0..3.0f64, 8)) {
        let basis = basis_on_pi(8);
        let field = basis.field_from_coeffs(coeffs.clone()).unwrap();
        let back = basis.project(&field.evaluate()).unwrap();
        let scale = coeffs.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        for (a, b) in coeffs.iter().zip(back.coeffs()) {
            prop_assert!((a - b).abs() <= 1e-10 * scale, "{a} vs {b}");
        }
    }

    /// With every eigenvalue at least 1, the fractional norms are ordered in
    /// the smoothness index.
    #[test]
    fn sobolev_norm_monotone_in_smoothness(
        coeffs in prop::collection::vec(-2.0..2.0f64, 6),
        s1 in 0.0..2.0f64,
        ds in 0.0..1.0f64,
    ) {
        let basis = basis_on_pi(6);
        let field = basis.field_from_coeffs(coeffs).unwrap();
        let lo = field.sobolev_norm(s1).unwrap();
        let hi = field.sobolev_norm(s1 + ds).unwrap();
        prop_assert!(lo <= hi * (1.0 + 1e-12));
    }

    /// The energy norm is absolutely homogeneous.
    #[test]
    fn energy_norm_homogeneous(
        u in prop::collection::vec(-2.0..2.0f64, 4),
        ut in prop::collection::vec(-2.0..2.0f64, 4),
        c in -5.0..5.0f64,
        s in 0.0..1.0f64,
    ) {
        let basis = basis_on_pi(4);
        let x = state_from(&basis, u.clone(), ut.clone());
        let scaled = state_from(
            &basis,
            u.iter().map(|v| c * v).collect(),
            ut.iter().map(|v| c * v).collect(),
        );
        let want = c.abs() * x.energy_norm(s).unwrap();
        let got = scaled.energy_norm(s).unwrap();
        prop_assert!((want - got).abs() <= 1e-12 * (1.0 + want));
    }

    /// Time shifts compose additively: exactly on the stored phase for
    /// dyadic shifts, and up to roundoff in the evaluated values.
    #[test]
    fn dyadic_shifts_compose(
        i in -2048i32..2048,
        j in -2048i32..2048,
        eps in 0.0..1.0f64,
        t in -10.0..10.0f64,
        u in -2.0..2.0f64,
    ) {
        let a = i as f64 / 64.0;
        let b = j as f64 / 64.0;
        let p = Symbol::builtin(1.0, eps).unwrap();
        let two_step = p.shift(a).shift(b);
        let one_step = p.shift(a + b);
        prop_assert_eq!(two_step.phase(), one_step.phase());
        let direct = p.eval(t + a, u);
        let shifted = p.shift(a).eval(t, u);
        prop_assert!((direct - shifted).abs() <= 1e-9 * (1.0 + direct.abs()));
    }

    /// Hull samples carry canonical phases inside one period and evaluate
    /// like the corresponding raw translates.
    #[test]
    fn hull_samples_are_canonical(
        shifts in prop::collection::vec(-50.0..50.0f64, 1..6),
        eps in 0.01..1.0f64,
        t in -5.0..5.0f64,
        u in -2.0..2.0f64,
    ) {
        let p = Symbol::builtin(1.0, eps).unwrap();
        let period = p.temporal().period().unwrap();
        let hull = hull_sample(&p, &shifts);
        prop_assert!(!hull.is_empty());
        for q in &hull {
            prop_assert!((0.0..period).contains(&q.phase()));
        }
        for &s in &shifts {
            let direct = p.eval(t + s, u);
            let best = hull
                .iter()
                .map(|q| (q.eval(t, u) - direct).abs())
                .fold(f64::INFINITY, f64::min);
            prop_assert!(best <= 1e-9 * (1.0 + s.abs()), "no hull sample matches shift {s}");
        }
    }

    /// The smoothness ladder starts at zero, ends at one, increases
    /// strictly, and never grows by more than the factor 5/2.
    #[test]
    fn ladder_structure(alpha1 in 0.001..0.999f64) {
        let rungs = ladder(alpha1).unwrap();
        prop_assert_eq!(rungs[0], 0.0);
        prop_assert_eq!(*rungs.last().unwrap(), 1.0);
        prop_assert_eq!(rungs[1], alpha1);
        for w in rungs.windows(2).skip(1) {
            prop_assert!(w[1] > w[0]);
            prop_assert!(w[1] <= 2.5 * w[0] * (1.0 + 1e-12));
        }
    }

    /// The certified continuation horizon shrinks as the data grow. The
    /// exponent 5/κ makes the bound underflow to +0 in f64 once κ drops
    /// below ~0.15 at large radii (true values near 1e-340), so positivity
    /// is only claimed on the representable regime κ ≥ 0.5.
    #[test]
    fn continuation_horizon_monotone(
        r in 0.1..20.0f64,
        grow in 1.0..5.0f64,
        c in 0.1..5.0f64,
        c1 in 0.1..5.0f64,
        kappa in 0.5..3.9f64,
    ) {
        let small = tmax_bound(r, c, c1, kappa).unwrap();
        let large = tmax_bound(r * grow, c, c1, kappa).unwrap();
        prop_assert!(large <= small * (1.0 + 1e-12));
        prop_assert!(small > 0.0 && small <= 1.0);
    }

    /// Composite Simpson integrates cubics exactly on odd sample counts.
    #[test]
    fn simpson_exact_on_cubics(
        c0 in -2.0..2.0f64,
        c1 in -2.0..2.0f64,
        c2 in -2.0..2.0f64,
        c3 in -2.0..2.0f64,
        half in 1usize..40,
        dt in 0.01..0.5f64,
    ) {
        let n = 2 * half + 1;
        let values: Vec<f64> = (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                c0 + c1 * t + c2 * t * t + c3 * t * t * t
            })
            .collect();
        let span = (n - 1) as f64 * dt;
        let exact = c0 * span + c1 * span.powi(2) / 2.0 + c2 * span.powi(3) / 3.0
            + c3 * span.powi(4) / 4.0;
        let got = simpson_uniform(&values, dt).unwrap();
        prop_assert!((got - exact).abs() <= 1e-9 * (1.0 + exact.abs()), "{got} vs {exact}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Ensemble draws are reproducible and land exactly on the requested
    /// energy sphere.
    #[test]
    fn ensemble_draws_deterministic_and_normalized(
        seed in any::<u64>(),
        count in 1usize..8,
        radius in 0.1..6.0f64,
        sphere in any::<bool>(),
    ) {
        let basis = basis_on_pi(6);
        let sampling = if sphere {
            Sampling::Sphere { radius }
        } else {
            Sampling::Grid { radius }
        };
        let spec = EnsembleSpec { count, sampling, seed };
        let a = spec.draw(&basis).unwrap();
        let b = spec.draw(&basis).unwrap();
        prop_assert_eq!(a.len(), count);
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.u.coeffs(), y.u.coeffs());
            prop_assert_eq!(x.ut.coeffs(), y.ut.coeffs());
            let norm = x.energy_norm(0.0).unwrap();
            prop_assert!((norm - radius).abs() <= 1e-9 * radius);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// One-sided set distance: zero on identical sets, triangle inequality
    /// through any intermediate set.
    #[test]
    fn semidist_identity_and_triangle(
        seed_a in 0u64..1000,
        seed_b in 0u64..1000,
        seed_c in 0u64..1000,
        count in 2usize..6,
    ) {
        let basis = basis_on_pi(4);
        let draw = |seed| {
            EnsembleSpec { count, sampling: Sampling::Sphere { radius: 2.0 }, seed }
                .draw(&basis)
                .unwrap()
        };
        let a = draw(seed_a);
        let b = draw(seed_b);
        let c = draw(seed_c);
        prop_assert_eq!(semidist_states(&a, &a).unwrap(), 0.0);
        let ac = semidist_states(&a, &c).unwrap();
        let ab = semidist_states(&a, &b).unwrap();
        let bc = semidist_states(&b, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
    }

    /// Random descent hypotheses: the certified level dominates the
    /// comparison ODE past the certified entry time.
    #[test]
    fn descent_certificate_dominates(
        raw_terms in prop::collection::vec((0.3..3.0f64, 0.3..3.0f64, 0.4..2.5f64), 1..4),
        eta in 0.2..1.0f64,
        above in 0.0..20.0f64,
        frac in 0.2..1.0f64,
    ) {
        let terms: Vec<GronwallTerm> =
            raw_terms.iter().map(|&(a, b, alpha)| GronwallTerm { a, b, alpha }).collect();
        let n = terms.len();
        let mut spec = GronwallSpec { terms, initial: 0.0, eta };
        let pre = gronwall_bound(&spec).unwrap();
        spec.initial = pre.certified * frac + above;
        let cert = gronwall_bound(&spec).unwrap();
        let weights = vec![1.0 / n as f64; n];
        let horizon = cert.entry_time + 10.0;
        let slope0 = spec
            .terms
            .iter()
            .zip(&weights)
            .map(|(t, w)| t.a * (w * spec.initial).max(0.0).powf(t.alpha) + t.b)
            .fold(0.0f64, f64::max);
        let dt = (0.2 / slope0).min(0.01).max(horizon / 2.0e5);
        let curve = gronwall_comparison_ode(&spec, &weights, horizon, dt).unwrap();
        let tol = 1e-6 * cert.certified.max(1.0);
        for (t, i_val) in curve {
            if t >= cert.entry_time {
                prop_assert!(i_val <= cert.certified + tol);
            }
        }
    }

    /// On free linear runs the energy functional is additive in its five
    /// parts and never increases between recorded times.
    #[test]
    fn free_energy_additive_and_monotone(
        u in prop::collection::vec(-1.0..1.0f64, 4),
        ut in prop::collection::vec(-1.0..1.0f64, 4),
    ) {
        let basis = basis_on_pi(4);
        let p = Symbol::autonomous(BaseFn::zero());
        let cfg = SolverConfig::new(0.01)
            .unwrap()
            .with_method(Method::ExpMode)
            .with_record_every(10);
        let traj = integrate(&state_from(&basis, u, ut), 0.0, 5.0, &p, &cfg).unwrap();
        let brk = energy_breakdown(&traj, &p).unwrap();
        let scale = brk.total.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(brk.additivity_residual() <= 1e-9 * scale);
        for w in brk.total.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-10 * scale);
        }
    }

    /// Metric axioms at a coarse truncation: identity, symmetry, triangle.
    #[test]
    fn metric_axioms(
        p in symbol_strategy(),
        q in symbol_strategy(),
        r in symbol_strategy(),
    ) {
        let (i_max, grid) = (4usize, 16usize);
        prop_assert_eq!(c1_metric(&p, &p, i_max, grid).unwrap().value, 0.0);
        let dpq = c1_metric(&p, &q, i_max, grid).unwrap().value;
        let dqp = c1_metric(&q, &p, i_max, grid).unwrap().value;
        let dpr = c1_metric(&p, &r, i_max, grid).unwrap().value;
        let dqr = c1_metric(&q, &r, i_max, grid).unwrap().value;
        prop_assert!(dpq >= 0.0);
        prop_assert!((dpq - dqp).abs() <= 1e-12);
        prop_assert!(dpr <= dpq + dqr + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// Solving over s + t with the original symbol equals solving over s and
    /// then over t with the shifted symbol, up to accumulated roundoff.
    #[test]
    fn cocycle_composition(
        u in prop::collection::vec(-1.0..1.0f64, 4),
        ut in prop::collection::vec(-1.0..1.0f64, 4),
        si in 1u32..8,
        ti in 1u32..8,
        eps in 0.0..1.0f64,
    ) {
        let basis = basis_on_pi(4);
        let x = state_from(&basis, u, ut);
        let p = Symbol::builtin(1.0, eps).unwrap();
        let cfg = SolverConfig::new(0.01).unwrap().with_method(Method::ExpMode);
        let s = si as f64 * 0.5;
        let t = ti as f64 * 0.5;
        let through = cocycle(&cocycle(&x, s, &p, &cfg).unwrap(), t, &p.shift(s), &cfg).unwrap();
        let direct = cocycle(&x, s + t, &p, &cfg).unwrap();
        let gap = dampwave::solver::state_distance(&through, &direct).unwrap();
        let scale = 1.0 + x.energy_norm(0.0).unwrap();
        prop_assert!(gap <= 1e-8 * scale, "composition gap {gap}");
    }
}
