//! Experiment drivers. Each kind consumes a parsed config and returns named
//! text artifacts plus a check report; the caller owns all file writes.
//! Numeric output uses shortest round-trip formatting and fixed iteration
//! order, so a repeated run regenerates every byte.

use std::sync::Arc;

use serde::Serialize;

use dampwave::attractor::{
    e1_bound, invariance_check, pullback_section, semicontinuity_study, semidist_states,
    AttractorApprox, EnsembleSpec, SectionConfig,
};
use dampwave::diagnostics::{
    dissipation_residual, energy_breakdown, interpolation_check, linear_decay_fit,
    strichartz_windows, WindowSeries,
};
use dampwave::report::{CheckReport, RunReport};
use dampwave::solver::{integrate, Method, SolverConfig, Trajectory};
use dampwave::spectral::Basis;
use dampwave::splitting::{ladder_norms, split_with_alpha1};
use dampwave::symbols::{c1_metric, hull_sample, hull_shifts, Symbol};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::CliError;

pub struct Outcome {
    pub report: RunReport,
    /// (file name, content) pairs in emission order.
    pub files: Vec<(String, String)>,
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    match cfg.experiment.kind {
        ExperimentKind::Simulate => simulate(cfg),
        ExperimentKind::Diagnose => diagnose(cfg),
        ExperimentKind::Split => split_experiment(cfg),
        ExperimentKind::Attractor => attractor(cfg),
        ExperimentKind::Semicontinuity => semicontinuity(cfg),
        ExperimentKind::Metric => metric(cfg),
    }
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Rk4 => "rk4",
        Method::ExpMode => "exp_mode",
    }
}

/// Appends exactly 16 comma-prefixed coefficients, zero-padded.
fn push_leading_16(out: &mut String, coeffs: &[f64]) {
    for k in 0..16 {
        out.push(',');
        out.push_str(&fmt(coeffs.get(k).copied().unwrap_or(0.0)));
    }
}

/// Full time-series schema: time, 16 leading coefficients of u and u_t, the
/// two energy norms, and the energy functional with its five terms.
fn trajectory_csv(traj: &Trajectory) -> Result<String, CliError> {
    let p = traj.symbol();
    let breakdown =
        energy_breakdown(traj, p).map_err(|e| CliError::module("energy breakdown", e))?;
    let e0 = traj.energy_norms(0.0).map_err(|e| CliError::module("energy norms", e))?;
    let e1 = traj.energy_norms(1.0).map_err(|e| CliError::module("energy norms", e))?;
    let mut out = String::new();
    out.push_str("time");
    for k in 1..=16 {
        out.push_str(&format!(",u{k}"));
    }
    for k in 1..=16 {
        out.push_str(&format!(",ut{k}"));
    }
    out.push_str(",e0,e1,i,i1,i2,i3,i4,i5\n");
    for (i, t) in traj.times().iter().enumerate() {
        let state = &traj.states()[i];
        out.push_str(&fmt(*t));
        push_leading_16(&mut out, state.u.coeffs());
        push_leading_16(&mut out, state.ut.coeffs());
        for v in [
            e0[i],
            e1[i],
            breakdown.total[i],
            breakdown.i1[i],
            breakdown.i2[i],
            breakdown.i3[i],
            breakdown.i4[i],
            breakdown.i5[i],
        ] {
            out.push(',');
            out.push_str(&fmt(v));
        }
        out.push('\n');
    }
    Ok(out)
}

fn base_run(cfg: &ExperimentConfig) -> Result<(Arc<Basis>, Symbol, SolverConfig, Trajectory), CliError> {
    let basis = cfg.build_basis()?;
    let p = cfg
        .family
        .primary_symbol()
        .map_err(|e| CliError::module("constructing the symbol", e))?;
    let solver = cfg
        .solver
        .to_config()
        .map_err(|e| CliError::module("solver configuration", e))?;
    let x0 = cfg.initial_state(&basis)?;
    let traj = integrate(&x0, 0.0, cfg.solver.horizon, &p, &solver)
        .map_err(|e| CliError::module("integrating the trajectory", e))?;
    Ok((basis, p, solver, traj))
}

fn bounded_run_check(cfg: &ExperimentConfig, solver: &SolverConfig, traj: &Trajectory) -> Result<CheckReport, CliError> {
    let e0 = traj.energy_norms(0.0).map_err(|e| CliError::module("energy norms", e))?;
    let sup = e0.iter().copied().fold(0.0f64, f64::max);
    let last = *e0.last().expect("recorded trajectory is nonempty");
    Ok(CheckReport::new("bounded_run")
        .input("dt", solver.dt)
        .input("method", method_name(solver.method))
        .input("horizon", cfg.solver.horizon)
        .input("modes", cfg.domain.modes as u64)
        .input("blowup_ceiling", solver.blowup_ceiling)
        .constant("sup_e0", sup)
        .constant("final_e0", last)
        .residual(0.0)
        .passed(sup <= solver.blowup_ceiling))
}

fn simulate(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (_basis, _p, solver, traj) = base_run(cfg)?;
    let mut report = RunReport::new("simulate");
    report.push(bounded_run_check(cfg, &solver, &traj)?);
    let files = vec![("trajectory.csv".to_string(), trajectory_csv(&traj)?)];
    Ok(Outcome { report, files })
}

fn windows_csv(series: &[WindowSeries]) -> String {
    let mut out = String::from("h,t_start,norm\n");
    for ws in series {
        for (t, v) in ws.t_starts.iter().zip(&ws.norms) {
            out.push_str(&format!("{},{},{}\n", fmt(ws.h), fmt(*t), fmt(*v)));
        }
    }
    out
}

fn diagnose(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (_basis, p, solver, traj) = base_run(cfg)?;
    let mut report = RunReport::new("diagnose");
    report.push(bounded_run_check(cfg, &solver, &traj)?);

    let breakdown =
        energy_breakdown(&traj, &p).map_err(|e| CliError::module("energy breakdown", e))?;
    let scale = breakdown.total.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let additivity = breakdown.additivity_residual();
    report.push(
        CheckReport::new("energy_additivity")
            .residual(additivity)
            .passed(additivity <= 1e-9 * scale.max(1.0)),
    );

    let fit = dissipation_residual(&traj, &p)
        .map_err(|e| CliError::module("dissipation certificate", e))?;
    report.push(
        CheckReport::new("dissipation")
            .input("horizon", cfg.solver.horizon)
            .constant("c_decay", fit.c_decay)
            .constant("c_src", fit.c_src)
            .constant("slack", fit.slack)
            .residual(fit.worst_residual)
            .passed(fit.holds()),
    );

    let mut series = Vec::with_capacity(cfg.experiment.windows.len());
    let mut maxima = Vec::with_capacity(cfg.experiment.windows.len());
    let mut window_check = CheckReport::new("strichartz_windows")
        .input("windows", cfg.experiment.windows.clone());
    for &h in &cfg.experiment.windows {
        let ws = strichartz_windows(&traj, h).map_err(|e| CliError::module("window norms", e))?;
        let m = ws.max();
        window_check = window_check.constant(format!("max_h{h}"), m);
        maxima.push(m);
        series.push(ws);
    }
    report.push(window_check.passed(maxima.iter().all(|m| m.is_finite())));
    let worst_drop = maxima
        .windows(2)
        .map(|w| (w[0] - w[1]).max(0.0))
        .fold(0.0f64, f64::max);
    report.push(
        CheckReport::new("strichartz_monotone")
            .input("windows", cfg.experiment.windows.clone())
            .residual(worst_drop)
            .passed(worst_drop == 0.0),
    );

    let mut min_slack = f64::INFINITY;
    let mut checked: u64 = 0;
    if traj.len() >= 3 {
        let step = (traj.len() / 64).max(1);
        let mut i = 2;
        while i < traj.len() {
            let (lhs, rhs) = interpolation_check(&traj, traj.times()[i])
                .map_err(|e| CliError::module("interpolation inequality", e))?;
            min_slack = min_slack.min(rhs - lhs);
            checked += 1;
            i += step;
        }
    }
    let mut interp = CheckReport::new("interpolation").input("checked_windows", checked);
    if checked > 0 {
        interp = interp
            .constant("min_slack", min_slack)
            .residual((-min_slack).max(0.0))
            .passed(min_slack >= 0.0);
    }
    report.push(interp);

    if p.is_zero() {
        let check = match linear_decay_fit(&traj, 0.0) {
            Ok(decay) => CheckReport::new("linear_decay")
                .constant("rate", decay.rate)
                .constant("prefactor", decay.prefactor)
                .residual(decay.residual)
                .passed(true),
            Err(e) => CheckReport::new("linear_decay")
                .input("rejection", e.to_string().as_str())
                .passed(false),
        };
        report.push(check);
    }

    let files = vec![
        ("trajectory.csv".to_string(), trajectory_csv(&traj)?),
        ("windows.csv".to_string(), windows_csv(&series)),
    ];
    Ok(Outcome { report, files })
}

fn split_experiment(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (_basis, p, solver, traj) = base_run(cfg)?;
    let result = split_with_alpha1(&traj, &p, &solver, cfg.experiment.alpha1)
        .map_err(|e| CliError::module("splitting the trajectory", e))?;
    let mut report = RunReport::new("split");
    report.push(
        CheckReport::new("split_consistency")
            .input("alpha1", cfg.experiment.alpha1)
            .input("horizon", cfg.solver.horizon)
            .constant("tolerance", result.tolerance)
            .residual(result.consistency)
            .passed(result.consistent()),
    );
    let ladder = ladder_norms(&result).map_err(|e| CliError::module("ladder norms", e))?;
    let mut check = CheckReport::new("ladder")
        .input("rungs", ladder.rungs.len() as u64);
    let mut all_fitted = true;
    for (i, rung) in ladder.rungs.iter().enumerate() {
        check = check
            .constant(format!("alpha_{i}"), rung.alpha)
            .constant(format!("w_sup_{i}"), rung.w_sup)
            .constant(format!("w_slope_{i}"), rung.w_growth_slope);
        match &rung.v_decay {
            Some(fitted) => check = check.constant(format!("v_rate_{i}"), fitted.rate),
            None => all_fitted = false,
        }
    }
    report.push(check.passed(all_fitted && !ladder.any_flagged()));
    let files = vec![
        ("trajectory.csv".to_string(), trajectory_csv(&traj)?),
        ("v.csv".to_string(), trajectory_csv(&result.v_traj)?),
        ("w.csv".to_string(), trajectory_csv(&result.w_traj)?),
    ];
    Ok(Outcome { report, files })
}

/// One row per landing state: which hull sample produced it, leading
/// coefficients, and both energy norms.
fn states_csv(approx: &AttractorApprox) -> Result<String, CliError> {
    let mut out = String::from("symbol,member");
    for k in 1..=16 {
        out.push_str(&format!(",u{k}"));
    }
    for k in 1..=16 {
        out.push_str(&format!(",ut{k}"));
    }
    out.push_str(",e0,e1\n");
    let per_symbol = if approx.symbols.is_empty() {
        approx.len()
    } else {
        approx.len() / approx.symbols.len()
    };
    for (i, state) in approx.states.iter().enumerate() {
        let member = if per_symbol > 0 { i % per_symbol } else { i };
        out.push_str(&format!("{},{}", approx.membership[i], member));
        push_leading_16(&mut out, state.u.coeffs());
        push_leading_16(&mut out, state.ut.coeffs());
        let e0 = state.energy_norm(0.0).map_err(|e| CliError::module("state norms", e))?;
        let e1 = state.energy_norm(1.0).map_err(|e| CliError::module("state norms", e))?;
        out.push_str(&format!(",{},{}\n", fmt(e0), fmt(e1)));
    }
    Ok(out)
}

#[derive(Serialize)]
struct SectionMeta {
    epsilon: f64,
    horizon: f64,
    seed: u64,
    members: usize,
    hull_size: usize,
    cauchy_gap: f64,
    tolerance: f64,
    e1_bound: f64,
}

fn attractor(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let basis = cfg.build_basis()?;
    let p = cfg
        .family
        .primary_symbol()
        .map_err(|e| CliError::module("constructing the symbol", e))?;
    let solver = cfg
        .solver
        .to_config()
        .map_err(|e| CliError::module("solver configuration", e))?;
    let sc = SectionConfig {
        horizon: cfg.solver.horizon,
        cauchy_tol: cfg.experiment.cauchy_tol,
        solver,
        absorbing_radius: cfg.experiment.absorbing_radius,
    };
    let ensemble = EnsembleSpec {
        count: cfg.experiment.members,
        sampling: cfg.experiment.sampling(),
        seed: cfg.seed,
    };
    let hull = if p.is_autonomous() {
        vec![p.clone()]
    } else {
        hull_sample(&p, &hull_shifts(&p, cfg.experiment.hull_count))
    };
    let mut sections = Vec::with_capacity(hull.len());
    for q in &hull {
        sections.push(
            pullback_section(q, &ensemble, &basis, &sc)
                .map_err(|e| CliError::module("pullback section", e))?,
        );
    }
    let mut union_states = Vec::with_capacity(hull.len() * ensemble.count);
    let mut membership = Vec::with_capacity(hull.len() * ensemble.count);
    let mut gap: f64 = 0.0;
    let mut tolerance: f64 = 0.0;
    for (j, section) in sections.iter().enumerate() {
        gap = gap.max(section.cauchy_gap);
        tolerance = tolerance.max(section.tolerance);
        membership.extend(std::iter::repeat(j).take(section.len()));
        union_states.extend(section.states.iter().cloned());
    }
    let union = AttractorApprox {
        states: union_states,
        membership,
        symbols: hull.clone(),
        epsilon: p.eps(),
        horizon: sc.horizon,
        seed: ensemble.seed,
        cauchy_gap: gap,
        tolerance,
    };

    let mut report = RunReport::new("attractor");
    report.push(
        CheckReport::new("pullback_cauchy")
            .input("horizon", sc.horizon)
            .input("members", ensemble.count as u64)
            .input("hull_size", hull.len() as u64)
            .constant("tolerance", tolerance)
            .residual(gap)
            .passed(gap <= sc.cauchy_tol),
    );

    let mut worst_escape: f64 = 0.0;
    for section in &sections {
        let d = semidist_states(&section.states, &union.states)
            .map_err(|e| CliError::module("section distance", e))?;
        worst_escape = worst_escape.max(d);
    }
    report.push(
        CheckReport::new("section_in_union")
            .constant("tolerance", tolerance)
            .residual(worst_escape)
            .passed(worst_escape <= tolerance),
    );

    for (k, &t) in cfg.experiment.invariance_times.iter().enumerate() {
        let shifted = pullback_section(&p.shift(t), &ensemble, &basis, &sc)
            .map_err(|e| CliError::module("shifted pullback section", e))?;
        let residual = invariance_check(&p, &sections[0], &shifted, t, &solver)
            .map_err(|e| CliError::module("invariance residual", e))?;
        let allowed = (5.0 * sections[0].cauchy_gap).max(tolerance);
        report.push(
            CheckReport::new(format!("invariance_{k}"))
                .input("t", t)
                .constant("allowed", allowed)
                .residual(residual)
                .passed(residual <= allowed),
        );
    }

    let e1 = e1_bound(&union).map_err(|e| CliError::module("smoother norm bound", e))?;
    report.push(CheckReport::new("e1_bound").constant("e1", e1).residual(0.0).passed(true));

    let meta = SectionMeta {
        epsilon: union.epsilon,
        horizon: union.horizon,
        seed: union.seed,
        members: ensemble.count,
        hull_size: hull.len(),
        cauchy_gap: gap,
        tolerance,
        e1_bound: e1,
    };
    let meta_json = serde_json::to_string_pretty(&meta)
        .map_err(|e| CliError::Other(format!("metadata serialization failed: {e}")))?
        + "\n";
    let files = vec![
        ("states.csv".to_string(), states_csv(&union)?),
        ("states.meta.json".to_string(), meta_json),
    ];
    Ok(Outcome { report, files })
}

fn semicontinuity(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let basis = cfg.build_basis()?;
    let solver = cfg
        .solver
        .to_config()
        .map_err(|e| CliError::module("solver configuration", e))?;
    let sc = SectionConfig {
        horizon: cfg.solver.horizon,
        cauchy_tol: cfg.experiment.cauchy_tol,
        solver,
        absorbing_radius: cfg.experiment.absorbing_radius,
    };
    let ensemble = EnsembleSpec {
        count: cfg.experiment.members,
        sampling: cfg.experiment.sampling(),
        seed: cfg.seed,
    };
    let phase = cfg.family.phases[0];
    let rows = semicontinuity_study(
        |eps| cfg.family.symbol(eps, phase),
        &cfg.family.eps,
        cfg.experiment.hull_count,
        &ensemble,
        &basis,
        &sc,
    )
    .map_err(|e| CliError::module("semicontinuity study", e))?;

    let mut csv = String::from("epsilon,distance,cauchy_gap,e1\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            fmt(row.epsilon),
            fmt(row.distance),
            fmt(row.cauchy_gap),
            fmt(row.e1)
        ));
    }

    let max_gap = rows.iter().map(|r| r.cauchy_gap).fold(0.0f64, f64::max);
    let mut sorted: Vec<_> = rows.iter().filter(|r| r.epsilon > 0.0).collect();
    sorted.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    let mut worst_increase: f64 = 0.0;
    for pair in sorted.windows(2) {
        worst_increase = worst_increase.max(pair[1].distance - pair[0].distance);
    }
    let mut report = RunReport::new("semicontinuity");
    let mut trend = CheckReport::new("semicontinuity_trend")
        .input("eps_grid", cfg.family.eps.clone())
        .input("horizon", sc.horizon)
        .constant("max_cauchy_gap", max_gap)
        .residual(worst_increase)
        .passed(worst_increase <= max_gap);
    for row in &rows {
        trend = trend.constant(format!("dist_eps{}", row.epsilon), row.distance);
    }
    report.push(trend);

    let e1_max = rows.iter().map(|r| r.e1).fold(0.0f64, f64::max);
    let e1_min = rows.iter().map(|r| r.e1).fold(f64::INFINITY, f64::min);
    let mut uniform = CheckReport::new("e1_uniform").constant("max_e1", e1_max);
    if e1_min > 0.0 {
        uniform = uniform.constant("ratio", e1_max / e1_min);
    }
    report.push(uniform.passed(e1_max.is_finite()));

    let files = vec![("semicontinuity.csv".to_string(), csv)];
    Ok(Outcome { report, files })
}

fn metric(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg
        .family
        .primary_symbol()
        .map_err(|e| CliError::module("constructing the symbol", e))?;
    let i_max = cfg.experiment.metric_i_max;
    let grid = cfg.experiment.metric_grid;
    let mut report = RunReport::new("metric");

    let self_d = c1_metric(&p, &p, i_max, grid)
        .map_err(|e| CliError::module("symbol metric", e))?;
    report.push(
        CheckReport::new("metric_identity")
            .input("i_max", i_max as u64)
            .input("grid", grid as u64)
            .residual(self_d.value)
            .passed(self_d.value == 0.0),
    );

    let mut csv = String::from("shift,value,uncertainty\n");
    let mut values = CheckReport::new("metric_values")
        .input("shifts", cfg.experiment.shifts.clone());
    let mut symmetry_worst: f64 = 0.0;
    for (k, &s) in cfg.experiment.shifts.iter().enumerate() {
        let q = p.shift(s);
        let d = c1_metric(&p, &q, i_max, grid)
            .map_err(|e| CliError::module("symbol metric", e))?;
        let rev = c1_metric(&q, &p, i_max, grid)
            .map_err(|e| CliError::module("symbol metric", e))?;
        symmetry_worst = symmetry_worst.max((d.value - rev.value).abs());
        csv.push_str(&format!("{},{},{}\n", fmt(s), fmt(d.value), fmt(d.uncertainty)));
        values = values
            .constant(format!("d_{k}"), d.value)
            .constant(format!("u_{k}"), d.uncertainty);
    }
    report.push(values.passed(true));
    report.push(
        CheckReport::new("metric_symmetry")
            .residual(symmetry_worst)
            .passed(symmetry_worst <= 1e-12),
    );

    let files = vec![("metric.csv".to_string(), csv)];
    Ok(Outcome { report, files })
}
