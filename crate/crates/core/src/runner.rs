//! Executes a parsed [`Scenario`] and writes its report files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use nalgebra::DVector;
use serde_json::{json, Value};

use crate::closed_forms::{
    counterexample_b_samples, ln_lambda_min, self_similar_lambda, CounterexampleParams, SupersolutionParams,
};
use crate::constants::{chain_pipeline, constant_ledger, induction_margin_check, ConstantInputs};
use crate::fd_solver::{
    cross_solver_run, solve, BoundaryCondition, GridKind, GridState, RadialStencil, SolveOptions, Trajectory,
};
use crate::harnack::{
    backward_sup_ratio, elliptic_ratio, elliptic_ratio_of_state, forward_ratio, intrinsic_target_time, CylinderKind,
    HarnackReport, Probe, RatioKind,
};
use crate::report::{ratios_csv, rows_csv, trajectory_csv, ReportRow};
use crate::scenario::{Command, GridChoice, InitialProfile, LambdaChoice, RandomProfile, Scenario};

/// Rows plus the files written for one scenario.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub rows: Vec<ReportRow>,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_pass() {
            0
        } else {
            1
        }
    }
}

struct Output {
    rows: Vec<ReportRow>,
    payload: Value,
    extra: Vec<(String, String)>,
}

/// Runs the scenario and writes `<id>_report.csv`, `<id>.json` and any data CSVs to `out_dir`.
pub fn run(scenario: &Scenario, out_dir: &Path) -> anyhow::Result<RunOutcome> {
    let out = match scenario.command {
        Command::RangeCheck => range_check(scenario),
        Command::Constants => constants(scenario)?,
        Command::Chain => chain(scenario)?,
        Command::SupersolutionAudit => supersolution_audit(scenario)?,
        Command::CounterexampleAudit => counterexample_audit(scenario)?,
        Command::SolveRadial | Command::Solve2d => solve_command(scenario)?,
        Command::Harnack => harnack(scenario)?,
        Command::Compare => compare(scenario)?,
    };
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let id = &scenario.id;
    let mut files = Vec::new();
    let mut write = |name: String, body: &str| -> anyhow::Result<()> {
        let path = out_dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        files.push(path);
        Ok(())
    };
    write(format!("{id}_report.csv"), &rows_csv(&out.rows))?;
    let doc = json!({
        "scenario": id,
        "command": scenario.command.name(),
        "params": scenario.params,
        "rows": out.rows,
        "result": out.payload,
    });
    write(format!("{id}.json"), &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    for (suffix, body) in &out.extra {
        write(format!("{id}_{suffix}"), body)?;
    }
    Ok(RunOutcome { rows: out.rows, files })
}

fn range_check(s: &Scenario) -> Output {
    let p = &s.params;
    let id = &s.id;
    let rows = vec![
        ReportRow::flag(id, "range_condition", p.range_condition_holds()),
        ReportRow::info(id, "range_lower_bound", p.range_lower_bound()),
        ReportRow::info(id, "kappa", p.kappa()),
        ReportRow::info(id, "fictitious_dimension", p.fictitious_dimension()),
        ReportRow::info(id, "admissible_power_threshold", p.admissible_power_threshold()),
    ];
    let payload = json!({
        "range_condition": p.range_condition_holds(),
        "range_lower_bound": p.range_lower_bound(),
        "kappa": p.kappa(),
        "fictitious_dimension": p.fictitious_dimension(),
    });
    Output { rows, payload, extra: Vec::new() }
}

fn ln_lambda(s: &Scenario) -> anyhow::Result<f64> {
    Ok(match s.barrier.lambda {
        LambdaChoice::Minimal => ln_lambda_min(&s.params)?,
        LambdaChoice::SelfSimilar => self_similar_lambda(&s.params)?.ln(),
        LambdaChoice::Value(v) => {
            if !(v > 0.0) {
                bail!("λ = {v} must be positive");
            }
            v.ln()
        }
    })
}

fn constant_inputs(s: &Scenario) -> anyhow::Result<ConstantInputs> {
    let c = &s.constants;
    Ok(ConstantInputs {
        mu: c.mu,
        c: c.c,
        c_hat: c.c_hat,
        ln_lambda: Some(ln_lambda(s)?),
        c_prime: c.c_prime,
        sigma: c.sigma,
    })
}

fn constants(s: &Scenario) -> anyhow::Result<Output> {
    let ledger = constant_ledger(&s.params, &constant_inputs(s)?)?;
    let id = &s.id;
    let rows = vec![
        ReportRow::info(id, "ln_lambda", ledger.ln_lambda),
        ReportRow::info(id, "mu_tilde", ledger.mu_tilde),
        ReportRow::info(id, "mu_hat", ledger.mu_hat),
        ReportRow::flag(id, "alpha_in_unit_interval", ledger.alpha > 0.0 && ledger.alpha < 1.0),
        ReportRow::info(id, "alpha", ledger.alpha),
        ReportRow::info(id, "ln_gamma_bar", ledger.ln_gamma_bar),
        ReportRow::flag(id, "c_hat_admissible", ledger.c_hat_admissible),
    ];
    Ok(Output { rows, payload: json!({ "ledger": ledger }), extra: Vec::new() })
}

fn chain(s: &Scenario) -> anyhow::Result<Output> {
    let (ledger, plan) = chain_pipeline(&s.params, &constant_inputs(s)?, &s.constants.x0, &s.constants.y_hat)?;
    let id = &s.id;
    let rows = vec![
        ReportRow::info(id, "rho", plan.rho),
        ReportRow::info(id, "K", plan.k as f64),
        ReportRow::info(id, "ln_c", plan.ln_c),
        ReportRow::info(id, "ln_gamma", plan.ln_gamma),
        ReportRow::flag(id, "induction_margin", induction_margin_check(&plan, plan.c_prime, s.params.q())),
    ];
    Ok(Output { rows, payload: json!({ "ledger": ledger, "plan": plan }), extra: Vec::new() })
}

fn barrier(s: &Scenario) -> anyhow::Result<SupersolutionParams> {
    let n = s.params.n();
    let lambda = ln_lambda(s)?.exp();
    Ok(SupersolutionParams::new(s.params, lambda, s.barrier.radius, DVector::zeros(n), s.barrier.t_origin)?
        .with_shift(s.barrier.shift))
}

fn supersolution_audit(s: &Scenario) -> anyhow::Result<Output> {
    let sp = barrier(s)?;
    let n = s.barrier.samples;
    let mut min_res = f64::INFINITY;
    let mut min_rel = f64::INFINITY;
    for i in 0..n {
        let r = sp.radius * (i + 1) as f64 / (n + 1) as f64;
        for j in 0..n {
            let t = sp.t_origin + 2.0 * (j + 1) as f64 / n as f64;
            let res = sp.residual(r, t)?;
            min_res = min_res.min(res);
            let scale = sp.radial_jet(r, t)?.u_t.abs();
            if scale > 0.0 {
                min_rel = min_rel.min(res / scale);
            }
        }
    }
    let id = &s.id;
    let rows = vec![
        ReportRow::info(id, "lambda", sp.lambda),
        ReportRow::flag(id, "lambda_at_least_lambda_min", sp.is_guaranteed()),
        ReportRow::at_least(id, "min_residual", min_res, -s.tolerance.unwrap_or(1e-9)),
        ReportRow::info(id, "min_relative_residual", min_rel),
    ];
    let payload = json!({ "lambda": sp.lambda, "samples_per_axis": n, "min_residual": min_res });
    Ok(Output { rows, payload, extra: Vec::new() })
}

fn counterexample_audit(s: &Scenario) -> anyhow::Result<Output> {
    let ce = CounterexampleParams::from_params(s.params)?;
    let samples = counterexample_b_samples(&s.params)?;
    let spread = samples.iter().map(|b| (b - ce.b).abs()).fold(0.0, f64::max) / ce.b.abs();
    let hand = 2.0 * ce.d.powf(s.params.q()) / (ce.d - 1.0);
    let mut max_rel = 0.0f64;
    for i in 0..100 {
        let r = 2.0 * (i + 1) as f64 / 100.0;
        for j in 0..100 {
            let t = -2.0 + 4.0 * j as f64 / 99.0;
            let scale = ce.radial_jet(r, t).u_t.abs();
            max_rel = max_rel.max(ce.residual(r, t)?.abs() / scale);
        }
    }
    // elliptic ratio of the sampled closed form on B_1(0), pushing t toward -∞
    let h = s.solver.h;
    let intervals = (2.0 / h).round() as usize;
    let mut t = -0.5;
    let mut growth = Vec::new();
    let mut best = 1.0f64;
    while best <= 100.0 && t > -1e6 {
        let state = GridState::radial_from_fn(ce.params, intervals, 2.0, t, |r| ce.eval(r, t));
        let Ok(state) = state else { break };
        let probe = Probe::new(vec![0.0], t, 1.0)?;
        let ratio = elliptic_ratio_of_state(&state, &probe, 0.0)?.ratio;
        growth.push(json!({ "t": t, "elliptic_ratio": ratio, "two_sided_ratio": ce.two_sided_ratio(t) }));
        best = best.max(ratio);
        t *= 2.0;
    }
    let id = &s.id;
    let rows = vec![
        ReportRow::info(id, "critical_q", s.params.q()),
        ReportRow::info(id, "b", ce.b),
        ReportRow::at_most(id, "b_probe_spread", spread, 1e-10),
        ReportRow::near(id, "b_closed_form", ce.b, hand, 1e-10 * hand),
        ReportRow::at_most(id, "max_relative_residual", max_rel, s.tolerance.unwrap_or(1e-8)),
        ReportRow::at_least(id, "max_elliptic_ratio", best, 100.0),
    ];
    let payload = json!({
        "b": ce.b, "d": ce.d, "kappa": ce.kappa, "b_samples": samples, "ratio_growth": growth,
    });
    Ok(Output { rows, payload, extra: Vec::new() })
}

/// Closed form used for tracking, when the initial data came from one.
enum Exact {
    Barrier(SupersolutionParams),
    Counterexample(CounterexampleParams),
}

impl Exact {
    fn value(&self, rho: f64, t: f64) -> anyhow::Result<f64> {
        Ok(match self {
            Exact::Barrier(sp) => sp.value_at_radius(rho, t)?,
            Exact::Counterexample(ce) => ce.eval(rho, t),
        })
    }
}

fn radial_profile(s: &Scenario) -> anyhow::Result<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
    Ok(match s.initial {
        InitialProfile::Constant { base } => Box::new(move |_| base),
        InitialProfile::Gaussian { base, amplitude, width } => {
            Box::new(move |r: f64| base + amplitude * (-r * r / (2.0 * width * width)).exp())
        }
        InitialProfile::Random { base, amplitude, seed, modes } => {
            let profile = RandomProfile::new(base, amplitude, seed, modes, s.solver.radius);
            Box::new(move |r| profile.eval(r))
        }
        InitialProfile::Barrier | InitialProfile::Counterexample => {
            bail!("this command needs an explicit initial profile (constant, gaussian or random)")
        }
    })
}

fn build_state(s: &Scenario) -> anyhow::Result<(GridState, BoundaryCondition, Option<Exact>)> {
    let m = s.solver.intervals()?;
    let t0 = s.solver.t_start;
    let exact = match s.initial {
        InitialProfile::Barrier => {
            let sp = barrier(s)?;
            if s.solver.radius * std::f64::consts::SQRT_2 >= sp.radius && s.solver.grid == GridChoice::Planar
                || s.solver.radius >= sp.radius
            {
                bail!("the grid must lie inside the barrier's ball of radius {}", sp.radius);
            }
            if t0 < sp.t_origin {
                bail!("t_start = {t0} precedes the barrier origin {}", sp.t_origin);
            }
            Some(Exact::Barrier(sp))
        }
        InitialProfile::Counterexample => Some(Exact::Counterexample(CounterexampleParams::from_params(s.params)?)),
        _ => None,
    };
    let (state, bc) = match &exact {
        Some(e) => {
            let f = |rho: f64| e.value(rho, t0).unwrap_or(f64::NAN);
            let state = match s.solver.grid {
                GridChoice::Radial => GridState::radial_from_fn(s.params, m, s.solver.radius, t0, f)?,
                GridChoice::Planar => {
                    GridState::planar_from_fn(s.params, m, s.solver.radius, t0, |x, y| f(x.hypot(y)))?
                }
            };
            let bc = match e {
                Exact::Barrier(sp) => BoundaryCondition::supersolution(sp.clone()),
                Exact::Counterexample(ce) => BoundaryCondition::counterexample(*ce),
            };
            (state, bc)
        }
        None => {
            let f = radial_profile(s)?;
            let state = match s.solver.grid {
                GridChoice::Radial => GridState::radial_from_fn(s.params, m, s.solver.radius, t0, &f)?,
                GridChoice::Planar => {
                    GridState::planar_from_fn(s.params, m, s.solver.radius, t0, |x, y| f(x.hypot(y)))?
                }
            };
            let f = radial_profile(s)?;
            let bc = BoundaryCondition::function(move |pos, _| f(pos.norm()));
            (state, bc)
        }
    };
    let mut state = state;
    if let Some(eps) = s.solver.epsilon {
        state = state.with_epsilon(eps)?;
    }
    if state.is_radial() {
        if let Some(d) = s.solver.d_eff {
            state = state.with_d_eff(d)?;
        }
        state = state.with_stencil(s.solver.stencil)?;
    }
    Ok((state, bc, exact))
}

fn options(s: &Scenario, snapshots: Vec<f64>) -> SolveOptions {
    SolveOptions { snapshot_times: snapshots, safety: s.solver.safety, dt_cap: None }
}

fn is_monotone(state: &GridState) -> bool {
    match state.kind() {
        GridKind::Radial { stencil, .. } => stencil == RadialStencil::Conservative,
        GridKind::Planar => state.params().p() == 2.0,
    }
}

fn solve_command(s: &Scenario) -> anyhow::Result<Output> {
    let (state, bc, exact) = build_state(s)?;
    let traj = solve(&state, &bc, s.solver.t_end, &options(s, s.solver.snapshots.clone()))?;
    let id = &s.id;
    let mut rows = vec![ReportRow::info(id, "snapshots", traj.snapshots.len() as f64)];

    // ordering against the initial and lateral data seen so far
    let mut lo = state.min();
    let mut hi = state.max();
    let mut deficit = f64::NEG_INFINITY;
    for snap in &traj.snapshots {
        for (i, &v) in snap.values().iter().enumerate() {
            if snap.is_boundary(i) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    for snap in &traj.snapshots {
        for &v in snap.values() {
            deficit = deficit.max(lo - v).max(v - hi);
        }
    }
    let scale = lo.abs().max(hi.abs()).max(1.0);
    if is_monotone(&state) {
        rows.push(ReportRow::at_most(id, "extremum_principle_excess", deficit, 1e-12 * scale));
    } else {
        rows.push(ReportRow::info(id, "extremum_principle_excess", deficit));
    }

    let mut payload = json!({
        "times": traj.times(),
        "epsilon": state.epsilon(),
        "h": state.h(),
        "d_eff": state.d_eff(),
    });
    if let Some(e) = &exact {
        let mut worst = 0.0f64;
        for snap in traj.snapshots.iter().skip(1) {
            let mut err = 0.0f64;
            let mut size = 0.0f64;
            for (i, &v) in snap.values().iter().enumerate() {
                let w = e.value(snap.position(i).norm(), snap.time())?;
                err = err.max((v - w).abs());
                size = size.max(w.abs());
            }
            worst = worst.max(err / size);
        }
        rows.push(ReportRow::at_most(id, "tracking_relative_linf", worst, s.tolerance.unwrap_or(0.05)));
        payload["tracking_relative_linf"] = json!(worst);
    }
    Ok(Output { rows, payload, extra: vec![("grid.csv".into(), trajectory_csv(&traj))] })
}

fn probe_snapshot_times(s: &Scenario) -> anyhow::Result<Vec<f64>> {
    let mut times: Vec<f64> = s.solver.snapshots.clone();
    for p in &s.probes {
        if p.t0 < s.solver.t_start || p.t0 > s.solver.t_end {
            bail!("probe time {} lies outside [t_start, t_end] = [{}, {}]", p.t0, s.solver.t_start, s.solver.t_end);
        }
        if p.t0 > s.solver.t_start {
            times.push(p.t0);
        }
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    Ok(times)
}

fn harnack(s: &Scenario) -> anyhow::Result<Output> {
    let (state, bc, _) = build_state(s)?;
    let traj = solve(&state, &bc, s.solver.t_end, &options(s, probe_snapshot_times(s)?))?;
    let c = s.constants.c;
    let mut reports: Vec<HarnackReport> = Vec::new();
    for probe in &s.probes {
        let report = match s.ratio {
            RatioKind::Elliptic => elliptic_ratio(&traj, probe)?,
            RatioKind::Forward => {
                let target = intrinsic_target_time(&traj, probe, c, CylinderKind::Forward)?;
                let now = traj.at_time(probe.t0).expect("scheduled").clone();
                let segment = solve(&now, &bc, target, &options(s, Vec::new()))?;
                forward_ratio(&segment, probe, c)?
            }
            RatioKind::Backward => {
                let target = intrinsic_target_time(&traj, probe, c, CylinderKind::Backward)?;
                if target < s.solver.t_start {
                    bail!("backward time {target} precedes t_start = {}", s.solver.t_start);
                }
                let snaps = if target > s.solver.t_start { vec![target] } else { Vec::new() };
                let segment = solve(&state, &bc, probe.t0, &options(s, snaps))?;
                backward_sup_ratio(&segment, probe, c)?
            }
        };
        reports.push(match s.bound {
            Some(b) => report.with_bound(b),
            None => report,
        });
    }
    let id = &s.id;
    let rows = reports
        .iter()
        .enumerate()
        .map(|(i, r)| ReportRow {
            scenario: id.clone(),
            quantity: format!("ratio_{i}"),
            value: r.ratio,
            tolerance: r.bound_used,
            pass: r.pass,
        })
        .collect();
    Ok(Output {
        rows,
        payload: json!({ "reports": reports, "epsilon": state.epsilon() }),
        extra: vec![("ratios.csv".into(), ratios_csv(&reports))],
    })
}

fn compare(s: &Scenario) -> anyhow::Result<Output> {
    let f = radial_profile(s)?;
    let mut settings = s.solver.clone();
    settings.grid = GridChoice::Planar;
    let m = settings.intervals()?;
    let run = cross_solver_run(s.params, f, m, s.solver.radius, s.solver.t_end - s.solver.t_start, s.solver.epsilon)?;
    let id = &s.id;
    let rows = vec![
        ReportRow::info(id, "d_eff", run.radial.d_eff().unwrap_or(f64::NAN)),
        ReportRow::info(id, "steps", run.steps as f64),
        ReportRow::at_most(id, "relative_linf_discrepancy", run.discrepancy, s.tolerance.unwrap_or(0.05)),
    ];
    let payload = json!({
        "discrepancy": run.discrepancy,
        "steps": run.steps,
        "epsilon": run.planar.epsilon(),
        "h": run.planar.h(),
    });
    let traj = Trajectory::new(vec![run.planar]);
    Ok(Output { rows, payload, extra: vec![("grid.csv".into(), trajectory_csv(&traj))] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario_str;

    fn run_text(text: &str) -> (RunOutcome, tempfile::TempDir) {
        let dir = tempfile::tempdir().unwrap();
        let s = parse_scenario_str(text, "t").unwrap();
        (run(&s, dir.path()).unwrap(), dir)
    }

    #[test]
    fn range_check_passes() {
        let (out, dir) = run_text("command=range-check\nn=2\np=2\nq=1.5\n");
        assert_eq!(out.exit_code(), 0);
        let csv = fs::read_to_string(dir.path().join("t_report.csv")).unwrap();
        assert!(csv.contains("t,range_condition,1.0000000000000000e0,,true"));
    }

    #[test]
    fn counterexample_audit_passes() {
        let (out, _dir) = run_text("command=counterexample-audit\nn=3\np=1.2\nq=critical\n");
        assert!(out.all_pass(), "{:?}", out.rows);
    }

    #[test]
    fn solve_radial_tracks_exact_profile() {
        let text = "command=solve-radial\nn=2\np=1.1\nq=1.5\ninitial=barrier\nlambda=exact\n\
                    radius=0.5\nh=1/32\nt_start=1\nt_end=1.01\n";
        let (out, dir) = run_text(text);
        assert!(out.all_pass(), "{:?}", out.rows);
        assert!(dir.path().join("t_grid.csv").exists());
    }
}
