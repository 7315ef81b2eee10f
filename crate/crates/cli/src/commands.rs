//! Scenario orchestration: each subcommand computes its results first and
//! then emits every artifact through the deterministic writers in
//! [`crate::output`].

use crate::config::{InitialCondition, RunConfig};
use crate::output::{config_hash, opt_json, write_csv, write_json, Field};
use serde_json::{json, Value};
use std::path::PathBuf;
use structured_harvest::adjoint::{self, SwitchingOutcome};
use structured_harvest::grid::cfl_timestep;
use structured_harvest::policy::{self, PolicyEvaluation, RefineWarning, SweepResult};
use structured_harvest::replacement::{self, ViabilityError};
use structured_harvest::steady::{self, SteadySolution};
use structured_harvest::transport::{self, PopulationState, ThresholdPolicy, TrajectoryRecord};
use structured_harvest::{ModelParams, SizeGrid};

/// Failure classes mapped to distinct exit codes by `main`.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or inputs (exit 2).
    Validation(String),
    /// Bracket or stability failure inside a solver (exit 3).
    Numerical(String),
    /// Some report stages failed but the manifest was written (exit 4).
    Partial(usize),
    /// Filesystem trouble (exit 1).
    Io(String),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Validation(m) => write!(f, "validation failure: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
            Failure::Partial(n) => write!(f, "partial report: {n} stage(s) failed"),
            Failure::Io(m) => write!(f, "io failure: {m}"),
        }
    }
}

/// Resolved run context shared by every subcommand.
pub struct Context {
    pub config: RunConfig,
    pub grid: SizeGrid,
    pub jobs: usize,
    pub hash: String,
}

impl Context {
    /// Validates the configuration, builds the mesh, fingerprints the
    /// resolved config, and creates the output directory.
    pub fn prepare(config: RunConfig, jobs: usize) -> Result<Self, Failure> {
        let validation = config.params.validate();
        for warning in validation.warnings() {
            eprintln!("warning: {} ({})", warning.message, warning.field);
        }
        if !validation.is_valid() {
            let messages: Vec<String> = validation
                .errors()
                .map(|v| format!("{} ({})", v.message, v.field))
                .collect();
            return Err(Failure::Validation(messages.join("; ")));
        }
        let grid = SizeGrid::build(config.params.l0, config.params.lm, config.n_cells)
            .map_err(|e| Failure::Validation(e.to_string()))?;
        if !(config.cfl_safety > 0.0 && config.cfl_safety <= 1.0) {
            return Err(Failure::Validation(format!(
                "cfl_safety must lie in (0, 1], got {}",
                config.cfl_safety
            )));
        }
        std::fs::create_dir_all(&config.output_dir)?;
        // fingerprint only what affects the numbers, not where they land
        let mut numeric = config.clone();
        numeric.output_dir = PathBuf::new();
        let hash = config_hash(&numeric);
        Ok(Context {
            grid,
            jobs,
            hash,
            config,
        })
    }

    fn params(&self) -> &ModelParams {
        &self.config.params
    }

    fn path(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    fn base_json(&self) -> Value {
        json!({
            "config_hash": self.hash,
            "n_cells": self.config.n_cells,
        })
    }

    fn initial_state(&self) -> Result<PopulationState, Failure> {
        match &self.config.initial_condition {
            InitialCondition::NoHarvestSteady => {
                let (_, state) = steady::discrete_steady_state(self.params(), None, &self.grid)
                    .map_err(|e| Failure::Numerical(e.to_string()))?;
                Ok(state)
            }
            InitialCondition::Zero => Ok(PopulationState::zero(&self.grid)),
            InitialCondition::CustomFile(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Failure::Validation(format!(
                        "cannot read initial state {}: {e}",
                        path.display()
                    ))
                })?;
                let mut density = Vec::new();
                for (idx, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || (idx == 0 && line.starts_with('l')) {
                        continue;
                    }
                    let value = line.split(',').nth(1).ok_or_else(|| {
                        Failure::Validation(format!(
                            "line {} of {} is not `l,x`",
                            idx + 1,
                            path.display()
                        ))
                    })?;
                    let x: f64 = value.trim().parse().map_err(|e| {
                        Failure::Validation(format!("bad density on line {}: {e}", idx + 1))
                    })?;
                    density.push(x);
                }
                if density.len() != self.grid.n_cells() {
                    return Err(Failure::Validation(format!(
                        "initial state has {} cells, the grid needs {}",
                        density.len(),
                        self.grid.n_cells()
                    )));
                }
                if density.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                    return Err(Failure::Validation(
                        "initial densities must be finite and non-negative".into(),
                    ));
                }
                Ok(PopulationState::new(0.0, density))
            }
        }
    }
}

fn numerical<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Numerical(e.to_string())
}

fn node_profile_rows(grid: &SizeGrid, profile: &[f64]) -> Vec<Vec<Field>> {
    grid.nodes()
        .iter()
        .zip(profile)
        .map(|(&l, &x)| vec![Field::F(l), Field::F(x)])
        .collect()
}

fn solve_no_harvest(ctx: &Context) -> Result<(SteadySolution, f64), Failure> {
    let solution =
        steady::solve_steady_crowding(ctx.params(), None, &ctx.grid).map_err(numerical)?;
    let r_star = replacement::replacement_index(solution.e_star, ctx.params(), &ctx.grid);
    Ok((solution, r_star))
}

/// `steady`: closure solve, stationary profile, closure-curve diagnostic.
pub fn run_steady(ctx: &Context) -> Result<(), Failure> {
    let (solution, r_star) = solve_no_harvest(ctx)?;

    write_csv(
        &ctx.path("steady_profile.csv"),
        "l,x",
        &node_profile_rows(&ctx.grid, &solution.profile.profile),
    )?;

    let upper = steady::closure_bracket_upper(ctx.params(), ctx.params().p, &ctx.grid);
    let mut samples: Vec<f64> = (0..50).map(|i| upper * i as f64 / 49.0).collect();
    samples.push(solution.e_star);
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let curve: Vec<Vec<Field>> = samples
        .iter()
        .map(|&e| {
            let f = steady::closure_residual(e, ctx.params(), None, &ctx.grid)
                .expect("even cell count validated at startup");
            vec![Field::F(e), Field::F(f)]
        })
        .collect();
    write_csv(&ctx.path("closure_curve.csv"), "E,F", &curve)?;

    let mut summary = ctx.base_json();
    summary["E_star"] = solution.e_star.into();
    summary["N_star"] = solution.profile.n.into();
    summary["R_at_E_star"] = r_star.into();
    if ctx.params().p == 0.0 {
        summary["warnings"] = json!(["zero inflow: stationary profile is empty"]);
    }
    write_json(&ctx.path("steady_summary.json"), &summary)?;

    println!(
        "steady: E* = {:.2}, N* = {:.2}, R(E*) = {:.6}",
        solution.e_star, solution.profile.n, r_star
    );
    Ok(())
}

/// `replacement`: R(E) curve with stationary/critical markers.
pub fn run_replacement(ctx: &Context) -> Result<(), Failure> {
    let (solution, r_star) = solve_no_harvest(ctx)?;
    let e_crit = match replacement::critical_crowding(ctx.params(), &ctx.grid, None) {
        Ok(v) => Some(v),
        Err(ViabilityError::NeverViable { .. }) | Err(ViabilityError::NoCrossingInRange { .. }) => {
            None
        }
    };

    let spec = ctx.config.replacement;
    let e_max = spec.e_max.or(e_crit.map(|e| 2.0 * e)).unwrap_or_else(|| {
        if solution.e_star > 0.0 {
            2.0 * solution.e_star
        } else {
            steady::closure_bracket_upper(ctx.params(), ctx.params().p.max(1.0), &ctx.grid) * 0.05
        }
    });
    let samples = spec.samples.max(2);
    let mut points: Vec<f64> = (0..samples)
        .map(|i| e_max * i as f64 / (samples - 1) as f64)
        .collect();
    points.push(solution.e_star);
    if let Some(e) = e_crit {
        if e <= e_max {
            points.push(e);
        }
    }
    points.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    points.dedup();
    let rows: Vec<Vec<Field>> = points
        .iter()
        .map(|&e| {
            vec![
                Field::F(e),
                Field::F(replacement::replacement_index(e, ctx.params(), &ctx.grid)),
            ]
        })
        .collect();
    write_csv(&ctx.path("replacement_curve.csv"), "E,R", &rows)?;

    let mut summary = ctx.base_json();
    summary["E_crit"] = opt_json(e_crit);
    summary["E_star"] = solution.e_star.into();
    summary["R_at_E_star"] = r_star.into();
    write_json(&ctx.path("replacement_summary.json"), &summary)?;

    match e_crit {
        Some(e) => println!("replacement: E_crit = {e:.2}"),
        None => println!("replacement: no critical crowding level in range"),
    }
    Ok(())
}

struct SimulationArtifacts {
    record: TrajectoryRecord,
    summary: Value,
}

fn simulate_policy(
    ctx: &Context,
    l_star: Option<f64>,
    horizon: f64,
) -> Result<SimulationArtifacts, Failure> {
    let params = ctx.params();
    let initial = ctx.initial_state()?;
    let policy = match l_star {
        Some(t) => ThresholdPolicy::new(Some(t), params.u_max, &ctx.grid),
        None => ThresholdPolicy::none(&ctx.grid),
    };
    let dt = cfl_timestep(params, &ctx.grid, ctx.config.cfl_safety);
    let record = transport::simulate(&initial, &policy, params, &ctx.grid, dt, horizon, &[])
        .map_err(numerical)?;

    let conv_e = transport::convergence_time(
        &record.times,
        &record.e_series,
        transport::CONVERGENCE_TOLERANCE,
    );
    let conv_n = transport::convergence_time(
        &record.times,
        &record.n_series,
        transport::CONVERGENCE_TOLERANCE,
    );
    let mut summary = ctx.base_json();
    summary["l_star"] = opt_json(l_star);
    summary["effective_threshold"] = opt_json(policy.effective_threshold());
    summary["E_terminal"] = record.terminal_e().into();
    summary["N_terminal"] = record.terminal_n().into();
    summary["conv_time_E"] = opt_json(conv_e);
    summary["conv_time_N"] = opt_json(conv_n);
    Ok(SimulationArtifacts { record, summary })
}

fn write_trajectory(
    ctx: &Context,
    artifacts: &SimulationArtifacts,
    csv_name: &str,
    json_name: &str,
    terminal_name: Option<&str>,
) -> Result<(), Failure> {
    let record = &artifacts.record;
    let rows: Vec<Vec<Field>> = (0..record.times.len())
        .map(|k| {
            vec![
                Field::F(record.times[k]),
                Field::F(record.e_series[k]),
                Field::F(record.n_series[k]),
                Field::F(record.harvest_value_rate[k]),
            ]
        })
        .collect();
    write_csv(&ctx.path(csv_name), "t,E,N,harvest_value_rate", &rows)?;
    write_json(&ctx.path(json_name), &artifacts.summary)?;
    if let Some(name) = terminal_name {
        let terminal = &record
            .snapshots
            .last()
            .expect("terminal snapshot requested")
            .1;
        let rows: Vec<Vec<Field>> = ctx
            .grid
            .centers()
            .iter()
            .zip(terminal)
            .map(|(&l, &x)| vec![Field::F(l), Field::F(x)])
            .collect();
        write_csv(&ctx.path(name), "l,x", &rows)?;
    }
    Ok(())
}

/// `simulate`: one forward run under an optional threshold policy.
pub fn run_simulate(ctx: &Context, l_star: Option<f64>, horizon: f64) -> Result<(), Failure> {
    let params = ctx.params();
    let initial = ctx.initial_state()?;
    let policy = match l_star {
        Some(t) => ThresholdPolicy::new(Some(t), params.u_max, &ctx.grid),
        None => ThresholdPolicy::none(&ctx.grid),
    };
    let dt = cfl_timestep(params, &ctx.grid, ctx.config.cfl_safety);
    let record = transport::simulate(
        &initial,
        &policy,
        params,
        &ctx.grid,
        dt,
        horizon,
        &[horizon],
    )
    .map_err(numerical)?;
    let conv_e = transport::convergence_time(
        &record.times,
        &record.e_series,
        transport::CONVERGENCE_TOLERANCE,
    );
    let conv_n = transport::convergence_time(
        &record.times,
        &record.n_series,
        transport::CONVERGENCE_TOLERANCE,
    );
    let mut summary = ctx.base_json();
    summary["l_star"] = opt_json(l_star);
    summary["effective_threshold"] = opt_json(policy.effective_threshold());
    summary["E_terminal"] = record.terminal_e().into();
    summary["N_terminal"] = record.terminal_n().into();
    summary["conv_time_E"] = opt_json(conv_e);
    summary["conv_time_N"] = opt_json(conv_n);

    let artifacts = SimulationArtifacts { record, summary };
    write_trajectory(
        ctx,
        &artifacts,
        "trajectory.csv",
        "simulate_summary.json",
        Some("snapshot_terminal.csv"),
    )?;
    println!(
        "simulate: terminal E = {:.2}, N = {:.2} over {horizon} yr",
        artifacts.record.terminal_e(),
        artifacts.record.terminal_n()
    );
    Ok(())
}

fn sweep_candidates(ctx: &Context) -> Vec<f64> {
    let spec = ctx.config.sweep;
    let min = spec.min.unwrap_or(ctx.params().l0);
    let max = spec.max.unwrap_or(ctx.params().lm);
    policy::sweep_grid(min, max, spec.spacing)
}

fn sweep_rows(sweep: &SweepResult) -> Vec<Vec<Field>> {
    sweep
        .candidates
        .iter()
        .map(|candidate| match &candidate.outcome {
            Ok(eval) => vec![
                Field::F(eval.l_star),
                Field::F(eval.j_t),
                Field::F(eval.e_terminal),
                Field::F(eval.n_terminal),
                Field::F(eval.r_terminal),
                Field::B(eval.viable),
                Field::OptF(eval.conv_time_e),
                Field::OptF(eval.conv_time_n),
            ],
            Err(_) => vec![
                Field::F(candidate.l_star),
                Field::OptF(None),
                Field::OptF(None),
                Field::OptF(None),
                Field::OptF(None),
                Field::S(String::new()),
                Field::OptF(None),
                Field::OptF(None),
            ],
        })
        .collect()
}

fn refine_warning_json(warning: &Option<RefineWarning>) -> Value {
    match warning {
        None => Value::Null,
        Some(RefineWarning::AtSweepBoundary) => "optimum at sweep boundary".into(),
        Some(RefineWarning::NotUnimodal) => "bracket not unimodal, coarse argmax kept".into(),
        Some(RefineWarning::FlatObjective) => "flat objective, bracket midpoint reported".into(),
        Some(RefineWarning::ProbeFailed(m)) => format!("refinement probe failed: {m}").into(),
    }
}

fn optimum_json(
    ctx: &Context,
    sweep: &SweepResult,
    refined_l: f64,
    eval: &PolicyEvaluation,
    warning: &Option<RefineWarning>,
) -> Value {
    let failures: Vec<Value> = sweep
        .candidates
        .iter()
        .filter_map(|c| {
            c.outcome
                .as_ref()
                .err()
                .map(|e| json!({"l_star": c.l_star, "error": e.to_string()}))
        })
        .collect();
    let viable_count = sweep
        .candidates
        .iter()
        .filter(|c| c.outcome.as_ref().map(|e| e.viable).unwrap_or(false))
        .count();
    let mut value = ctx.base_json();
    value["l_star_opt"] = refined_l.into();
    value["J_T_opt"] = eval.j_t.into();
    value["R"] = eval.r_terminal.into();
    value["E"] = eval.e_terminal.into();
    value["N"] = eval.n_terminal.into();
    value["viable"] = eval.viable.into();
    value["refine_warning"] = refine_warning_json(warning);
    value["candidates"] = (sweep.candidates.len() as u64).into();
    value["viable_candidates"] = (viable_count as u64).into();
    value["failures"] = Value::Array(failures);
    value
}

struct SweepArtifacts {
    sweep: SweepResult,
    refined_l: f64,
    evaluation: PolicyEvaluation,
    warning: Option<RefineWarning>,
}

fn sweep_and_refine(ctx: &Context) -> Result<SweepArtifacts, Failure> {
    let candidates = sweep_candidates(ctx);
    let sweep = policy::sweep_thresholds(
        &candidates,
        ctx.params(),
        &ctx.grid,
        ctx.config.cfl_safety,
        ctx.jobs,
    )
    .map_err(numerical)?;
    if sweep.argmax.is_none() {
        return Err(Failure::Numerical(
            "every sweep candidate failed; see the per-candidate errors".into(),
        ));
    }
    let refined = policy::refine_optimum(&sweep, ctx.params(), &ctx.grid, ctx.config.cfl_safety)
        .map_err(numerical)?;
    Ok(SweepArtifacts {
        sweep,
        refined_l: refined.l_star,
        evaluation: refined.evaluation,
        warning: refined.warning,
    })
}

/// `sweep`: evaluate the candidate grid, refine the optimum, emit the table.
pub fn run_sweep(ctx: &Context) -> Result<(), Failure> {
    let artifacts = sweep_and_refine(ctx)?;
    write_csv(
        &ctx.path("sweep.csv"),
        "l_star,J_T,E_terminal,N_terminal,R_terminal,viable,conv_time_E,conv_time_N",
        &sweep_rows(&artifacts.sweep),
    )?;
    write_json(
        &ctx.path("optimum.json"),
        &optimum_json(
            ctx,
            &artifacts.sweep,
            artifacts.refined_l,
            &artifacts.evaluation,
            &artifacts.warning,
        ),
    )?;
    println!(
        "sweep: optimum l* = {:.2} with J_T = {:.4e}{}",
        artifacts.refined_l,
        artifacts.evaluation.j_t,
        match &artifacts.warning {
            Some(w) => format!(" (warning: {:?})", w),
            None => String::new(),
        }
    );
    Ok(())
}

struct AdjointArtifacts {
    analysis: adjoint::SwitchingAnalysis,
    summary: Value,
}

fn adjoint_analysis(ctx: &Context, l_star: f64) -> Result<AdjointArtifacts, Failure> {
    let policy = ThresholdPolicy::new(Some(l_star), ctx.params().u_max, &ctx.grid);
    let analysis = adjoint::analyze_policy(&policy, ctx.params(), &ctx.grid).map_err(numerical)?;
    let (case, adjoint_l_star) = match &analysis.outcome {
        SwitchingOutcome::AllProtect => ("all-protect", None),
        SwitchingOutcome::AllHarvest => ("all-harvest", None),
        SwitchingOutcome::Threshold { l_star } => ("threshold", Some(*l_star)),
        SwitchingOutcome::NonMonotone { .. } => ("non-monotone switching", None),
    };
    let mut summary = ctx.base_json();
    summary["l_star"] = l_star.into();
    summary["E"] = analysis.e.into();
    summary["case"] = case.into();
    summary["adjoint_l_star"] = opt_json(adjoint_l_star);
    summary["weak_coupling_ratio"] = opt_json(analysis.weak_coupling_ratio);
    summary["monotone_S"] = analysis.monotone.into();
    if let SwitchingOutcome::NonMonotone { crossings } = &analysis.outcome {
        summary["crossings"] = json!(crossings);
    }
    Ok(AdjointArtifacts { analysis, summary })
}

fn write_adjoint(ctx: &Context, artifacts: &AdjointArtifacts) -> Result<(), Failure> {
    let rows: Vec<Vec<Field>> = ctx
        .grid
        .nodes()
        .iter()
        .zip(&artifacts.analysis.adjoint.lambda)
        .zip(&artifacts.analysis.switching)
        .map(|((&l, &lam), &s)| vec![Field::F(l), Field::F(lam), Field::F(s)])
        .collect();
    write_csv(&ctx.path("adjoint.csv"), "l,lambda,S", &rows)?;
    write_json(&ctx.path("switching.json"), &artifacts.summary)?;
    Ok(())
}

/// `adjoint`: stationary shadow value and switching diagnostics at one
/// threshold.
pub fn run_adjoint(ctx: &Context, l_star: f64) -> Result<(), Failure> {
    let artifacts = adjoint_analysis(ctx, l_star)?;
    write_adjoint(ctx, &artifacts)?;
    println!(
        "adjoint: case {}, weak-coupling ratio {}",
        artifacts.summary["case"], artifacts.summary["weak_coupling_ratio"]
    );
    Ok(())
}

/// `report`: the full reproduction bundle. Stage failures are recorded in
/// the manifest and the run continues.
pub fn run_report(ctx: &Context) -> Result<(), Failure> {
    let mut outputs: Vec<(String, String)> = Vec::new();
    let mut failures: Vec<(String, String)> = Vec::new();
    let mut summary = serde_json::Map::new();

    // no-harvest steady state
    match solve_no_harvest(ctx) {
        Ok((solution, r_star)) => {
            let result: Result<(), Failure> = (|| {
                write_csv(
                    &ctx.path("steady_profile.csv"),
                    "l,x",
                    &node_profile_rows(&ctx.grid, &solution.profile.profile),
                )?;
                write_csv(
                    &ctx.path("profile_no_harvest.csv"),
                    "l,x",
                    &node_profile_rows(&ctx.grid, &solution.profile.profile),
                )?;
                Ok(())
            })();
            match result {
                Ok(()) => {
                    outputs.push((
                        "steady_profile.csv".into(),
                        "no-harvest stationary density profile".into(),
                    ));
                    outputs.push((
                        "profile_no_harvest.csv".into(),
                        "baseline profile for the policy comparison".into(),
                    ));
                    summary.insert("E_star".into(), solution.e_star.into());
                    summary.insert("N_star".into(), solution.profile.n.into());
                    summary.insert("R_at_E_star".into(), r_star.into());
                }
                Err(e) => failures.push(("steady profile output".into(), e.to_string())),
            }
        }
        Err(e) => failures.push(("no-harvest closure".into(), e.to_string())),
    }

    // replacement curve and critical level
    match replacement::critical_crowding(ctx.params(), &ctx.grid, None) {
        Ok(e_crit) => {
            summary.insert("E_crit".into(), e_crit.into());
            let rows: Vec<Vec<Field>> = (0..101)
                .map(|i| {
                    let e = 2.0 * e_crit * i as f64 / 100.0;
                    vec![
                        Field::F(e),
                        Field::F(replacement::replacement_index(e, ctx.params(), &ctx.grid)),
                    ]
                })
                .collect();
            match write_csv(&ctx.path("replacement_curve.csv"), "E,R", &rows) {
                Ok(()) => outputs.push((
                    "replacement_curve.csv".into(),
                    "replacement index over crowding".into(),
                )),
                Err(e) => failures.push(("replacement curve output".into(), e.to_string())),
            }
        }
        Err(e) => failures.push(("critical crowding".into(), e.to_string())),
    }

    // representative threshold trajectories
    let mut table = Vec::new();
    for l_star in [40.0f64, 60.0, 80.0] {
        let label = format!("l{l_star:.0}");
        match simulate_policy(ctx, Some(l_star), ctx.params().horizon) {
            Ok(artifacts) => {
                let csv = format!("trajectory_{label}.csv");
                let jsn = format!("simulate_summary_{label}.json");
                match write_trajectory(ctx, &artifacts, &csv, &jsn, None) {
                    Ok(()) => {
                        outputs.push((csv, format!("trajectory under the {l_star} cm threshold")));
                        outputs.push((jsn, "terminal state and 1% convergence times".into()));
                        table.push(json!({
                            "l_star": l_star,
                            "E_terminal": artifacts.record.terminal_e(),
                            "N_terminal": artifacts.record.terminal_n(),
                            "conv_time_E": artifacts.summary["conv_time_E"],
                            "conv_time_N": artifacts.summary["conv_time_N"],
                        }));
                    }
                    Err(e) => failures.push((format!("trajectory {l_star}"), e.to_string())),
                }
            }
            Err(e) => failures.push((format!("trajectory {l_star}"), e.to_string())),
        }
    }
    summary.insert("thresholds".into(), Value::Array(table));

    // sweep, refinement, adjoint at the optimum, optimal profile
    match sweep_and_refine(ctx) {
        Ok(artifacts) => {
            let result: Result<(), Failure> = (|| {
                write_csv(
                    &ctx.path("sweep.csv"),
                    "l_star,J_T,E_terminal,N_terminal,R_terminal,viable,conv_time_E,conv_time_N",
                    &sweep_rows(&artifacts.sweep),
                )?;
                write_json(
                    &ctx.path("optimum.json"),
                    &optimum_json(
                        ctx,
                        &artifacts.sweep,
                        artifacts.refined_l,
                        &artifacts.evaluation,
                        &artifacts.warning,
                    ),
                )?;
                Ok(())
            })();
            match result {
                Ok(()) => {
                    outputs.push(("sweep.csv".into(), "threshold sweep table".into()));
                    outputs.push((
                        "optimum.json".into(),
                        "refined revenue-optimal threshold".into(),
                    ));
                    summary.insert("l_star_opt".into(), artifacts.refined_l.into());
                    summary.insert("J_T_opt".into(), artifacts.evaluation.j_t.into());
                    summary.insert("R_at_opt".into(), artifacts.evaluation.r_terminal.into());
                    summary.insert("E_at_opt".into(), artifacts.evaluation.e_terminal.into());
                    summary.insert("N_at_opt".into(), artifacts.evaluation.n_terminal.into());
                    summary.insert("optimum_viable".into(), artifacts.evaluation.viable.into());
                }
                Err(e) => failures.push(("sweep output".into(), e.to_string())),
            }

            match adjoint_analysis(ctx, artifacts.refined_l) {
                Ok(adjoint_artifacts) => match write_adjoint(ctx, &adjoint_artifacts) {
                    Ok(()) => {
                        outputs.push((
                            "adjoint.csv".into(),
                            "shadow value and switching function at the optimum".into(),
                        ));
                        outputs.push((
                            "switching.json".into(),
                            "switching classification and weak-coupling diagnostic".into(),
                        ));
                        summary.insert(
                            "adjoint_l_star".into(),
                            adjoint_artifacts.summary["adjoint_l_star"].clone(),
                        );
                        summary.insert(
                            "weak_coupling_ratio".into(),
                            adjoint_artifacts.summary["weak_coupling_ratio"].clone(),
                        );
                    }
                    Err(e) => failures.push(("adjoint output".into(), e.to_string())),
                },
                Err(e) => failures.push(("adjoint at optimum".into(), e.to_string())),
            }

            let policy =
                ThresholdPolicy::new(Some(artifacts.refined_l), ctx.params().u_max, &ctx.grid);
            match steady::solve_steady_crowding(ctx.params(), Some(&policy), &ctx.grid) {
                Ok(solution) => match write_csv(
                    &ctx.path("profile_optimal.csv"),
                    "l,x",
                    &node_profile_rows(&ctx.grid, &solution.profile.profile),
                ) {
                    Ok(()) => outputs.push((
                        "profile_optimal.csv".into(),
                        "stationary profile under the optimal threshold".into(),
                    )),
                    Err(e) => failures.push(("optimal profile output".into(), e.to_string())),
                },
                Err(e) => failures.push(("optimal-threshold closure".into(), e.to_string())),
            }
        }
        Err(e) => failures.push(("threshold sweep".into(), e.to_string())),
    }

    let manifest = json!({
        "config_hash": ctx.hash,
        "n_cells": ctx.config.n_cells,
        "outputs": outputs
            .iter()
            .map(|(path, description)| json!({"path": path, "description": description}))
            .collect::<Vec<_>>(),
        "summary": Value::Object(summary),
        "failures": failures
            .iter()
            .map(|(stage, error)| json!({"stage": stage, "error": error}))
            .collect::<Vec<_>>(),
    });
    write_json(&ctx.path("manifest.json"), &manifest)?;

    println!(
        "report: {} outputs, {} failed stage(s), manifest at {}",
        outputs.len(),
        failures.len(),
        ctx.path("manifest.json").display()
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Partial(failures.len()))
    }
}
