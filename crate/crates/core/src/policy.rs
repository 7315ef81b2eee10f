//! Economic objective and the threshold-policy optimizer.
//!
//! Each candidate threshold is evaluated by one forward run from the
//! no-harvest stationary state: the truncated discounted revenue
//! `J_T = ∫_0^T e^{-rt} ∫ c u x dl dt` (left-endpoint sum over the step
//! sequence), the terminal crowding and population, the replacement index
//! at the terminal crowding, and the 1% convergence times. The sweep
//! evaluates candidates independently (optionally across worker threads,
//! merged deterministically by grid order) and golden-section refinement
//! sharpens the coarse argmax.

use crate::grid::{cfl_timestep, SizeGrid};
use crate::model::ModelParams;
use crate::replacement::replacement_index;
use crate::roots::{golden_section_max, GoldenWarning};
use crate::steady::{discrete_steady_state, ClosureError};
use crate::transport::{
    convergence_time, simulate, PopulationState, ThresholdPolicy, TrajectoryRecord, TransportError,
    CONVERGENCE_TOLERANCE,
};
use rayon::prelude::*;
use thiserror::Error;

/// Bracket width below which the golden-section refinement stops, cm.
pub const REFINE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("initial condition: {0}")]
    InitialCondition(#[from] ClosureError),
    #[error("simulation: {0}")]
    Simulation(#[from] TransportError),
}

/// Everything recorded for one candidate threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvaluation {
    pub l_star: f64,
    /// Truncated discounted revenue over the horizon, $.
    pub j_t: f64,
    pub e_terminal: f64,
    pub n_terminal: f64,
    /// Replacement index at the terminal crowding level.
    pub r_terminal: f64,
    /// `r_terminal >= 1`.
    pub viable: bool,
    pub conv_time_e: Option<f64>,
    pub conv_time_n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCandidate {
    pub l_star: f64,
    pub outcome: Result<PolicyEvaluation, PolicyError>,
}

/// Full sweep table plus the revenue argmax (ties break toward the larger,
/// more protective threshold). `argmax` is `None` when every candidate
/// failed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub candidates: Vec<SweepCandidate>,
    pub argmax: Option<usize>,
}

impl SweepResult {
    pub fn best(&self) -> Option<&PolicyEvaluation> {
        self.argmax
            .and_then(|i| self.candidates[i].outcome.as_ref().ok())
    }
}

/// Why a refined optimum should be read with care.
#[derive(Debug, Clone, PartialEq)]
pub enum RefineWarning {
    /// The coarse argmax sat on the sweep boundary; nothing to bracket.
    AtSweepBoundary,
    /// Interior probes were worse than both bracket ends.
    NotUnimodal,
    /// The objective was flat across all probes; the bracket midpoint is
    /// reported.
    FlatObjective,
    /// A probe failed; the coarse argmax is kept.
    ProbeFailed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinedOptimum {
    pub l_star: f64,
    pub evaluation: PolicyEvaluation,
    pub warning: Option<RefineWarning>,
}

/// Left-endpoint discounted time integral of the harvest value flow.
pub fn discounted_revenue(record: &TrajectoryRecord, params: &ModelParams) -> f64 {
    let mut total = 0.0;
    for k in 0..record.times.len().saturating_sub(1) {
        let dt = record.times[k + 1] - record.times[k];
        total += (-params.r * record.times[k]).exp() * record.harvest_value_rate[k] * dt;
    }
    total
}

/// The default initial condition for policy runs: the no-harvest stationary
/// state of the discrete transport operator.
pub fn default_initial_state(
    params: &ModelParams,
    grid: &SizeGrid,
) -> Result<PopulationState, ClosureError> {
    discrete_steady_state(params, None, grid).map(|(_, state)| state)
}

/// Evaluates one threshold from the default initial condition over
/// `[0, T]`.
pub fn evaluate_threshold(
    l_star: f64,
    params: &ModelParams,
    grid: &SizeGrid,
    cfl_safety: f64,
) -> Result<PolicyEvaluation, PolicyError> {
    let initial = default_initial_state(params, grid)?;
    let dt = cfl_timestep(params, grid, cfl_safety);
    evaluate_threshold_from(&initial, l_star, params, grid, dt)
}

/// Same evaluation with a caller-supplied initial state and step, so sweeps
/// reuse one steady-state solve across candidates.
pub fn evaluate_threshold_from(
    initial: &PopulationState,
    l_star: f64,
    params: &ModelParams,
    grid: &SizeGrid,
    dt: f64,
) -> Result<PolicyEvaluation, PolicyError> {
    let policy = ThresholdPolicy::new(Some(l_star), params.u_max, grid);
    let record = simulate(initial, &policy, params, grid, dt, params.horizon, &[])?;
    let e_terminal = record.terminal_e();
    let n_terminal = record.terminal_n();
    let r_terminal = replacement_index(e_terminal, params, grid);
    Ok(PolicyEvaluation {
        l_star,
        j_t: discounted_revenue(&record, params),
        e_terminal,
        n_terminal,
        r_terminal,
        viable: r_terminal >= 1.0,
        conv_time_e: convergence_time(&record.times, &record.e_series, CONVERGENCE_TOLERANCE),
        conv_time_n: convergence_time(&record.times, &record.n_series, CONVERGENCE_TOLERANCE),
    })
}

/// Candidate grid at 1 cm spacing over the full size range.
pub fn default_sweep_grid(params: &ModelParams) -> Vec<f64> {
    sweep_grid(params.l0, params.lm, 1.0)
}

/// Candidate grid over `[min, max]` with the given spacing, inclusive of
/// both ends.
pub fn sweep_grid(min: f64, max: f64, spacing: f64) -> Vec<f64> {
    assert!(spacing > 0.0 && min <= max);
    let mut grid = Vec::new();
    let mut i = 0usize;
    loop {
        let l = min + spacing * i as f64;
        if l > max + 1e-9 * spacing {
            break;
        }
        grid.push(l.min(max));
        i += 1;
    }
    grid
}

/// Evaluates every candidate threshold. `jobs` controls the worker pool:
/// 1 runs strictly sequentially, 0 uses the default pool size, any other
/// value builds a pool of that many threads. Results are merged in grid
/// order, so the table and argmax never depend on scheduling.
pub fn sweep_thresholds(
    l_grid: &[f64],
    params: &ModelParams,
    grid: &SizeGrid,
    cfl_safety: f64,
    jobs: usize,
) -> Result<SweepResult, PolicyError> {
    assert!(
        l_grid.windows(2).all(|w| w[0] <= w[1]),
        "candidate grid must be sorted"
    );
    let initial = default_initial_state(params, grid)?;
    let dt = cfl_timestep(params, grid, cfl_safety);

    let evaluate = |&l_star: &f64| SweepCandidate {
        l_star,
        outcome: evaluate_threshold_from(&initial, l_star, params, grid, dt),
    };

    let candidates: Vec<SweepCandidate> = if jobs == 1 {
        l_grid.iter().map(evaluate).collect()
    } else {
        let run = || l_grid.par_iter().map(evaluate).collect();
        if jobs == 0 {
            run()
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .expect("worker pool");
            pool.install(run)
        }
    };

    let mut argmax = None;
    let mut best = f64::NEG_INFINITY;
    for (i, candidate) in candidates.iter().enumerate() {
        if let Ok(eval) = &candidate.outcome {
            // >= moves ties to the larger threshold
            if eval.j_t >= best {
                best = eval.j_t;
                argmax = Some(i);
            }
        }
    }
    Ok(SweepResult { candidates, argmax })
}

/// Golden-section refinement of the coarse argmax down to
/// [`REFINE_TOLERANCE`] bracket width. Each probe is a full threshold
/// evaluation; a boundary argmax, a non-unimodal bracket, or a flat
/// objective falls back with an explicit warning.
pub fn refine_optimum(
    sweep: &SweepResult,
    params: &ModelParams,
    grid: &SizeGrid,
    cfl_safety: f64,
) -> Result<RefinedOptimum, PolicyError> {
    let argmax = sweep.argmax.expect("refine requires a successful sweep");
    let coarse = sweep.candidates[argmax]
        .outcome
        .as_ref()
        .expect("argmax points at a successful candidate")
        .clone();

    if argmax == 0 || argmax + 1 == sweep.candidates.len() {
        return Ok(RefinedOptimum {
            l_star: coarse.l_star,
            evaluation: coarse,
            warning: Some(RefineWarning::AtSweepBoundary),
        });
    }
    let lo = sweep.candidates[argmax - 1].l_star;
    let hi = sweep.candidates[argmax + 1].l_star;

    let initial = default_initial_state(params, grid)?;
    let dt = cfl_timestep(params, grid, cfl_safety);
    let mut probe_error: Option<PolicyError> = None;
    let objective = |l: f64| match evaluate_threshold_from(&initial, l, params, grid, dt) {
        Ok(eval) => eval.j_t,
        Err(err) => {
            probe_error.get_or_insert(err);
            f64::NEG_INFINITY
        }
    };
    let result = golden_section_max(objective, lo, hi, REFINE_TOLERANCE);
    if let Some(err) = probe_error {
        return Ok(RefinedOptimum {
            l_star: coarse.l_star,
            evaluation: coarse,
            warning: Some(RefineWarning::ProbeFailed(err.to_string())),
        });
    }
    match result.warning {
        Some(GoldenWarning::NotUnimodal) => Ok(RefinedOptimum {
            l_star: coarse.l_star,
            evaluation: coarse,
            warning: Some(RefineWarning::NotUnimodal),
        }),
        Some(GoldenWarning::Flat) => {
            let evaluation = evaluate_threshold_from(&initial, result.x, params, grid, dt)?;
            Ok(RefinedOptimum {
                l_star: result.x,
                evaluation,
                warning: Some(RefineWarning::FlatObjective),
            })
        }
        None => {
            let evaluation = evaluate_threshold_from(&initial, result.x, params, grid, dt)?;
            // keep whichever of the coarse and refined points actually pays more
            if evaluation.j_t >= coarse.j_t {
                Ok(RefinedOptimum {
                    l_star: result.x,
                    evaluation,
                    warning: None,
                })
            } else {
                Ok(RefinedOptimum {
                    l_star: coarse.l_star,
                    evaluation: coarse,
                    warning: None,
                })
            }
        }
    }
}

/// Splits evaluations by the viability flag: `(viable, non_viable)`.
pub fn viability_filter(
    evaluations: &[PolicyEvaluation],
) -> (Vec<PolicyEvaluation>, Vec<PolicyEvaluation>) {
    evaluations.iter().cloned().partition(|e| e.viable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DEFAULT_CFL_SAFETY;
    use approx::assert_relative_eq;

    fn coarse_grid() -> SizeGrid {
        let p = ModelParams::default();
        SizeGrid::build(p.l0, p.lm, 100).unwrap()
    }

    #[test]
    fn revenue_is_zero_without_harvest() {
        let params = ModelParams::default();
        let grid = coarse_grid();
        let initial = default_initial_state(&params, &grid).unwrap();
        let policy = ThresholdPolicy::none(&grid);
        let dt = cfl_timestep(&params, &grid, DEFAULT_CFL_SAFETY);
        let record = simulate(&initial, &policy, &params, &grid, dt, 5.0, &[]).unwrap();
        assert_eq!(discounted_revenue(&record, &params), 0.0);
    }

    #[test]
    fn revenue_of_constant_flow_matches_discount_integral() {
        let params = ModelParams::default();
        let dt = 0.01;
        let steps = (params.horizon / dt) as usize;
        let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
        let flow = 1234.5;
        let record = TrajectoryRecord {
            times: times.clone(),
            e_series: vec![0.0; times.len()],
            n_series: vec![0.0; times.len()],
            harvest_value_rate: vec![flow; times.len()],
            snapshots: Vec::new(),
        };
        let expected = flow * (1.0 - (-params.r * params.horizon).exp()) / params.r;
        let got = discounted_revenue(&record, &params);
        assert!(
            (got - expected).abs() <= flow * dt,
            "got {got}, expected {expected}"
        );
    }

    #[test]
    fn threshold_at_top_size_harvests_nothing() {
        let params = ModelParams::default();
        let grid = coarse_grid();
        let eval = evaluate_threshold(params.lm, &params, &grid, DEFAULT_CFL_SAFETY).unwrap();
        assert_eq!(eval.j_t, 0.0);
        // terminal state stays at the no-harvest baseline
        let (e0, _) = discrete_steady_state(&params, None, &grid).unwrap();
        assert_relative_eq!(eval.e_terminal, e0, max_relative = 1e-6);
        assert_eq!(eval.conv_time_e, Some(0.0));
    }

    #[test]
    fn reference_threshold_evaluation_matches_reported_state() {
        let params = ModelParams::default();
        let grid = SizeGrid::build(params.l0, params.lm, 400).unwrap();
        let eval = evaluate_threshold(66.45, &params, &grid, DEFAULT_CFL_SAFETY).unwrap();
        assert_relative_eq!(eval.e_terminal, 45967.96, max_relative = 1e-2);
        assert_relative_eq!(eval.n_terminal, 163572.21, max_relative = 1e-2);
        assert_relative_eq!(eval.r_terminal, 1.977621, max_relative = 1e-2);
        assert_relative_eq!(eval.j_t, 1.9698e6, max_relative = 2e-2);
        assert!(eval.viable);
    }

    #[test]
    fn three_point_sweep_picks_the_middle_threshold() {
        let params = ModelParams::default();
        let grid = coarse_grid();
        let sweep =
            sweep_thresholds(&[40.0, 60.0, 80.0], &params, &grid, DEFAULT_CFL_SAFETY, 1).unwrap();
        let best = sweep.best().unwrap();
        assert_eq!(best.l_star, 60.0);
    }

    #[test]
    fn single_point_sweep_is_its_own_argmax() {
        let params = ModelParams::default();
        let grid = coarse_grid();
        let sweep = sweep_thresholds(&[70.0], &params, &grid, DEFAULT_CFL_SAFETY, 1).unwrap();
        assert_eq!(sweep.argmax, Some(0));
    }

    #[test]
    fn parallel_and_serial_sweeps_agree_exactly() {
        let params = ModelParams::default();
        let grid = coarse_grid();
        let candidates = sweep_grid(50.0, 80.0, 5.0);
        let serial = sweep_thresholds(&candidates, &params, &grid, DEFAULT_CFL_SAFETY, 1).unwrap();
        let parallel =
            sweep_thresholds(&candidates, &params, &grid, DEFAULT_CFL_SAFETY, 4).unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn terminal_population_nondecreasing_in_threshold() {
        let params = ModelParams::default();
        let grid = coarse_grid();
        let candidates = sweep_grid(30.0, 120.0, 10.0);
        let sweep = sweep_thresholds(&candidates, &params, &grid, DEFAULT_CFL_SAFETY, 0).unwrap();
        let mut previous = 0.0;
        for candidate in &sweep.candidates {
            let eval = candidate.outcome.as_ref().unwrap();
            assert!(
                eval.n_terminal >= previous,
                "N_T dropped at l* = {}",
                candidate.l_star
            );
            previous = eval.n_terminal;
        }
    }

    #[test]
    fn sweep_ties_break_toward_larger_threshold() {
        let params = ModelParams::default();
        let grid = coarse_grid();
        // both candidates above lm harvest nothing: identical zero revenue
        let sweep =
            sweep_thresholds(&[129.8, 129.9], &params, &grid, DEFAULT_CFL_SAFETY, 1).unwrap();
        assert_eq!(sweep.argmax, Some(1));
    }

    #[test]
    fn sweep_grid_covers_inclusive_range() {
        let g = sweep_grid(40.0, 90.0, 0.25);
        assert_eq!(g.len(), 201);
        assert_eq!(g[0], 40.0);
        assert_eq!(*g.last().unwrap(), 90.0);
    }

    #[test]
    fn viability_filter_partitions() {
        let make = |l_star: f64, r: f64| PolicyEvaluation {
            l_star,
            j_t: 0.0,
            e_terminal: 0.0,
            n_terminal: 0.0,
            r_terminal: r,
            viable: r >= 1.0,
            conv_time_e: None,
            conv_time_n: None,
        };
        let evals = vec![make(40.0, 1.5), make(50.0, 0.9), make(60.0, 1.0)];
        let (viable, non_viable) = viability_filter(&evals);
        assert_eq!(viable.len(), 2);
        assert_eq!(non_viable.len(), 1);
        assert_eq!(non_viable[0].l_star, 50.0);

        let (v, nv) = viability_filter(&[]);
        assert!(v.is_empty() && nv.is_empty());
    }

    #[test]
    fn boundary_argmax_skips_refinement_with_warning() {
        let params = ModelParams::default();
        let grid = coarse_grid();
        let candidates = sweep_grid(100.0, 130.0, 10.0);
        let sweep = sweep_thresholds(&candidates, &params, &grid, DEFAULT_CFL_SAFETY, 1).unwrap();
        let best = sweep.best().unwrap();
        assert_eq!(best.l_star, 100.0, "revenue declines over [100, 130]");
        let refined = refine_optimum(&sweep, &params, &grid, DEFAULT_CFL_SAFETY).unwrap();
        assert_eq!(refined.warning, Some(RefineWarning::AtSweepBoundary));
        assert_eq!(refined.l_star, 100.0);
    }

    #[test]
    fn adjacent_candidates_have_comparable_revenue() {
        let params = ModelParams::default();
        let grid = coarse_grid();
        let candidates = sweep_grid(55.0, 75.0, 1.0);
        let sweep = sweep_thresholds(&candidates, &params, &grid, DEFAULT_CFL_SAFETY, 0).unwrap();
        let revenues: Vec<f64> = sweep
            .candidates
            .iter()
            .map(|c| c.outcome.as_ref().unwrap().j_t)
            .collect();
        for pair in revenues.windows(2) {
            let rel = (pair[1] - pair[0]).abs() / pair[0];
            assert!(rel < 0.05, "revenue jumped by {rel} between neighbors");
        }
    }
}
