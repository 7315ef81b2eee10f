//! Forward-in-time solver for the nonlocal transport equation.
//!
//! First-order upwind finite volumes on cell averages. Growth is positive,
//! so transport is rightward and the upwind flux through the interface at
//! `edges[i+1]` is `g(E, edges[i+1]) * x[i]`. The recruitment inflow enters
//! as an exact flux `p` through the left boundary, which makes the discrete
//! mass balance hold to machine precision; individuals reaching `lm` leave
//! through a free upwind outflux. The crowding index is evaluated once per
//! step from the pre-step state and the coefficients are frozen over the
//! step.

use crate::grid::{integrate_cells, SizeGrid};
use crate::model::{Coefficients, ModelParams};
use thiserror::Error;

/// Relative band used for the 1% convergence-time criterion.
pub const CONVERGENCE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error(
        "CFL violation in cell {cell}: update coefficient {coefficient:.3e} < 0 \
         (dt = {dt:.6e}, local growth {growth:.4} plus removal {removal:.4})"
    )]
    CflViolation {
        cell: usize,
        coefficient: f64,
        dt: f64,
        growth: f64,
        removal: f64,
    },
    #[error("state has {got} cells but the grid has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("horizon must be positive, got {0}")]
    BadHorizon(f64),
}

/// Cell-averaged population density at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    pub time: f64,
    pub density: Vec<f64>,
}

impl PopulationState {
    pub fn new(time: f64, density: Vec<f64>) -> Self {
        PopulationState { time, density }
    }

    pub fn zero(grid: &SizeGrid) -> Self {
        PopulationState {
            time: 0.0,
            density: vec![0.0; grid.n_cells()],
        }
    }
}

/// Minimum-harvest-size rule realized as a per-cell mortality vector:
/// a cell is harvested at `u_max` exactly when its center exceeds the
/// threshold. The effective threshold is the left edge of the first
/// harvested cell, i.e. the mesh edge nearest to the requested one.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdPolicy {
    l_star: Option<f64>,
    u_max: f64,
    realized: Vec<f64>,
    effective: Option<f64>,
}

impl ThresholdPolicy {
    pub fn new(l_star: Option<f64>, u_max: f64, grid: &SizeGrid) -> Self {
        let realized: Vec<f64> = match l_star {
            None => vec![0.0; grid.n_cells()],
            Some(t) => grid
                .centers()
                .iter()
                .map(|&c| if c > t { u_max } else { 0.0 })
                .collect(),
        };
        let effective = realized
            .iter()
            .position(|&u| u > 0.0)
            .map(|i| grid.edges()[i]);
        ThresholdPolicy {
            l_star,
            u_max,
            realized,
            effective,
        }
    }

    /// Policy with no harvesting anywhere.
    pub fn none(grid: &SizeGrid) -> Self {
        Self::new(None, 0.0, grid)
    }

    pub fn l_star(&self) -> Option<f64> {
        self.l_star
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    /// Per-cell harvest mortality, aligned with the grid cells.
    pub fn realized(&self) -> &[f64] {
        &self.realized
    }

    /// Left edge of the first harvested cell; `None` when nothing is
    /// harvested.
    pub fn effective_threshold(&self) -> Option<f64> {
        self.effective
    }

    /// Harvest intensity of the exact step rule at an arbitrary length.
    pub fn intensity_at(&self, l: f64) -> f64 {
        match self.l_star {
            Some(t) if l > t => self.u_max,
            _ => 0.0,
        }
    }
}

/// Time series from a forward run, sampled at every accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub e_series: Vec<f64>,
    pub n_series: Vec<f64>,
    /// Instantaneous harvest value flow `∫ c(l) u(l) x(t, l) dl`, $/yr.
    pub harvest_value_rate: Vec<f64>,
    /// Requested density snapshots as `(time, cell averages)` pairs.
    pub snapshots: Vec<(f64, Vec<f64>)>,
}

impl TrajectoryRecord {
    pub fn terminal_e(&self) -> f64 {
        *self.e_series.last().expect("non-empty record")
    }

    pub fn terminal_n(&self) -> f64 {
        *self.n_series.last().expect("non-empty record")
    }
}

/// Crowding index `E = ∫ chi(l) x(l) dl` from cell averages.
pub fn crowding_index(state: &PopulationState, grid: &SizeGrid, params: &ModelParams) -> f64 {
    crowding_index_with(&state.density, grid, params)
}

pub fn crowding_index_with<C: Coefficients>(density: &[f64], grid: &SizeGrid, coeffs: &C) -> f64 {
    debug_assert_eq!(density.len(), grid.n_cells());
    let dl = grid.dl();
    density
        .iter()
        .zip(grid.centers())
        .map(|(&x, &c)| coeffs.kernel(c) * x)
        .sum::<f64>()
        * dl
}

/// Boundary density `x(t, l0) = p(t) / g(E, l0)` implied by the inflow flux.
pub fn boundary_density(e: f64, params: &ModelParams, p_t: f64) -> f64 {
    boundary_density_with(e, params, params.l0, p_t)
}

pub fn boundary_density_with<C: Coefficients>(e: f64, coeffs: &C, l0: f64, p_t: f64) -> f64 {
    p_t / coeffs.growth(e, l0)
}

/// One explicit upwind step of length `dt`. The crowding index is frozen at
/// its pre-step value; the step is refused if any cell's update coefficient
/// would turn negative (CFL violation).
pub fn step(
    state: &PopulationState,
    dt: f64,
    policy: &ThresholdPolicy,
    params: &ModelParams,
    grid: &SizeGrid,
) -> Result<PopulationState, TransportError> {
    step_with(state, dt, policy, params, params.p, grid)
}

pub fn step_with<C: Coefficients>(
    state: &PopulationState,
    dt: f64,
    policy: &ThresholdPolicy,
    coeffs: &C,
    inflow: f64,
    grid: &SizeGrid,
) -> Result<PopulationState, TransportError> {
    if state.density.len() != grid.n_cells() {
        return Err(TransportError::LengthMismatch {
            expected: grid.n_cells(),
            got: state.density.len(),
        });
    }
    let mut density = state.density.clone();
    let e = crowding_index_with(&density, grid, coeffs);
    advance(&mut density, e, dt, policy.realized(), coeffs, inflow, grid)?;
    Ok(PopulationState {
        time: state.time + dt,
        density,
    })
}

/// In-place upwind update. Iterates cells from the right so each cell still
/// sees its left neighbor's pre-step value.
fn advance<C: Coefficients>(
    density: &mut [f64],
    e: f64,
    dt: f64,
    u: &[f64],
    coeffs: &C,
    inflow: f64,
    grid: &SizeGrid,
) -> Result<(), TransportError> {
    let n = grid.n_cells();
    let dl = grid.dl();
    let edges = grid.edges();
    let centers = grid.centers();
    let ratio = dt / dl;

    for i in (0..n).rev() {
        let g_out = coeffs.growth(e, edges[i + 1]);
        let removal = coeffs.mortality(e, centers[i]) + u[i];
        let coefficient = 1.0 - ratio * g_out - dt * removal;
        if coefficient < 0.0 {
            return Err(TransportError::CflViolation {
                cell: i,
                coefficient,
                dt,
                growth: g_out,
                removal,
            });
        }
        let flux_in = if i == 0 {
            inflow
        } else {
            coeffs.growth(e, edges[i]) * density[i - 1]
        };
        density[i] = density[i] * coefficient + ratio * flux_in;
    }
    Ok(())
}

/// Forward run over `[t0, t0 + horizon]` with a constant step `dt`; the
/// final step is shortened to land exactly on the horizon. Records E, N,
/// and the harvest value flow at every sample time, plus density snapshots
/// at the sample times nearest to `snapshot_times`.
pub fn simulate(
    initial: &PopulationState,
    policy: &ThresholdPolicy,
    params: &ModelParams,
    grid: &SizeGrid,
    dt: f64,
    horizon: f64,
    snapshot_times: &[f64],
) -> Result<TrajectoryRecord, TransportError> {
    simulate_with(
        initial,
        policy,
        params,
        params.p,
        grid,
        dt,
        horizon,
        snapshot_times,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_with<C: Coefficients>(
    initial: &PopulationState,
    policy: &ThresholdPolicy,
    coeffs: &C,
    inflow: f64,
    grid: &SizeGrid,
    dt: f64,
    horizon: f64,
    snapshot_times: &[f64],
) -> Result<TrajectoryRecord, TransportError> {
    if horizon <= 0.0 || horizon.is_nan() {
        return Err(TransportError::BadHorizon(horizon));
    }
    if initial.density.len() != grid.n_cells() {
        return Err(TransportError::LengthMismatch {
            expected: grid.n_cells(),
            got: initial.density.len(),
        });
    }

    let n_full = (horizon / dt + 1e-12).floor() as usize;
    let remainder = horizon - n_full as f64 * dt;
    let n_steps = n_full + usize::from(remainder > 1e-12 * horizon);
    let u = policy.realized();
    let dl = grid.dl();

    // price * u * dl per cell, fixed over the run
    let value_weights: Vec<f64> = grid
        .centers()
        .iter()
        .zip(u)
        .map(|(&c, &ui)| coeffs.price(c) * ui * dl)
        .collect();

    let mut density = initial.density.clone();
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut e_series = Vec::with_capacity(n_steps + 1);
    let mut n_series = Vec::with_capacity(n_steps + 1);
    let mut value_series = Vec::with_capacity(n_steps + 1);
    let mut snapshots: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut wanted: Vec<f64> = snapshot_times.to_vec();
    wanted.sort_by(|a, b| a.partial_cmp(b).expect("finite snapshot times"));
    let mut next_snapshot = wanted.into_iter().peekable();

    let mut t = initial.time;
    let t_end = initial.time + horizon;
    for k in 0..=n_steps {
        let e = crowding_index_with(&density, grid, coeffs);
        times.push(t);
        e_series.push(e);
        n_series.push(integrate_cells(&density, grid).expect("validated lengths"));
        value_series.push(
            value_weights
                .iter()
                .zip(&density)
                .map(|(w, x)| w * x)
                .sum::<f64>(),
        );
        // snapshot at the first sample time at or beyond each request
        while next_snapshot
            .peek()
            .is_some_and(|&s| s <= t || k == n_steps)
        {
            next_snapshot.next();
            snapshots.push((t, density.clone()));
        }
        if k == n_steps {
            break;
        }
        let h = if k < n_full { dt } else { t_end - t };
        advance(&mut density, e, h, u, coeffs, inflow, grid)?;
        t = if k + 1 == n_steps { t_end } else { t + h };
    }

    Ok(TrajectoryRecord {
        times,
        e_series,
        n_series,
        harvest_value_rate: value_series,
        snapshots,
    })
}

/// Earliest time from which the series stays within
/// `tolerance * |terminal value|` of its terminal value. `None` when even
/// the final sample violates the band (degenerate tolerance).
pub fn convergence_time(times: &[f64], series: &[f64], tolerance: f64) -> Option<f64> {
    assert_eq!(times.len(), series.len());
    let terminal = *series.last()?;
    let band = tolerance * terminal.abs();
    let mut idx = None;
    for i in (0..series.len()).rev() {
        if (series[i] - terminal).abs() <= band {
            idx = Some(i);
        } else {
            break;
        }
    }
    idx.map(|i| times[i])
}
