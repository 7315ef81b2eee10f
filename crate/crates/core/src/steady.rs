//! Stationary regimes: closed-form profiles and the scalar closure equation.
//!
//! For a fixed crowding level `E` the stationary density is
//! `x(l) = (p / g(E, l)) exp(-∫ (mu + u) / g)`, with the hazard integral
//! accumulated by the trapezoid rule on the node mesh. Self-consistency of
//! the crowding index gives the scalar closure equation
//! `F(E) = E - ∫ chi(l) x(l; E) dl = 0`, solved with Brent's method on the
//! bracket `[0, C]`, `C = chi * p * (lm^3 - l0^3) / (3 g_min)`.
//!
//! Besides the closed-form layer, [`discrete_steady_state`] solves the same
//! closure for the upwind finite-volume operator itself; its profile is a
//! fixed point of the discrete step and serves as the default initial
//! condition for policy runs.

use crate::grid::{QuadratureError, SizeGrid};
use crate::model::{Coefficients, ModelParams};
use crate::roots::{brent, RootError};
use crate::transport::{PopulationState, ThresholdPolicy};
use thiserror::Error;

/// Absolute tolerance on the crowding root, as a fraction of the bracket
/// upper end.
pub const CLOSURE_TOLERANCE_FRACTION: f64 = 1e-6;

const MAX_BRENT_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClosureError {
    #[error(
        "closure bracket [{lo}, {hi}] fails the sign condition: \
         F(lo) = {f_lo:.6e}, F(hi) = {f_hi:.6e}"
    )]
    BracketSignCondition {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("closure root iteration failed: {0}")]
    Root(RootError),
    #[error("closure quadrature failed: {0}")]
    Quadrature(#[from] QuadratureError),
}

/// Stationary density at the grid nodes for one crowding level.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryProfile {
    pub e: f64,
    /// Density at the node mesh (cell edges), individuals/cm.
    pub profile: Vec<f64>,
    /// Total population `∫ x dl` over the node mesh.
    pub n: f64,
    pub policy: Option<ThresholdPolicy>,
}

/// Solution of the closure equation: the self-consistent crowding level and
/// its stationary profile.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadySolution {
    pub e_star: f64,
    pub profile: StationaryProfile,
}

/// Cumulative natural hazard `∫_{l0}^{node_j} mu(E, s) / g(E, s) ds` at
/// every node, by the trapezoid rule.
pub(crate) fn natural_hazard_nodes<C: Coefficients>(
    e: f64,
    coeffs: &C,
    grid: &SizeGrid,
) -> Vec<f64> {
    let nodes = grid.nodes();
    let mut hazard = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    let mut prev = coeffs.mortality(e, nodes[0]) / coeffs.growth(e, nodes[0]);
    hazard.push(0.0);
    for w in nodes.windows(2) {
        let cur = coeffs.mortality(e, w[1]) / coeffs.growth(e, w[1]);
        acc += 0.5 * (prev + cur) * (w[1] - w[0]);
        hazard.push(acc);
        prev = cur;
    }
    hazard
}

/// Cumulative harvest hazard `u_max ∫_{l*}^{node_j} ds / g(E, s)` at every
/// node. The step function switches at the exact requested threshold, so the
/// straddled cell contributes only its portion above `l*` (no smearing).
fn policy_hazard_nodes<C: Coefficients>(
    e: f64,
    coeffs: &C,
    policy: &ThresholdPolicy,
    grid: &SizeGrid,
) -> Vec<f64> {
    let nodes = grid.nodes();
    let mut hazard = vec![0.0; nodes.len()];
    let Some(l_star) = policy.l_star() else {
        return hazard;
    };
    let u_max = policy.u_max();
    if u_max == 0.0 || l_star >= grid.lm() {
        return hazard;
    }
    let start = l_star.max(grid.l0());
    let mut acc = 0.0;
    let mut prev_point = start;
    let mut prev_val = u_max / coeffs.growth(e, start);
    for (j, &node) in nodes.iter().enumerate() {
        if node <= start {
            continue;
        }
        let cur = u_max / coeffs.growth(e, node);
        acc += 0.5 * (prev_val + cur) * (node - prev_point);
        hazard[j] = acc;
        prev_point = node;
        prev_val = cur;
    }
    hazard
}

/// Natural hazard from `l0` to an arbitrary length, trapezoid on the node
/// mesh with a partial final segment.
pub(crate) fn natural_hazard_to<C: Coefficients>(
    e: f64,
    coeffs: &C,
    grid: &SizeGrid,
    l: f64,
) -> f64 {
    debug_assert!(l >= grid.l0() && l <= grid.lm());
    let nodes = grid.nodes();
    let rate = |s: f64| coeffs.mortality(e, s) / coeffs.growth(e, s);
    let mut acc = 0.0;
    let mut prev_point = nodes[0];
    let mut prev_val = rate(nodes[0]);
    for &node in &nodes[1..] {
        if node >= l {
            break;
        }
        let cur = rate(node);
        acc += 0.5 * (prev_val + cur) * (node - prev_point);
        prev_point = node;
        prev_val = cur;
    }
    if l > prev_point {
        acc += 0.5 * (prev_val + rate(l)) * (l - prev_point);
    }
    acc
}

/// Stationary density at one arbitrary length for a fixed crowding level.
pub fn stationary_density_at(
    e: f64,
    params: &ModelParams,
    policy: Option<&ThresholdPolicy>,
    grid: &SizeGrid,
    l: f64,
) -> f64 {
    let mut hazard = natural_hazard_to(e, params, grid, l);
    if let Some(pol) = policy {
        if let Some(l_star) = pol.l_star() {
            let start = l_star.max(grid.l0());
            if l > start && pol.u_max() > 0.0 {
                // trapezoid over [l*, l] on node subdivisions
                let rate = |s: f64| pol.u_max() / params.growth(e, s);
                let mut acc = 0.0;
                let mut prev_point = start;
                let mut prev_val = rate(start);
                for &node in grid.nodes() {
                    if node <= start {
                        continue;
                    }
                    if node >= l {
                        break;
                    }
                    let cur = rate(node);
                    acc += 0.5 * (prev_val + cur) * (node - prev_point);
                    prev_point = node;
                    prev_val = cur;
                }
                acc += 0.5 * (prev_val + rate(l)) * (l - prev_point);
                hazard += acc;
            }
        }
    }
    params.p / params.growth(e, l) * (-hazard).exp()
}

/// Stationary profile at the grid nodes for crowding level `e`.
pub fn stationary_profile(
    e: f64,
    params: &ModelParams,
    policy: Option<&ThresholdPolicy>,
    grid: &SizeGrid,
) -> StationaryProfile {
    stationary_profile_with(e, params, params.p, policy, grid)
}

pub fn stationary_profile_with<C: Coefficients>(
    e: f64,
    coeffs: &C,
    inflow: f64,
    policy: Option<&ThresholdPolicy>,
    grid: &SizeGrid,
) -> StationaryProfile {
    let mut hazard = natural_hazard_nodes(e, coeffs, grid);
    if let Some(pol) = policy {
        let extra = policy_hazard_nodes(e, coeffs, pol, grid);
        for (h, x) in hazard.iter_mut().zip(extra) {
            *h += x;
        }
    }
    let profile: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(&hazard)
        .map(|(&l, &h)| inflow / coeffs.growth(e, l) * (-h).exp())
        .collect();
    let n = integrate_nodes(&profile, grid);
    StationaryProfile {
        e,
        profile,
        n,
        policy: policy.cloned(),
    }
}

/// Integral over the node mesh: Simpson when the node count is odd,
/// trapezoid otherwise.
fn integrate_nodes(values: &[f64], grid: &SizeGrid) -> f64 {
    if values.len() % 2 == 1 {
        crate::grid::simpson_samples(values, grid.dl()).expect("odd node count")
    } else {
        let sum: f64 = values.iter().sum();
        (sum - 0.5 * (values[0] + values[values.len() - 1])) * grid.dl()
    }
}

/// Closure residual `F(E) = E - ∫ chi(l) x(l; E) dl`, Simpson on the node
/// mesh (requires an even cell count).
pub fn closure_residual(
    e: f64,
    params: &ModelParams,
    policy: Option<&ThresholdPolicy>,
    grid: &SizeGrid,
) -> Result<f64, QuadratureError> {
    closure_residual_with(e, params, params.p, policy, grid)
}

pub fn closure_residual_with<C: Coefficients>(
    e: f64,
    coeffs: &C,
    inflow: f64,
    policy: Option<&ThresholdPolicy>,
    grid: &SizeGrid,
) -> Result<f64, QuadratureError> {
    let profile = stationary_profile_with(e, coeffs, inflow, policy, grid);
    let weighted: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(&profile.profile)
        .map(|(&l, &x)| coeffs.kernel(l) * x)
        .collect();
    let integral = crate::grid::simpson_samples(&weighted, grid.dl())?;
    Ok(e - integral)
}

/// Upper end of the closure bracket: with the survival factor bounded by
/// one and growth bounded below by its zero-crowding floor, the crowding
/// integral can never exceed `chi * p * (lm^3 - l0^3) / (3 g_min)`.
pub fn closure_bracket_upper<C: Coefficients>(coeffs: &C, inflow: f64, grid: &SizeGrid) -> f64 {
    let g_min = coeffs.min_growth_at_zero_crowding(grid.l0(), grid.lm());
    let l0 = grid.l0();
    let lm = grid.lm();
    // kernel is evaluated exactly for the quadratic family; other kernels
    // are bounded by their node maximum times the interval length
    let cubic = (lm * lm * lm - l0 * l0 * l0) / 3.0;
    let chi_scale = coeffs.kernel(lm) / (lm * lm);
    let quadratic_bound = chi_scale * cubic;
    let node_max = grid
        .nodes()
        .iter()
        .map(|&l| coeffs.kernel(l))
        .fold(0.0f64, f64::max);
    let kernel_bound = quadratic_bound.max(node_max * (lm - l0));
    inflow * kernel_bound / g_min
}

/// Solves `F(E) = 0` for the self-consistent stationary crowding level and
/// returns the profile at the root.
pub fn solve_steady_crowding(
    params: &ModelParams,
    policy: Option<&ThresholdPolicy>,
    grid: &SizeGrid,
) -> Result<SteadySolution, ClosureError> {
    solve_steady_crowding_with(params, params.p, policy, grid)
}

pub fn solve_steady_crowding_with<C: Coefficients>(
    coeffs: &C,
    inflow: f64,
    policy: Option<&ThresholdPolicy>,
    grid: &SizeGrid,
) -> Result<SteadySolution, ClosureError> {
    let upper = closure_bracket_upper(coeffs, inflow, grid);
    // the node mesh either supports Simpson for every E or for none
    closure_residual_with(0.0, coeffs, inflow, policy, grid)?;
    let residual = |e: f64| {
        closure_residual_with(e, coeffs, inflow, policy, grid).expect("node parity checked above")
    };
    let f_lo = residual(0.0);
    let f_hi = residual(upper);
    if f_lo.signum() == f_hi.signum() && f_lo != 0.0 && f_hi != 0.0 {
        return Err(ClosureError::BracketSignCondition {
            lo: 0.0,
            hi: upper,
            f_lo,
            f_hi,
        });
    }
    let tol = CLOSURE_TOLERANCE_FRACTION * upper;
    let result =
        brent(residual, 0.0, upper, tol, MAX_BRENT_ITERATIONS).map_err(ClosureError::Root)?;
    let profile = stationary_profile_with(result.root, coeffs, inflow, policy, grid);
    Ok(SteadySolution {
        e_star: result.root,
        profile,
    })
}

/// Cell-averaged stationary profile of the discrete upwind operator at a
/// fixed crowding level: each cell balances its inflow flux against the
/// outflow flux plus removal.
pub fn discrete_stationary_density<C: Coefficients>(
    e: f64,
    coeffs: &C,
    inflow: f64,
    policy: Option<&ThresholdPolicy>,
    grid: &SizeGrid,
) -> Vec<f64> {
    let n = grid.n_cells();
    let edges = grid.edges();
    let centers = grid.centers();
    let dl = grid.dl();
    let mut density = vec![0.0; n];
    let mut flux = inflow;
    for i in 0..n {
        let u = policy.map_or(0.0, |p| p.realized()[i]);
        let g_out = coeffs.growth(e, edges[i + 1]);
        let removal = coeffs.mortality(e, centers[i]) + u;
        density[i] = flux / (g_out + dl * removal);
        flux = g_out * density[i];
    }
    density
}

/// Solves the discrete closure: the crowding level whose discrete stationary
/// profile regenerates it. The profile is an exact fixed point of
/// [`crate::transport::step`] (up to the root tolerance), which makes it the
/// default initial condition for policy runs.
pub fn discrete_steady_state(
    params: &ModelParams,
    policy: Option<&ThresholdPolicy>,
    grid: &SizeGrid,
) -> Result<(f64, PopulationState), ClosureError> {
    discrete_steady_state_with(params, params.p, policy, grid)
}

pub fn discrete_steady_state_with<C: Coefficients>(
    coeffs: &C,
    inflow: f64,
    policy: Option<&ThresholdPolicy>,
    grid: &SizeGrid,
) -> Result<(f64, PopulationState), ClosureError> {
    let upper = closure_bracket_upper(coeffs, inflow, grid);
    let residual = |e: f64| {
        let density = discrete_stationary_density(e, coeffs, inflow, policy, grid);
        e - crate::transport::crowding_index_with(&density, grid, coeffs)
    };
    let f_lo = residual(0.0);
    let f_hi = residual(upper);
    if f_lo.signum() == f_hi.signum() && f_lo != 0.0 && f_hi != 0.0 {
        return Err(ClosureError::BracketSignCondition {
            lo: 0.0,
            hi: upper,
            f_lo,
            f_hi,
        });
    }
    let tol = CLOSURE_TOLERANCE_FRACTION * upper;
    let result =
        brent(residual, 0.0, upper, tol, MAX_BRENT_ITERATIONS).map_err(ClosureError::Root)?;
    let density = discrete_stationary_density(result.root, coeffs, inflow, policy, grid);
    Ok((result.root, PopulationState::new(0.0, density)))
}
