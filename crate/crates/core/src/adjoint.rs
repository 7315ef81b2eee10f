//! Stationary shadow-value analysis and threshold extraction.
//!
//! With the nonlocal feedback dropped from the backward equation (the
//! weak-coupling reduction), the stationary shadow value solves the linear
//! ODE `-g(E, l) lambda'(l) = c(l) u(l) - (r + mu + u) lambda(l)` with
//! `lambda(lm) = 0`, integrated from the top size downward with one
//! integrating-factor step per cell. The sign of the switching function
//! `S(l) = c(l) - lambda(l)` then dictates the bang-bang harvest decision,
//! and under a single sign crossing the policy is a pure size threshold.
//!
//! The neglected nonlocal term is quantified after the fact:
//! [`nonlocal_coupling_term`] evaluates the dropped integral against the
//! stationary state, and [`weak_coupling_ratio`] compares it with the
//! leading terms of the reduced equation.

use crate::grid::SizeGrid;
use crate::model::{Coefficients, ModelParams};
use crate::steady::{solve_steady_crowding, ClosureError, StationaryProfile};
use crate::transport::ThresholdPolicy;

/// Shadow value at the grid nodes for one crowding level and policy.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointProfile {
    pub e: f64,
    /// Shadow value `lambda` at the node mesh, $/individual.
    pub lambda: Vec<f64>,
    pub policy: ThresholdPolicy,
}

/// Trichotomy of the sign pattern of the switching function.
#[derive(Debug, Clone, PartialEq)]
pub enum SwitchingOutcome {
    /// `S <= 0` everywhere: protect every size.
    AllProtect,
    /// `S >= 0` everywhere: harvest every size.
    AllHarvest,
    /// Exactly one sign change, at the interpolated crossing.
    Threshold { l_star: f64 },
    /// Multiple sign changes: the single-crossing hypothesis failed; all
    /// crossings are reported rather than silently picking one.
    NonMonotone { crossings: Vec<f64> },
}

/// Solves the reduced stationary adjoint equation backward from
/// `lambda(lm) = 0`. Coefficients are frozen at each cell center, which
/// makes the per-cell integrating-factor step exact for piecewise-constant
/// data.
pub fn solve_stationary_adjoint(
    e: f64,
    policy: &ThresholdPolicy,
    params: &ModelParams,
    grid: &SizeGrid,
) -> AdjointProfile {
    solve_stationary_adjoint_with(e, policy, params, params.r, grid)
}

pub fn solve_stationary_adjoint_with<C: Coefficients>(
    e: f64,
    policy: &ThresholdPolicy,
    coeffs: &C,
    discount: f64,
    grid: &SizeGrid,
) -> AdjointProfile {
    let n = grid.n_cells();
    let centers = grid.centers();
    let u = policy.realized();
    let dl = grid.dl();
    let mut lambda = vec![0.0; n + 1];
    for i in (0..n).rev() {
        let g = coeffs.growth(e, centers[i]);
        let a = (discount + coeffs.mortality(e, centers[i]) + u[i]) / g;
        let b = coeffs.price(centers[i]) * u[i] / g;
        lambda[i] = if a != 0.0 {
            let decay = (-a * dl).exp();
            decay * lambda[i + 1] + b / a * (1.0 - decay)
        } else {
            lambda[i + 1] + b * dl
        };
    }
    AdjointProfile {
        e,
        lambda,
        policy: policy.clone(),
    }
}

/// Switching function `S(l) = c(l) - lambda(l)` at the nodes.
pub fn switching_function(
    adjoint: &AdjointProfile,
    params: &ModelParams,
    grid: &SizeGrid,
) -> Vec<f64> {
    switching_function_with(adjoint, params, grid)
}

pub fn switching_function_with<C: Coefficients>(
    adjoint: &AdjointProfile,
    coeffs: &C,
    grid: &SizeGrid,
) -> Vec<f64> {
    grid.nodes()
        .iter()
        .zip(&adjoint.lambda)
        .map(|(&l, &lam)| coeffs.price(l) - lam)
        .collect()
}

/// Classifies the sign pattern of `S` per the threshold trichotomy. A
/// single sign change yields the linearly interpolated crossing; several
/// changes are reported explicitly.
pub fn extract_threshold(s: &[f64], grid: &SizeGrid) -> SwitchingOutcome {
    assert_eq!(s.len(), grid.n_nodes());
    let any_pos = s.iter().any(|&v| v > 0.0);
    let any_neg = s.iter().any(|&v| v < 0.0);
    if !any_pos {
        return SwitchingOutcome::AllProtect;
    }
    if !any_neg {
        return SwitchingOutcome::AllHarvest;
    }
    let nodes = grid.nodes();
    let mut crossings = Vec::new();
    let mut prev: Option<(usize, f64)> = None;
    for (j, &v) in s.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        if let Some((i, w)) = prev {
            if (w < 0.0) != (v < 0.0) {
                let t = w / (w - v);
                crossings.push(nodes[i] + t * (nodes[j] - nodes[i]));
            }
        }
        prev = Some((j, v));
    }
    if crossings.len() == 1 {
        SwitchingOutcome::Threshold {
            l_star: crossings[0],
        }
    } else {
        SwitchingOutcome::NonMonotone { crossings }
    }
}

/// True when the sampled switching function is strictly increasing, the
/// single-crossing hypothesis behind the threshold trichotomy.
pub fn switching_is_strictly_increasing(s: &[f64]) -> bool {
    s.windows(2).all(|w| w[1] > w[0])
}

/// The nonlocal term dropped by the weak-coupling reduction, evaluated
/// against a stationary state: `C = ∫ x (lambda' ∂g/∂E - lambda ∂mu/∂E) ds`
/// with `lambda'` from backward differences (forward at the first node) and
/// the trapezoid rule over the node mesh.
pub fn nonlocal_coupling_term(
    state: &StationaryProfile,
    adjoint: &AdjointProfile,
    params: &ModelParams,
    grid: &SizeGrid,
) -> f64 {
    nonlocal_coupling_term_with(state, adjoint, params, grid)
}

pub fn nonlocal_coupling_term_with<C: Coefficients>(
    state: &StationaryProfile,
    adjoint: &AdjointProfile,
    coeffs: &C,
    grid: &SizeGrid,
) -> f64 {
    let nodes = grid.nodes();
    let lambda = &adjoint.lambda;
    let e = adjoint.e;
    let dl = grid.dl();
    let integrand: Vec<f64> = (0..nodes.len())
        .map(|j| {
            let dlam = if j == 0 {
                (lambda[1] - lambda[0]) / dl
            } else {
                (lambda[j] - lambda[j - 1]) / dl
            };
            state.profile[j]
                * (dlam * coeffs.growth_de(e, nodes[j])
                    - lambda[j] * coeffs.mortality_de(e, nodes[j]))
        })
        .collect();
    let total: f64 = integrand.iter().sum();
    (total - 0.5 * (integrand[0] + integrand[integrand.len() - 1])) * dl
}

/// Sup-norm of the neglected nonlocal source `chi(l) C` relative to the
/// leading reduced-equation terms `(r + mu + u) lambda - c u`. `None` when
/// the leading terms vanish identically (e.g. no harvesting anywhere).
pub fn weak_coupling_ratio(
    state: &StationaryProfile,
    adjoint: &AdjointProfile,
    params: &ModelParams,
    grid: &SizeGrid,
) -> Option<f64> {
    weak_coupling_ratio_with(state, adjoint, params, params.r, grid)
}

pub fn weak_coupling_ratio_with<C: Coefficients>(
    state: &StationaryProfile,
    adjoint: &AdjointProfile,
    coeffs: &C,
    discount: f64,
    grid: &SizeGrid,
) -> Option<f64> {
    let coupling = nonlocal_coupling_term_with(state, adjoint, coeffs, grid);
    let e = adjoint.e;
    let policy = &adjoint.policy;
    let mut numerator = 0.0f64;
    let mut denominator = 0.0f64;
    for (&l, &lam) in grid.nodes().iter().zip(&adjoint.lambda) {
        numerator = numerator.max((coeffs.kernel(l) * coupling).abs());
        let u = policy.intensity_at(l);
        let lead = (discount + coeffs.mortality(e, l) + u) * lam - coeffs.price(l) * u;
        denominator = denominator.max(lead.abs());
    }
    if denominator == 0.0 {
        None
    } else {
        Some(numerator / denominator)
    }
}

/// One diagnostic pass: stationary state at the policy's threshold, reduced
/// adjoint, switching function, and the implied threshold.
#[derive(Debug, Clone)]
pub struct SwitchingAnalysis {
    pub e: f64,
    pub state: StationaryProfile,
    pub adjoint: AdjointProfile,
    pub switching: Vec<f64>,
    pub outcome: SwitchingOutcome,
    pub monotone: bool,
    pub weak_coupling_ratio: Option<f64>,
}

/// Runs the full stationary diagnostic chain for one threshold policy.
pub fn analyze_policy(
    policy: &ThresholdPolicy,
    params: &ModelParams,
    grid: &SizeGrid,
) -> Result<SwitchingAnalysis, ClosureError> {
    let steady = solve_steady_crowding(params, Some(policy), grid)?;
    let adjoint = solve_stationary_adjoint(steady.e_star, policy, params, grid);
    let switching = switching_function(&adjoint, params, grid);
    let outcome = extract_threshold(&switching, grid);
    let monotone = switching_is_strictly_increasing(&switching);
    let ratio = weak_coupling_ratio(&steady.profile, &adjoint, params, grid);
    Ok(SwitchingAnalysis {
        e: steady.e_star,
        state: steady.profile,
        adjoint,
        switching,
        outcome,
        monotone,
        weak_coupling_ratio: ratio,
    })
}

/// Outcome of the damped threshold fixed-point loop.
#[derive(Debug, Clone, PartialEq)]
pub enum IterationOutcome {
    Converged {
        l_star: f64,
    },
    MaxIterationsReached {
        l_star: f64,
    },
    /// The switching function left the threshold regime (all-protect,
    /// all-harvest, or multiple crossings).
    Degenerate {
        case: SwitchingOutcome,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdIteration {
    /// Threshold after each damped update, starting with the initial guess.
    pub iterates: Vec<f64>,
    pub outcome: IterationOutcome,
}

/// Damped fixed-point loop threshold -> steady state -> adjoint -> implied
/// threshold. A validation tool only: convergence is never asserted, and a
/// non-contracting map simply runs out of iterations.
pub fn threshold_iteration(
    params: &ModelParams,
    grid: &SizeGrid,
    l_init: f64,
    damping: f64,
    max_iter: usize,
) -> Result<ThresholdIteration, ClosureError> {
    const TOLERANCE: f64 = 1e-3;
    let mut l = l_init;
    let mut iterates = vec![l];
    for _ in 0..max_iter {
        let policy = ThresholdPolicy::new(Some(l), params.u_max, grid);
        let analysis = analyze_policy(&policy, params, grid)?;
        let implied = match analysis.outcome {
            SwitchingOutcome::Threshold { l_star } => l_star,
            case => {
                return Ok(ThresholdIteration {
                    iterates,
                    outcome: IterationOutcome::Degenerate { case },
                })
            }
        };
        let next = l + damping * (implied - l);
        iterates.push(next);
        if (implied - l).abs() <= TOLERANCE {
            return Ok(ThresholdIteration {
                iterates,
                outcome: IterationOutcome::Converged { l_star: next },
            });
        }
        l = next;
    }
    Ok(ThresholdIteration {
        iterates,
        outcome: IterationOutcome::MaxIterationsReached { l_star: l },
    })
}
