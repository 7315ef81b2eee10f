//! Intrinsic replacement index `R(E)` and the critical crowding level.
//!
//! `R(E) = ∫ (m(l) / g(E, l)) exp(-∫ mu / g) dl` measures the expected
//! lifetime recruitment contribution of one entrant at crowding level `E`.
//! Because recruitment here is an exogenous inflow, `R >= 1` is used as a
//! biological viability target, not as a persistence threshold.
//!
//! The integrand jumps where fertility switches on, so the quadrature
//! integrates from exactly that point on a dedicated odd-node Simpson mesh;
//! survival is continued across the split by the same trapezoid hazard used
//! everywhere else.

use crate::grid::{simpson_samples, SizeGrid};
use crate::model::{Coefficients, ModelParams};
use crate::roots::brent;
use crate::steady::{closure_bracket_upper, natural_hazard_to, CLOSURE_TOLERANCE_FRACTION};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ViabilityError {
    #[error("never viable: R(0) = {r_at_zero} < 1, no crowding level can reach the target")]
    NeverViable { r_at_zero: f64 },
    #[error("no critical value in range: R({upper}) = {r_upper} still >= 1")]
    NoCrossingInRange { upper: f64, r_upper: f64 },
}

/// Viability verdict at one crowding level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViabilityReport {
    pub e: f64,
    pub r: f64,
    pub viable: bool,
}

/// Probability of surviving from the entry size to length `l` at crowding
/// level `e`: `exp(-∫_{l0}^{l} mu / g)`.
pub fn survival_probability(e: f64, l: f64, params: &ModelParams, grid: &SizeGrid) -> f64 {
    survival_probability_with(e, l, params, grid)
}

pub fn survival_probability_with<C: Coefficients>(
    e: f64,
    l: f64,
    coeffs: &C,
    grid: &SizeGrid,
) -> f64 {
    (-natural_hazard_to(e, coeffs, grid, l)).exp()
}

/// Intrinsic replacement index at crowding level `e`.
pub fn replacement_index(e: f64, params: &ModelParams, grid: &SizeGrid) -> f64 {
    replacement_index_with(e, params, grid)
}

pub fn replacement_index_with<C: Coefficients>(e: f64, coeffs: &C, grid: &SizeGrid) -> f64 {
    let l0 = grid.l0();
    let lm = grid.lm();
    let start = match coeffs.fertility_support_start() {
        Some(s) if s >= lm => return 0.0,
        Some(s) => s.max(l0),
        None => l0,
    };

    // odd-node Simpson mesh on [start, lm]
    let n_sub = if grid.n_cells().is_multiple_of(2) {
        grid.n_cells()
    } else {
        grid.n_cells() + 1
    };
    let h = (lm - start) / n_sub as f64;

    // hazard carried from l0 to the split point, then accumulated along the
    // integration mesh
    let mut hazard = natural_hazard_to(e, coeffs, grid, start);
    let rate = |s: f64| coeffs.mortality(e, s) / coeffs.growth(e, s);
    let mut prev_point = start;
    let mut prev_rate = rate(start);
    let values: Vec<f64> = (0..=n_sub)
        .map(|i| {
            let l = if i == n_sub { lm } else { start + h * i as f64 };
            if i > 0 {
                let cur = rate(l);
                hazard += 0.5 * (prev_rate + cur) * (l - prev_point);
                prev_point = l;
                prev_rate = cur;
            }
            coeffs.fertility(l) / coeffs.growth(e, l) * (-hazard).exp()
        })
        .collect();
    simpson_samples(&values, h).expect("odd node count by construction")
}

/// Replacement index together with the viability flag `R >= 1`.
pub fn viability(e: f64, params: &ModelParams, grid: &SizeGrid) -> ViabilityReport {
    let r = replacement_index(e, params, grid);
    ViabilityReport {
        e,
        r,
        viable: r >= 1.0,
    }
}

/// Critical crowding level where `R(E)` crosses one; the same bracketing
/// solver as the closure equation, with the bracket grown geometrically from
/// the closure bound (or the caller's hint) until `R < 1`.
pub fn critical_crowding(
    params: &ModelParams,
    grid: &SizeGrid,
    bracket_hint: Option<f64>,
) -> Result<f64, ViabilityError> {
    critical_crowding_with(params, params.p, grid, bracket_hint)
}

pub fn critical_crowding_with<C: Coefficients>(
    coeffs: &C,
    inflow: f64,
    grid: &SizeGrid,
    bracket_hint: Option<f64>,
) -> Result<f64, ViabilityError> {
    let r0 = replacement_index_with(0.0, coeffs, grid);
    if r0 < 1.0 {
        return Err(ViabilityError::NeverViable { r_at_zero: r0 });
    }
    let mut upper = bracket_hint
        .unwrap_or_else(|| closure_bracket_upper(coeffs, inflow, grid))
        .max(1.0);
    let mut r_upper = replacement_index_with(upper, coeffs, grid);
    let mut doublings = 0;
    while r_upper >= 1.0 {
        if doublings >= 16 {
            return Err(ViabilityError::NoCrossingInRange { upper, r_upper });
        }
        upper *= 2.0;
        r_upper = replacement_index_with(upper, coeffs, grid);
        doublings += 1;
    }
    let tol = CLOSURE_TOLERANCE_FRACTION * upper;
    brent(
        |e| replacement_index_with(e, coeffs, grid) - 1.0,
        0.0,
        upper,
        tol,
        200,
    )
    .map(|res| res.root)
    .map_err(|_| ViabilityError::NoCrossingInRange { upper, r_upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct ConstCoeffs {
        g0: f64,
        mu0: f64,
    }

    impl Coefficients for ConstCoeffs {
        fn growth(&self, _e: f64, _l: f64) -> f64 {
            self.g0
        }
        fn mortality(&self, _e: f64, _l: f64) -> f64 {
            self.mu0
        }
        fn growth_de(&self, _e: f64, _l: f64) -> f64 {
            0.0
        }
        fn mortality_de(&self, _e: f64, _l: f64) -> f64 {
            0.0
        }
        fn kernel(&self, l: f64) -> f64 {
            1e-4 * l * l
        }
        fn price(&self, _l: f64) -> f64 {
            0.0
        }
        fn fertility(&self, _l: f64) -> f64 {
            1.0
        }
    }

    #[test]
    fn survival_is_one_at_entry_size() {
        let params = ModelParams::default();
        let grid = SizeGrid::build(params.l0, params.lm, 400).unwrap();
        assert_eq!(survival_probability(0.0, params.l0, &params, &grid), 1.0);
        assert_eq!(survival_probability(2e5, params.l0, &params, &grid), 1.0);
    }

    #[test]
    fn survival_matches_constant_coefficient_hazard() {
        let grid = SizeGrid::build(20.0, 130.0, 400).unwrap();
        let coeffs = ConstCoeffs { g0: 2.5, mu0: 0.3 };
        for l in [20.0, 45.3, 77.7, 130.0] {
            let expected = (-coeffs.mu0 * (l - 20.0) / coeffs.g0).exp();
            assert_relative_eq!(
                survival_probability_with(0.0, l, &coeffs, &grid),
                expected,
                max_relative = 1e-8
            );
        }
    }

    #[test]
    fn survival_decreases_with_crowding_and_length() {
        let params = ModelParams::default();
        let grid = SizeGrid::build(params.l0, params.lm, 200).unwrap();
        for &l in grid.nodes() {
            let lo = survival_probability(1e4, l, &params, &grid);
            let hi = survival_probability(2e5, l, &params, &grid);
            assert!(hi <= lo);
            assert!(lo > 0.0 && lo <= 1.0);
        }
        let s50 = survival_probability(1e4, 50.0, &params, &grid);
        let s100 = survival_probability(1e4, 100.0, &params, &grid);
        assert!(s100 < s50);
    }

    #[test]
    fn replacement_vanishes_without_fertility() {
        let params = ModelParams {
            m0: 0.0,
            ..ModelParams::default()
        };
        let grid = SizeGrid::build(params.l0, params.lm, 400).unwrap();
        assert_eq!(replacement_index(1e4, &params, &grid), 0.0);
    }

    #[test]
    fn replacement_scales_linearly_in_fertility() {
        let params = ModelParams::default();
        let doubled = ModelParams {
            m0: 2.0 * params.m0,
            ..params
        };
        let grid = SizeGrid::build(params.l0, params.lm, 400).unwrap();
        for e in [0.0, 5e4, 1.5e5] {
            let base = replacement_index(e, &params, &grid);
            let twice = replacement_index(e, &doubled, &grid);
            assert_relative_eq!(twice, 2.0 * base, max_relative = 1e-12);
        }
    }

    #[test]
    fn reference_replacement_values() {
        let params = ModelParams::default();
        let grid = SizeGrid::build(params.l0, params.lm, 400).unwrap();
        let solution = crate::steady::solve_steady_crowding(&params, None, &grid).unwrap();
        let r_star = replacement_index(solution.e_star, &params, &grid);
        assert_relative_eq!(r_star, 1.474679, max_relative = 1e-3);
        let e_crit = critical_crowding(&params, &grid, None).unwrap();
        assert_relative_eq!(e_crit, 179008.21, max_relative = 5e-3);
    }

    #[test]
    fn replacement_strictly_decreasing_over_reference_range() {
        let params = ModelParams::default();
        let grid = SizeGrid::build(params.l0, params.lm, 400).unwrap();
        let e_crit = critical_crowding(&params, &grid, None).unwrap();
        let mut previous = f64::INFINITY;
        for i in 0..50 {
            let e = 2.0 * e_crit * i as f64 / 49.0;
            let r = replacement_index(e, &params, &grid);
            assert!(r < previous, "R not strictly decreasing at sample {i}");
            previous = r;
        }
    }

    #[test]
    fn flat_replacement_has_no_crossing() {
        // alpha = mu1 = 0 removes all crowding dependence, R is constant > 1
        let params = ModelParams {
            alpha: 0.0,
            mu1: 0.0,
            ..ModelParams::default()
        };
        let grid = SizeGrid::build(params.l0, params.lm, 400).unwrap();
        let err = critical_crowding(&params, &grid, None).unwrap_err();
        assert!(matches!(err, ViabilityError::NoCrossingInRange { .. }));
    }

    #[test]
    fn never_viable_reported_when_fertility_too_small() {
        let params = ModelParams {
            m0: 1e-3,
            ..ModelParams::default()
        };
        let grid = SizeGrid::build(params.l0, params.lm, 400).unwrap();
        let err = critical_crowding(&params, &grid, None).unwrap_err();
        match err {
            ViabilityError::NeverViable { r_at_zero } => assert!(r_at_zero < 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn scaled_fertility_raises_critical_crowding() {
        let params = ModelParams::default();
        let grid = SizeGrid::build(params.l0, params.lm, 400).unwrap();
        let base = critical_crowding(&params, &grid, None).unwrap();
        let boosted = ModelParams {
            m0: 2.0 * params.m0,
            ..params
        };
        let higher = critical_crowding(&boosted, &grid, None).unwrap();
        assert!(higher > base);
    }

    #[test]
    fn viability_flag_tracks_the_unit_threshold() {
        let params = ModelParams::default();
        let grid = SizeGrid::build(params.l0, params.lm, 400).unwrap();
        let e_crit = critical_crowding(&params, &grid, None).unwrap();
        assert!(viability(0.5 * e_crit, &params, &grid).viable);
        assert!(!viability(1.5 * e_crit, &params, &grid).viable);
    }
}
