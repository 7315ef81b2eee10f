//! Uniform size mesh, quadrature rules, and the CFL time step.
//!
//! The finite-volume state lives on cell averages, so state-dependent
//! integrals (crowding index, total population, harvest flow) use the
//! midpoint rule over cells. Smooth closed-form integrands (closure and
//! replacement integrals) use composite Simpson on the node mesh, where
//! "nodes" are the cell edges.

use crate::model::{Coefficients, ModelParams};
use thiserror::Error;

/// Default CFL safety factor for the explicit transport step.
pub const DEFAULT_CFL_SAFETY: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("at least 2 cells required, got {0}")]
    TooFewCells(usize),
    #[error("grid bounds must satisfy l0 < lm, got [{l0}, {lm}]")]
    InvertedBounds { l0: f64, lm: f64 },
    #[error("expected {expected} per-cell values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("composite Simpson needs an odd node count >= 3, got {0}")]
    BadNodeCount(usize),
    #[error("integration bounds must satisfy a < b, got [{a}, {b}]")]
    BadBounds { a: f64, b: f64 },
}

/// Uniform partition of `[l0, lm]` into `n_cells` cells.
///
/// `edges` has `n_cells + 1` entries with `edges[0] = l0` and
/// `edges[n_cells] = lm` exactly; `centers[i]` is the midpoint of cell `i`.
/// The node mesh used by the smooth quadratures is the edge set.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeGrid {
    l0: f64,
    lm: f64,
    n_cells: usize,
    dl: f64,
    edges: Vec<f64>,
    centers: Vec<f64>,
}

impl SizeGrid {
    pub fn build(l0: f64, lm: f64, n_cells: usize) -> Result<Self, GridError> {
        if n_cells < 2 {
            return Err(GridError::TooFewCells(n_cells));
        }
        if l0 >= lm || l0.is_nan() || lm.is_nan() {
            return Err(GridError::InvertedBounds { l0, lm });
        }
        let span = lm - l0;
        let dl = span / n_cells as f64;
        let mut edges: Vec<f64> = (0..=n_cells)
            .map(|i| l0 + span * (i as f64 / n_cells as f64))
            .collect();
        edges[0] = l0;
        edges[n_cells] = lm;
        let centers: Vec<f64> = (0..n_cells)
            .map(|i| 0.5 * (edges[i] + edges[i + 1]))
            .collect();
        Ok(SizeGrid {
            l0,
            lm,
            n_cells,
            dl,
            edges,
            centers,
        })
    }

    pub fn l0(&self) -> f64 {
        self.l0
    }

    pub fn lm(&self) -> f64 {
        self.lm
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dl(&self) -> f64 {
        self.dl
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Node mesh for the smooth quadratures: identical to the edge set.
    pub fn nodes(&self) -> &[f64] {
        &self.edges
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }
}

/// Midpoint-rule integral of cell-averaged `values` over the grid.
pub fn integrate_cells(values: &[f64], grid: &SizeGrid) -> Result<f64, GridError> {
    if values.len() != grid.n_cells() {
        return Err(GridError::LengthMismatch {
            expected: grid.n_cells(),
            got: values.len(),
        });
    }
    Ok(values.iter().sum::<f64>() * grid.dl())
}

/// Composite Simpson over equally spaced samples with spacing `h`.
/// Exact for polynomials up to degree three.
pub fn simpson_samples(values: &[f64], h: f64) -> Result<f64, QuadratureError> {
    let n = values.len();
    if n < 3 || n.is_multiple_of(2) {
        return Err(QuadratureError::BadNodeCount(n));
    }
    let mut odd = 0.0;
    let mut even = 0.0;
    for (i, &v) in values.iter().enumerate().take(n - 1).skip(1) {
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    Ok(h / 3.0 * (values[0] + values[n - 1] + 4.0 * odd + 2.0 * even))
}

/// Composite Simpson of `f` over `[a, b]` on `n_nodes` equally spaced nodes.
pub fn simpson<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    n_nodes: usize,
) -> Result<f64, QuadratureError> {
    if a >= b || a.is_nan() || b.is_nan() {
        return Err(QuadratureError::BadBounds { a, b });
    }
    if n_nodes < 3 || n_nodes.is_multiple_of(2) {
        return Err(QuadratureError::BadNodeCount(n_nodes));
    }
    let h = (b - a) / (n_nodes - 1) as f64;
    let values: Vec<f64> = (0..n_nodes)
        .map(|i| {
            let l = if i == n_nodes - 1 {
                b
            } else {
                a + h * i as f64
            };
            f(l)
        })
        .collect();
    simpson_samples(&values, h)
}

/// Explicit time step from the CFL restriction, `safety * dl / g_max`, with
/// the growth maximum taken analytically for the standard coefficient family.
pub fn cfl_timestep(params: &ModelParams, grid: &SizeGrid, safety: f64) -> f64 {
    assert!(safety > 0.0 && safety <= 1.0, "safety must lie in (0, 1]");
    let g_max = params.max_growth(grid.l0(), grid.lm(), 0.0);
    safety * grid.dl() / g_max
}

/// CFL step for a user-supplied coefficient family; the growth maximum is
/// taken over `[l0, lm] x [0, e_upper]` via the trait's bound (a sampled
/// scan unless overridden).
pub fn cfl_timestep_with<C: Coefficients>(
    coeffs: &C,
    grid: &SizeGrid,
    safety: f64,
    e_upper: f64,
) -> f64 {
    assert!(safety > 0.0 && safety <= 1.0, "safety must lie in (0, 1]");
    let g_max = coeffs.max_growth(grid.l0(), grid.lm(), e_upper);
    safety * grid.dl() / g_max
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn reference_mesh_width() {
        let g = SizeGrid::build(20.0, 130.0, 400).unwrap();
        assert_relative_eq!(g.dl(), 0.275, max_relative = 1e-14);
        assert_eq!(g.edges()[0], 20.0);
        assert_eq!(g.edges()[400], 130.0);
        let fine = SizeGrid::build(20.0, 130.0, 800).unwrap();
        assert_relative_eq!(fine.dl(), 0.1375, max_relative = 1e-14);
    }

    #[test]
    fn two_cell_mesh() {
        let g = SizeGrid::build(0.0, 1.0, 2).unwrap();
        assert_eq!(g.edges(), &[0.0, 0.5, 1.0]);
        assert_eq!(g.centers(), &[0.25, 0.75]);
    }

    #[test]
    fn rejects_degenerate_meshes() {
        assert!(SizeGrid::build(0.0, 1.0, 1).is_err());
        assert!(SizeGrid::build(1.0, 0.0, 10).is_err());
        assert!(SizeGrid::build(1.0, 1.0, 10).is_err());
    }

    #[test]
    fn cell_integral_examples() {
        let g = SizeGrid::build(20.0, 130.0, 400).unwrap();
        let ones = vec![1.0; 400];
        assert_relative_eq!(
            integrate_cells(&ones, &g).unwrap(),
            110.0,
            max_relative = 1e-13
        );
        let zeros = vec![0.0; 400];
        assert_eq!(integrate_cells(&zeros, &g).unwrap(), 0.0);

        // midpoint rule is exact for linear integrands
        let two = SizeGrid::build(0.0, 1.0, 2).unwrap();
        let linear: Vec<f64> = two.centers().to_vec();
        assert_relative_eq!(
            integrate_cells(&linear, &two).unwrap(),
            0.5,
            max_relative = 1e-15
        );

        assert!(integrate_cells(&ones[..10], &g).is_err());
    }

    #[test]
    fn simpson_exact_on_cubics() {
        let v = simpson(|l| l * l * l, 0.0, 1.0, 5).unwrap();
        assert_relative_eq!(v, 0.25, max_relative = 1e-14);
        let c = simpson(|_| 1.0, 20.0, 130.0, 401).unwrap();
        assert_relative_eq!(c, 110.0, max_relative = 1e-13);
    }

    #[test]
    fn simpson_matches_analytic_exponential() {
        let v = simpson(|l| (-l).exp(), 0.0, 1.0, 101).unwrap();
        assert_relative_eq!(v, 1.0 - (-1.0f64).exp(), epsilon = 1e-10);
    }

    #[test]
    fn simpson_rejects_even_node_counts() {
        assert!(simpson(|l| l, 0.0, 1.0, 4).is_err());
        assert!(simpson_samples(&[1.0, 2.0], 0.5).is_err());
        assert!(simpson(|l| l, 1.0, 0.0, 5).is_err());
    }

    #[test]
    fn cfl_reference_step() {
        let p = ModelParams::default();
        let g = SizeGrid::build(p.l0, p.lm, 400).unwrap();
        let dt = cfl_timestep(&p, &g, 0.8);
        assert!((dt - 0.0112239).abs() < 5e-8, "dt = {dt}");
        let fine = SizeGrid::build(p.l0, p.lm, 800).unwrap();
        assert!((cfl_timestep(&p, &fine, 0.8) - 0.00561196).abs() < 5e-9);
    }

    #[test]
    fn cfl_exact_limit_for_constant_growth() {
        struct Const(f64);
        impl Coefficients for Const {
            fn growth(&self, _e: f64, _l: f64) -> f64 {
                self.0
            }
            fn mortality(&self, _e: f64, _l: f64) -> f64 {
                0.0
            }
            fn growth_de(&self, _e: f64, _l: f64) -> f64 {
                0.0
            }
            fn mortality_de(&self, _e: f64, _l: f64) -> f64 {
                0.0
            }
            fn kernel(&self, _l: f64) -> f64 {
                1.0
            }
            fn price(&self, _l: f64) -> f64 {
                0.0
            }
            fn fertility(&self, _l: f64) -> f64 {
                0.0
            }
        }
        let g = SizeGrid::build(0.0, 10.0, 20).unwrap();
        let dt = cfl_timestep_with(&Const(2.5), &g, 1.0, 100.0);
        assert_relative_eq!(dt, g.dl() / 2.5, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn cells_cover_the_interval(n in 2usize..600, l0 in 0.0..50.0f64, span in 0.1..200.0f64) {
            let g = SizeGrid::build(l0, l0 + span, n).unwrap();
            let total = g.dl() * n as f64;
            prop_assert!((total - span).abs() <= 1e-12 * span.max(1.0));
            for w in g.centers().windows(2) {
                prop_assert!(w[0] < w[1]);
            }
        }

        #[test]
        fn cfl_scales_linearly(safety in 0.05..1.0f64, n in 2usize..500) {
            let p = ModelParams::default();
            let g = SizeGrid::build(p.l0, p.lm, n).unwrap();
            let dt = cfl_timestep(&p, &g, safety);
            let dt_full = cfl_timestep(&p, &g, 1.0);
            prop_assert!((dt - safety * dt_full).abs() <= 1e-15 + 1e-12 * dt_full);
        }

        #[test]
        fn simpson_exact_on_random_cubics(
            a in -2.0..2.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64, d in -2.0..2.0f64
        ) {
            let f = |l: f64| a * l * l * l + b * l * l + c * l + d;
            let exact = a / 4.0 * (3.0f64.powi(4) - 1.0) + b / 3.0 * (27.0 - 1.0) + c / 2.0 * (9.0 - 1.0) + d * 2.0;
            let v = simpson(f, 1.0, 3.0, 41).unwrap();
            prop_assert!((v - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
        }
    }
}
