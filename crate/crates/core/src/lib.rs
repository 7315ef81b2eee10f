//! Size-structured fishery model with nonlocal crowding feedback.
//!
//! The population density `x(t, l)` over body length `l` obeys a transport
//! balance law: growth moves individuals along the size axis while natural
//! and harvest mortality remove them. Both the growth rate `g(E, l)` and the
//! natural mortality `mu(E, l)` depend on a nonlocal crowding index
//! `E(t) = ∫ chi(l) x(t, l) dl`, and recruitment enters as a prescribed
//! inflow flux `p` at the minimum size.
//!
//! The crate is organized in layers:
//!
//! - [`model`] — parameter set and the coefficient functions `g`, `mu`,
//!   `chi`, `c`, `m`, swappable behind the [`model::Coefficients`] trait.
//! - [`grid`] — uniform size mesh, quadrature rules, CFL time step.
//! - [`transport`] — forward-in-time upwind finite-volume solver.
//! - [`steady`] — stationary profiles and the scalar closure equation
//!   `F(E) = 0` for the self-consistent crowding level.
//! - [`replacement`] — intrinsic replacement index `R(E)` and the critical
//!   crowding level where `R` crosses one.
//! - [`adjoint`] — stationary shadow-value equation, switching function,
//!   and threshold extraction.
//! - [`policy`] — discounted-revenue objective, threshold sweep, and
//!   golden-section refinement of the optimum.

pub mod adjoint;
pub mod grid;
pub mod model;
pub mod policy;
pub mod replacement;
pub mod roots;
pub mod steady;
pub mod transport;

pub use grid::SizeGrid;
pub use model::{Coefficients, ModelParams};
pub use transport::{PopulationState, ThresholdPolicy, TrajectoryRecord};
