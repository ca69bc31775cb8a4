//! Fixed bilinear incentive mechanisms for linear-quadratic leader-follower
//! control.
//!
//! A leader designs a payment `p(x, u; Θ) = (x - xref)ᵀ Θ u` once; a myopic
//! follower then steers `x_{k+1} = A x_k + B u_k` by best-responding to it
//! every stage. The crate evaluates the leader's expected cost and its exact
//! gradient, searches for locally optimal incentives and covers the scalar
//! case in closed form.

pub mod cli;
pub mod cost;
pub mod dynamics;
pub mod error;
pub mod gradient;
pub mod model;
pub mod optimizer;
pub mod scalar;

pub use cost::{expected_cost, monte_carlo_cost, social_cost, CostBreakdown, MonteCarloEstimate};
pub use dynamics::{follower_response, propagate_moments, simulate, steady_state_error, MomentTrajectory, Trajectory};
pub use error::{Error, Result};
pub use gradient::{adjoints, analytic_gradient, finite_difference_gradient, relative_discrepancy, AdjointState};
pub use model::{build_closed_loop, validate, ClosedLoop, GameInstance, GameParameters, IncentiveMatrix};
pub use optimizer::{optimize, sweep_cost, DesignReport, OptimizerConfig, StopReason};
pub use scalar::{AsymptoticResult, GeometricSums, Regime, ScalarInstance};
