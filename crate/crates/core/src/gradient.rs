//! Gradient of the expected leader cost by backward adjoint recursions.
//!
//! The vector adjoint `λ` carries the sensitivity of the cost to the error
//! mean, the matrix adjoint `Λ` the sensitivity to the error covariance:
//!
//! ```text
//! λ_k = (2Q + Θ R⁻¹ Θᵀ) μ_k + A_Θᵀ λ_{k+1},       λ_N = 0
//! Λ_k = Q + ½ Θ R⁻¹ Θᵀ + A_Θᵀ Λ_{k+1} A_Θ,         Λ_N = 0
//! ```
//!
//! and the gradient collects, over `k = 0..N-1`,
//!
//! ```text
//! [(Σ_k + μ_k μ_kᵀ) Θ + (½ μ_k λ_{k+1}ᵀ + Σ_k A_Θᵀ Λ_{k+1}) B] R⁻¹
//! ```

use nalgebra::{DMatrix, DVector};

use crate::cost::expected_cost;
use crate::dynamics::{propagate_with, MomentTrajectory};
use crate::error::{Error, Result};
use crate::model::{build_closed_loop, project_symmetric, ClosedLoop, GameInstance, IncentiveMatrix};

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Adjoint trajectories for stages `1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointState {
    /// `lambda[j]` holds `λ_{j+1}`.
    pub lambda: Vec<DVector<f64>>,
    /// `big_lambda[j]` holds `Λ_{j+1}`.
    pub big_lambda: Vec<DMatrix<f64>>,
}

impl AdjointState {
    /// `λ_k` for `1 <= k <= N`.
    pub fn lambda_at(&self, k: usize) -> &DVector<f64> {
        &self.lambda[k - 1]
    }

    /// `Λ_k` for `1 <= k <= N`.
    pub fn big_lambda_at(&self, k: usize) -> &DMatrix<f64> {
        &self.big_lambda[k - 1]
    }
}

/// Runs both adjoint recursions backward from the zero terminal conditions.
pub fn adjoints(instance: &GameInstance, theta: &IncentiveMatrix, moments: &MomentTrajectory) -> Result<AdjointState> {
    let cl = build_closed_loop(instance, theta)?;
    if moments.len() != instance.horizon() {
        return Err(Error::DimensionMismatch(format!(
            "moment trajectory has {} stages, horizon is {}",
            moments.len(),
            instance.horizon()
        )));
    }
    Ok(adjoints_with(&cl, moments))
}

fn adjoints_with(cl: &ClosedLoop, moments: &MomentTrajectory) -> AdjointState {
    let horizon = moments.len();
    let n = cl.a_theta().nrows();
    let a_theta = cl.a_theta();
    let a_theta_t = a_theta.transpose();
    let stage_cost = cl.stage_cost();
    let mean_weight = stage_cost * 2.0;

    let mut lambda = vec![DVector::zeros(n); horizon];
    let mut big_lambda = vec![DMatrix::zeros(n, n); horizon];
    // Index j holds stage j + 1; stage N is the zero terminal entry.
    for j in (0..horizon.saturating_sub(1)).rev() {
        let k = j + 1;
        lambda[j] = &mean_weight * &moments.mu[k] + &a_theta_t * &lambda[j + 1];
        big_lambda[j] = project_symmetric(&(stage_cost + &a_theta_t * &big_lambda[j + 1] * a_theta));
    }
    AdjointState { lambda, big_lambda }
}

/// Exact gradient `∇_Θ J` (n×m).
pub fn analytic_gradient(instance: &GameInstance, theta: &IncentiveMatrix) -> Result<DMatrix<f64>> {
    let cl = build_closed_loop(instance, theta)?;
    let moments = propagate_with(instance, &cl);
    Ok(gradient_with(instance, theta, &cl, &moments))
}

pub(crate) fn gradient_with(
    instance: &GameInstance,
    theta: &IncentiveMatrix,
    cl: &ClosedLoop,
    moments: &MomentTrajectory,
) -> DMatrix<f64> {
    let n = instance.state_dim();
    let adj = adjoints_with(cl, moments);
    let a_theta_t = cl.a_theta().transpose();

    // Second moments weight the direct dependence of S on Θ; the adjoint
    // terms weight the dependence through A_Θ.
    let mut second_moments = DMatrix::<f64>::zeros(n, n);
    let mut through_dynamics = DMatrix::<f64>::zeros(n, n);
    for (k, (mu, sigma)) in moments.mu.iter().zip(&moments.sigma).enumerate() {
        second_moments += sigma + mu * mu.transpose();
        through_dynamics += mu * adj.lambda[k].transpose() * 0.5 + sigma * &a_theta_t * &adj.big_lambda[k];
    }
    (second_moments * theta.as_matrix() + through_dynamics * instance.b()) * instance.r_inv()
}

/// Cost and gradient from one forward pass.
pub fn cost_and_gradient(instance: &GameInstance, theta: &IncentiveMatrix) -> Result<(f64, DMatrix<f64>)> {
    let cl = build_closed_loop(instance, theta)?;
    let moments = propagate_with(instance, &cl);
    let total = crate::cost::breakdown(instance, cl.stage_cost(), &moments).total;
    Ok((total, gradient_with(instance, theta, &cl, &moments)))
}

/// Central differences `[J(Θ + h E_ij) - J(Θ - h E_ij)] / 2h`.
pub fn finite_difference_gradient(instance: &GameInstance, theta: &IncentiveMatrix, step: f64) -> Result<DMatrix<f64>> {
    instance.check_theta(theta)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidConfig(format!("finite-difference step must be positive, got {step}")));
    }
    let (n, m) = theta.shape();
    let mut grad = DMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let mut plus = theta.as_matrix().clone();
            let mut minus = theta.as_matrix().clone();
            plus[(i, j)] += step;
            minus[(i, j)] -= step;
            let up = expected_cost(instance, &IncentiveMatrix::new(plus))?.total;
            let down = expected_cost(instance, &IncentiveMatrix::new(minus))?.total;
            grad[(i, j)] = (up - down) / (2.0 * step);
        }
    }
    Ok(grad)
}

/// `‖a - b‖_F / max(1, ‖a‖_F)`.
pub fn relative_discrepancy(reference: &DMatrix<f64>, other: &DMatrix<f64>) -> f64 {
    (reference - other).norm() / reference.norm().max(1.0)
}
