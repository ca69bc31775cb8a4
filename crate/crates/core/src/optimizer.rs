//! Local minimization of the expected leader cost by gradient descent with
//! Armijo backtracking.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::expected_cost;
use crate::dynamics::steady_state_with;
use crate::error::{Error, Result};
use crate::gradient::cost_and_gradient;
use crate::model::{build_closed_loop, GameInstance, IncentiveMatrix, StabilitySummary};

/// Line search gives up below this step length.
pub const MIN_STEP: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Stop once the Frobenius norm of the gradient drops to this value.
    pub grad_tol: f64,
    pub initial_step: f64,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
    /// Starting incentive; zero when absent.
    pub theta_init: Option<IncentiveMatrix>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            grad_tol: 1e-8,
            initial_step: 1.0,
            backtrack_factor: 0.5,
            armijo_c: 1e-4,
            theta_init: None,
        }
    }
}

impl OptimizerConfig {
    pub fn check(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return Err(Error::InvalidConfig(format!("grad_tol must be positive, got {}", self.grad_tol)));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "initial_step must be positive, got {}",
                self.initial_step
            )));
        }
        for (name, value) in [("backtrack_factor", self.backtrack_factor), ("armijo_c", self.armijo_c)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {value}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    StepUnderflow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignReport {
    pub theta_final: IncentiveMatrix,
    /// Cost at the initial point and after every accepted step.
    pub cost_trace: Vec<f64>,
    pub grad_norm_trace: Vec<f64>,
    pub theta_trace: Vec<IncentiveMatrix>,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub final_stability: StabilitySummary,
    /// Norm of the steady-state tracking error; absent if unstable.
    pub steady_state_error_norm: Option<f64>,
}

impl DesignReport {
    pub fn iterations(&self) -> usize {
        self.cost_trace.len() - 1
    }
}

/// Runs `Θ ← Θ - α ∇J(Θ)`, accepting `α` once
/// `J(Θ - α∇J) <= J(Θ) - c α ‖∇J‖²`.
pub fn optimize(instance: &GameInstance, config: &OptimizerConfig) -> Result<DesignReport> {
    config.check()?;
    let mut theta = match &config.theta_init {
        Some(theta) => {
            instance.check_theta(theta)?;
            theta.clone()
        }
        None => IncentiveMatrix::zeros(instance.state_dim(), instance.input_dim()),
    };

    let (mut cost, mut grad) = cost_and_gradient(instance, &theta)?;
    if !cost.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteCost {
            theta: theta.to_row_major(),
        });
    }
    let mut cost_trace = vec![cost];
    let mut grad_norm_trace = vec![grad.norm()];
    let mut theta_trace = vec![theta.clone()];

    let stop_reason = loop {
        let grad_sq = grad.norm_squared();
        if grad_sq.sqrt() <= config.grad_tol {
            break StopReason::GradientTolerance;
        }
        if cost_trace.len() > config.max_iters {
            break StopReason::MaxIterations;
        }

        let mut step = config.initial_step;
        let accepted = loop {
            if step < MIN_STEP {
                break None;
            }
            let trial = IncentiveMatrix::new(theta.as_matrix() - &grad * step);
            let trial_cost = expected_cost(instance, &trial)?.total;
            if trial_cost.is_finite() && trial_cost <= cost - config.armijo_c * step * grad_sq {
                break Some(trial);
            }
            step *= config.backtrack_factor;
        };
        let Some(next) = accepted else {
            break StopReason::StepUnderflow;
        };

        let (next_cost, next_grad) = cost_and_gradient(instance, &next)?;
        if !next_cost.is_finite() || next_grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteCost {
                theta: next.to_row_major(),
            });
        }
        theta = next;
        cost = next_cost;
        grad = next_grad;
        cost_trace.push(cost);
        grad_norm_trace.push(grad.norm());
        theta_trace.push(theta.clone());
    };

    let cl = build_closed_loop(instance, &theta)?;
    let steady_state_error_norm = steady_state_with(&cl).ok().map(|e| e.norm());
    Ok(DesignReport {
        theta_final: theta,
        cost_trace,
        grad_norm_trace,
        theta_trace,
        converged: stop_reason == StopReason::GradientTolerance,
        stop_reason,
        final_stability: cl.summary(),
        steady_state_error_norm,
    })
}

/// Expected cost at every grid point, in grid order.
pub fn sweep_cost(instance: &GameInstance, theta_grid: &[IncentiveMatrix]) -> Result<Vec<(IncentiveMatrix, f64)>> {
    if theta_grid.is_empty() {
        return Err(Error::InvalidConfig("sweep grid is empty".into()));
    }
    theta_grid
        .par_iter()
        .map(|theta| Ok((theta.clone(), expected_cost(instance, theta)?.total)))
        .collect()
}

/// Evenly spaced scalar grid from `start` to `stop` inclusive.
pub fn scalar_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0 && stop >= start, "grid needs start <= stop and a positive step");
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| start + step * i as f64).collect()
}

/// Converts scalar grid points to 1×1 incentive matrices.
pub fn scalar_thetas(values: &[f64]) -> Vec<IncentiveMatrix> {
    values.iter().map(|&v| IncentiveMatrix::new(DMatrix::from_element(1, 1, v))).collect()
}
