//! Expected leader cost, the social-cost identity and a Monte Carlo estimator.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dynamics::{propagate_with, sample_trajectories, MomentTrajectory, Trajectory};
use crate::error::Result;
use crate::model::{build_closed_loop, GameInstance, IncentiveMatrix};

/// Expected leader cost and its split into tracking cost and payments.
#[derive(Debug, Clone, PartialEq)]
pub struct CostBreakdown {
    pub total: f64,
    pub tracking: f64,
    pub payment: f64,
    /// Expected leader cost of each stage.
    pub per_stage: Vec<f64>,
}

/// `E[eᵀ M e] = Tr(M Σ) + μᵀ M μ`.
fn quadratic_expectation(weight: &DMatrix<f64>, mu: &DVector<f64>, sigma: &DMatrix<f64>) -> f64 {
    (weight * sigma).trace() + mu.dot(&(weight * mu))
}

/// `J(Θ) = Σ_k Tr(S Σ_k) + μ_kᵀ S μ_k`.
pub fn expected_cost(instance: &GameInstance, theta: &IncentiveMatrix) -> Result<CostBreakdown> {
    let cl = build_closed_loop(instance, theta)?;
    let moments = propagate_with(instance, &cl);
    Ok(breakdown(instance, cl.stage_cost(), &moments))
}

pub(crate) fn breakdown(instance: &GameInstance, stage_cost: &DMatrix<f64>, moments: &MomentTrajectory) -> CostBreakdown {
    let per_stage: Vec<f64> = moments
        .mu
        .iter()
        .zip(&moments.sigma)
        .map(|(mu, sigma)| quadratic_expectation(stage_cost, mu, sigma))
        .collect();
    let tracking: f64 = moments
        .mu
        .iter()
        .zip(&moments.sigma)
        .map(|(mu, sigma)| quadratic_expectation(instance.q(), mu, sigma))
        .sum();
    let total: f64 = per_stage.iter().sum();
    CostBreakdown {
        total,
        tracking,
        payment: total - tracking,
        per_stage,
    }
}

/// Realized social cost `Σ_k eᵀ Q e + uᵀ R u`; payments cancel between the
/// two players.
pub fn social_cost(traj: &Trajectory, _instance: &GameInstance) -> f64 {
    traj.leader_stage_cost
        .iter()
        .zip(&traj.follower_stage_cost)
        .map(|(l, f)| l + f)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Sample mean and standard error of `values`, accumulated in order.
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    // Welford; exact when all values coincide.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let count = values.len();
    if count < 2 {
        return (mean, 0.0);
    }
    let variance = m2 / (count - 1) as f64;
    (mean, (variance / count as f64).sqrt())
}

/// Estimates `J(Θ)` from `samples` roll-outs with Gaussian initial states.
///
/// Deterministic in `seed` and independent of the rayon pool size.
pub fn monte_carlo_cost(
    instance: &GameInstance,
    theta: &IncentiveMatrix,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    let costs: Vec<f64> = sample_trajectories(instance, theta, samples, seed)?
        .par_iter()
        .map(Trajectory::leader_total)
        .collect();
    let (estimate, std_error) = mean_and_std_error(&costs);
    Ok(MonteCarloEstimate {
        estimate,
        std_error,
        samples,
    })
}
