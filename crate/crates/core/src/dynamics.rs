//! Follower best response, moment propagation, roll-outs and steady state.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{build_closed_loop, project_symmetric, ClosedLoop, GameInstance, IncentiveMatrix};

/// Roll-outs abort once any state component exceeds this magnitude.
pub const DIVERGENCE_GUARD: f64 = 1e12;

/// The follower's myopic best response `u = ½ R⁻¹ Θᵀ e` to tracking error `e`.
///
/// This is the unique minimizer of `vᵀ R v - eᵀ Θ v`.
pub fn follower_response(
    instance: &GameInstance,
    theta: &IncentiveMatrix,
    error: &DVector<f64>,
) -> Result<DVector<f64>> {
    instance.check_theta(theta)?;
    if error.len() != instance.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "error has length {}, expected {}",
            error.len(),
            instance.state_dim()
        )));
    }
    Ok(instance.r_inv() * (theta.as_matrix().transpose() * error) * 0.5)
}

/// Mean and covariance of the tracking error for stages `0..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTrajectory {
    pub mu: Vec<DVector<f64>>,
    pub sigma: Vec<DMatrix<f64>>,
}

impl MomentTrajectory {
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

/// Propagates `μ_{k+1} = A_Θ μ_k + (A - I) xref` and `Σ_{k+1} = A_Θ Σ_k A_Θᵀ`.
pub fn propagate_moments(instance: &GameInstance, theta: &IncentiveMatrix) -> Result<MomentTrajectory> {
    let cl = build_closed_loop(instance, theta)?;
    Ok(propagate_with(instance, &cl))
}

pub(crate) fn propagate_with(instance: &GameInstance, cl: &ClosedLoop) -> MomentTrajectory {
    let horizon = instance.horizon();
    let a_theta = cl.a_theta();
    let mut mu = Vec::with_capacity(horizon);
    let mut sigma = Vec::with_capacity(horizon);
    mu.push(instance.mu0().clone());
    sigma.push(instance.sigma0().clone());
    for k in 1..horizon {
        let next_mu = a_theta * &mu[k - 1] + cl.drift();
        let next_sigma = project_symmetric(&(a_theta * &sigma[k - 1] * a_theta.transpose()));
        mu.push(next_mu);
        sigma.push(next_sigma);
    }
    MomentTrajectory { mu, sigma }
}

/// A realized closed-loop roll-out of `N` stages.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    /// Incentive payment `(x_k - xref)ᵀ Θ u_k` from leader to follower.
    pub payment: Vec<f64>,
    /// `eᵀ Q e` per stage.
    pub leader_stage_cost: Vec<f64>,
    /// `uᵀ R u` per stage.
    pub follower_stage_cost: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Realized leader objective: tracking cost plus payments.
    pub fn leader_total(&self) -> f64 {
        self.leader_stage_cost
            .iter()
            .zip(&self.payment)
            .map(|(c, p)| c + p)
            .sum()
    }

    /// Realized follower objective: effort cost minus payments received.
    pub fn follower_net_total(&self) -> f64 {
        self.follower_stage_cost
            .iter()
            .zip(&self.payment)
            .map(|(c, p)| c - p)
            .sum()
    }
}

/// Rolls the closed loop forward from `x0` for the instance horizon.
pub fn simulate(instance: &GameInstance, theta: &IncentiveMatrix, x0: &DVector<f64>) -> Result<Trajectory> {
    let cl = build_closed_loop(instance, theta)?;
    simulate_with(instance, theta, &cl, x0)
}

pub(crate) fn simulate_with(
    instance: &GameInstance,
    theta: &IncentiveMatrix,
    cl: &ClosedLoop,
    x0: &DVector<f64>,
) -> Result<Trajectory> {
    let n = instance.state_dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "x0 has length {}, expected {n}",
            x0.len()
        )));
    }
    let horizon = instance.horizon();
    let theta = theta.as_matrix();
    let mut traj = Trajectory {
        x: Vec::with_capacity(horizon),
        u: Vec::with_capacity(horizon),
        payment: Vec::with_capacity(horizon),
        leader_stage_cost: Vec::with_capacity(horizon),
        follower_stage_cost: Vec::with_capacity(horizon),
    };

    let mut x = x0.clone();
    for stage in 0..horizon {
        if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_GUARD) {
            return Err(Error::NonFinite { stage });
        }
        let e = &x - instance.xref();
        let u = cl.gain() * &e;
        traj.payment.push(e.dot(&(theta * &u)));
        traj.leader_stage_cost.push(e.dot(&(instance.q() * &e)));
        traj.follower_stage_cost.push(u.dot(&(instance.r() * &u)));
        let next = instance.a() * &x + instance.b() * &u;
        traj.x.push(x);
        traj.u.push(u);
        x = next;
    }
    Ok(traj)
}

/// Fixed point `(I - A_Θ)⁻¹ (A - I) xref` of the error dynamics.
pub fn steady_state_error(instance: &GameInstance, theta: &IncentiveMatrix) -> Result<DVector<f64>> {
    let cl = build_closed_loop(instance, theta)?;
    steady_state_with(&cl)
}

pub(crate) fn steady_state_with(cl: &ClosedLoop) -> Result<DVector<f64>> {
    if !cl.is_schur() {
        return Err(Error::Unstable {
            spectral_radius: cl.spectral_radius(),
        });
    }
    let n = cl.a_theta().nrows();
    let lhs = DMatrix::identity(n, n) - cl.a_theta();
    // I - A_Θ is nonsingular whenever A_Θ is Schur.
    lhs.lu().solve(cl.drift()).ok_or(Error::Unstable {
        spectral_radius: cl.spectral_radius(),
    })
}

/// Draws initial states `x0 = xref + μ0 + L z` with `L` the symmetric
/// square root of `Σ0` and `z` standard normal.
#[derive(Debug, Clone)]
pub struct InitialStateSampler {
    mean: DVector<f64>,
    sqrt_cov: DMatrix<f64>,
}

impl InitialStateSampler {
    pub fn new(instance: &GameInstance) -> Self {
        let eig = SymmetricEigen::new(instance.sigma0().clone());
        let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let sqrt_cov = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
        Self {
            mean: instance.xref() + instance.mu0(),
            sqrt_cov,
        }
    }

    /// Initial state for sample `index` of the stream identified by `seed`.
    ///
    /// Each sample owns its generator, seeded with `seed ^ index`, so draws do
    /// not depend on how samples are spread across workers.
    pub fn sample(&self, seed: u64, index: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index);
        let z = DVector::from_fn(self.mean.len(), |_, _| StandardNormal.sample(&mut rng));
        &self.mean + &self.sqrt_cov * z
    }
}

/// Simulates `samples` trajectories from sampled initial states.
///
/// Output order follows the sample index regardless of thread count.
pub fn sample_trajectories(
    instance: &GameInstance,
    theta: &IncentiveMatrix,
    samples: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    let cl = build_closed_loop(instance, theta)?;
    let sampler = InitialStateSampler::new(instance);
    (0..samples as u64)
        .into_par_iter()
        .map(|i| simulate_with(instance, theta, &cl, &sampler.sample(seed, i)))
        .collect()
}
