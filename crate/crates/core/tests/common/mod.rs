#![allow(dead_code)]

use incentive_forge::{validate, GameInstance, GameParameters, IncentiveMatrix, ScalarInstance};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn scalar_fixture() -> ScalarInstance {
    ScalarInstance {
        a: 0.4,
        b: 1.0,
        q: 1.0,
        r: 1.0,
        xref: 1.0,
        horizon: 10,
        mu0: -1.0,
        var0: 0.09,
    }
}

/// Double integrator with `x0 = 0`, `xref = (1, 0)` and a deterministic start.
pub fn double_integrator(horizon: usize) -> GameInstance {
    validate(GameParameters {
        a: DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 1.0]),
        b: DMatrix::from_row_slice(2, 1, &[0.5, 1.0]),
        q: DMatrix::identity(2, 2),
        r: DMatrix::from_element(1, 1, 2.0),
        xref: DVector::from_vec(vec![1.0, 0.0]),
        horizon,
        mu0: DVector::from_vec(vec![-1.0, 0.0]),
        sigma0: DMatrix::zeros(2, 2),
    })
    .unwrap()
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Uniform entries rescaled into the Frobenius unit ball.
pub fn unit_ball_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let m = uniform_matrix(rng, rows, cols);
    let radius: f64 = rng.random_range(0.0..1.0);
    let norm = m.norm();
    if norm == 0.0 {
        m
    } else {
        m * (radius / norm)
    }
}

pub fn unit_ball_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_column_slice(unit_ball_matrix(rng, len, 1).as_slice())
}

/// `L Lᵀ + shift I` with `L` in the unit ball.
pub fn random_spd(rng: &mut ChaCha8Rng, dim: usize, shift: f64) -> DMatrix<f64> {
    let l = unit_ball_matrix(rng, dim, dim);
    &l * l.transpose() + DMatrix::identity(dim, dim) * shift
}

pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, m: usize, horizon: usize) -> GameInstance {
    validate(GameParameters {
        a: unit_ball_matrix(rng, n, n),
        b: unit_ball_matrix(rng, n, m),
        q: random_spd(rng, n, 0.0),
        r: random_spd(rng, m, 0.1),
        xref: unit_ball_vector(rng, n),
        horizon,
        mu0: unit_ball_vector(rng, n),
        sigma0: random_spd(rng, n, 0.0),
    })
    .unwrap()
}

pub fn random_theta(rng: &mut ChaCha8Rng, n: usize, m: usize) -> IncentiveMatrix {
    IncentiveMatrix::new(unit_ball_matrix(rng, n, m))
}

/// Scalar cost by direct moment recursion.
pub fn scalar_rollout_cost(s: &ScalarInstance, theta: f64) -> f64 {
    let a_theta = s.a + 0.5 * s.b * theta / s.r;
    let weight = s.q + 0.5 * theta * theta / s.r;
    let drift = (s.a - 1.0) * s.xref;
    let (mut mu, mut var) = (s.mu0, s.var0);
    let mut total = 0.0;
    for _ in 0..s.horizon {
        total += weight * (var + mu * mu);
        mu = a_theta * mu + drift;
        var *= a_theta * a_theta;
    }
    total
}

/// Average stage cost at the fixed point of the error recursion.
pub fn scalar_steady_cost(s: &ScalarInstance, theta: f64) -> f64 {
    let a_theta = s.a + 0.5 * s.b * theta / s.r;
    let weight = s.q + 0.5 * theta * theta / s.r;
    let e = (s.a - 1.0) * s.xref / (1.0 - a_theta);
    weight * e * e
}

/// Minimizer over a uniform grid, refined by nested grids around the best
/// point until the spacing reaches `resolution`.
pub fn brute_argmin(f: impl Fn(f64) -> f64, lo: f64, hi: f64, resolution: f64) -> f64 {
    let mut step = (hi - lo) / 4000.0;
    let mut best = lo;
    let mut best_val = f64::INFINITY;
    let mut x = lo;
    while x <= hi {
        let v = f(x);
        if v < best_val {
            best_val = v;
            best = x;
        }
        x += step;
    }
    while step > resolution {
        let (a, b) = ((best - step).max(lo), (best + step).min(hi));
        step = (step / 100.0).max(resolution);
        let mut x = a;
        while x <= b {
            let v = f(x);
            if v < best_val {
                best_val = v;
                best = x;
            }
            x += step;
        }
    }
    best
}

/// Minimizer on the plain grid `lo + i h` inside the open interval.
pub fn plain_grid_argmin(f: impl Fn(f64) -> f64, lo: f64, hi: f64, h: f64) -> f64 {
    let count = ((hi - lo) / h).round() as usize;
    (1..count)
        .map(|i| lo + i as f64 * h)
        .map(|t| (t, f(t)))
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0
}
