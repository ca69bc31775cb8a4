//! Scalar (n = m = 1) analysis: closed-form cost, geometric sums and the
//! asymptotic optimal incentives for long horizons and expensive followers.
//!
//! All entry points take the initial error *variance* `var0`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate, GameInstance, GameParameters};

/// Within this distance of a pole (`a = 1` or `a² = 1`) the closed-form
/// geometric sums are replaced by direct summation.
pub const SINGULAR_BAND: f64 = 0.05;

/// `A` closer than this to 1 is treated as `A = 1`.
pub const UNIT_A_TOL: f64 = 1e-12;

/// Partial sums of powers of a single base `a` over `k = 0..N-1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSums {
    /// `Σ a^k = (1 - a^N) / (1 - a)`
    pub first: f64,
    /// `Σ a^{2k} = (1 - a^{2N}) / (1 - a²)`
    pub second: f64,
    /// `d/da Σ a^k`
    pub d_first: f64,
    /// `d/da Σ a^{2k}`
    pub d_second: f64,
}

pub fn geometric_sums(a: f64, horizon: usize) -> PowerSums {
    let n = horizon as f64;
    let near_one = (1.0 - a).abs() < SINGULAR_BAND;
    let near_pm_one = (1.0 - a * a).abs() < SINGULAR_BAND;

    let (first, d_first) = if near_one {
        direct_first(a, horizon)
    } else {
        let a_n = a.powi(horizon as i32);
        let a_nm1 = a.powi(horizon as i32 - 1);
        let one_minus = 1.0 - a;
        (
            (1.0 - a_n) / one_minus,
            ((1.0 - a_n) - n * a_nm1 * one_minus) / (one_minus * one_minus),
        )
    };
    let (second, d_second) = if near_pm_one {
        direct_second(a, horizon)
    } else {
        let a_2n = a.powi(2 * horizon as i32);
        let a_2nm1 = a.powi(2 * horizon as i32 - 1);
        let one_minus = 1.0 - a * a;
        (
            (1.0 - a_2n) / one_minus,
            (2.0 * a * (1.0 - a_2n) - 2.0 * n * a_2nm1 * one_minus) / (one_minus * one_minus),
        )
    };
    PowerSums {
        first,
        second,
        d_first,
        d_second,
    }
}

fn direct_first(a: f64, horizon: usize) -> (f64, f64) {
    let mut sum = 0.0;
    let mut deriv = 0.0;
    let mut power = 1.0; // a^k
    let mut prev = 0.0; // a^{k-1}
    for k in 0..horizon {
        sum += power;
        deriv += k as f64 * prev;
        prev = power;
        power *= a;
    }
    (sum, deriv)
}

fn direct_second(a: f64, horizon: usize) -> (f64, f64) {
    let mut sum = 0.0;
    let mut deriv = 0.0;
    let a2 = a * a;
    let mut power = 1.0; // a^{2k}
    for k in 0..horizon {
        sum += power;
        if k > 0 {
            // 2k a^{2k-1}
            deriv += 2.0 * k as f64 * a.powi(2 * k as i32 - 1);
        }
        power *= a2;
    }
    (sum, deriv)
}

/// Sums of the partial geometric series `c_k = Σ_{j<k} a^j`, accumulated
/// stage by stage:
/// `Σ c_k = (N - α₁)/(1 - a)`, `Σ a^k c_k = (α₁ - α₂)/(1 - a)`,
/// `Σ c_k² = (N - 2α₁ + α₂)/(1 - a)²`.
#[derive(Debug, Clone, Copy)]
struct TransientSums {
    c: f64,
    ac: f64,
    cc: f64,
}

fn transient_sums(a: f64, horizon: usize) -> TransientSums {
    let mut out = TransientSums { c: 0.0, ac: 0.0, cc: 0.0 };
    let mut c = 0.0;
    let mut power = 1.0;
    for _ in 0..horizon {
        out.c += c;
        out.ac += power * c;
        out.cc += c * c;
        c = 1.0 + a * c;
        power *= a;
    }
    out
}

/// Geometric sums of the open-loop `A` and the closed-loop `A_Θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricSums {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha_theta1: f64,
    pub alpha_theta2: f64,
    pub d_alpha1_da: f64,
    pub d_alpha2_da: f64,
}

/// A scalar game with `B > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarInstance {
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub r: f64,
    pub xref: f64,
    pub horizon: usize,
    pub mu0: f64,
    /// Variance of the initial tracking error.
    pub var0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Interior,
    Boundary,
    AEqualsOne,
    RLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticResult {
    pub theta_star: f64,
    pub regime: Regime,
    pub stability_interval: (f64, f64),
}

/// `Γ(A)` and `Γ'(A)` of the expensive-follower limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HorizonAggregate {
    pub gamma: f64,
    pub gamma_prime: f64,
}

impl ScalarInstance {
    pub fn check(&self) -> Result<()> {
        let finite = [self.a, self.b, self.q, self.r, self.xref, self.mu0, self.var0]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidScalar("all parameters must be finite".into()));
        }
        if self.b <= 0.0 {
            return Err(Error::InvalidScalar(format!("B must be positive, got {}", self.b)));
        }
        if self.q <= 0.0 {
            return Err(Error::InvalidScalar(format!("Q must be positive, got {}", self.q)));
        }
        if self.r <= 0.0 {
            return Err(Error::InvalidScalar(format!("R must be positive, got {}", self.r)));
        }
        if self.var0 < 0.0 {
            return Err(Error::InvalidScalar(format!("var0 must be nonnegative, got {}", self.var0)));
        }
        if self.horizon < 1 {
            return Err(Error::BadHorizon(self.horizon));
        }
        Ok(())
    }

    /// Reads a 1×1 game. Fails for other dimensions or `B <= 0`.
    pub fn from_game(game: &GameInstance) -> Result<Self> {
        if game.state_dim() != 1 || game.input_dim() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "scalar analysis needs n = m = 1, got n = {}, m = {}",
                game.state_dim(),
                game.input_dim()
            )));
        }
        let s = Self {
            a: game.a()[(0, 0)],
            b: game.b()[(0, 0)],
            q: game.q()[(0, 0)],
            r: game.r()[(0, 0)],
            xref: game.xref()[0],
            horizon: game.horizon(),
            mu0: game.mu0()[0],
            var0: game.sigma0()[(0, 0)],
        };
        s.check()?;
        Ok(s)
    }

    pub fn to_game(&self) -> Result<GameInstance> {
        self.check()?;
        let one = |v: f64| DMatrix::from_element(1, 1, v);
        validate(GameParameters {
            a: one(self.a),
            b: one(self.b),
            q: one(self.q),
            r: one(self.r),
            xref: DVector::from_element(1, self.xref),
            horizon: self.horizon,
            mu0: DVector::from_element(1, self.mu0),
            sigma0: one(self.var0),
        })
    }

    /// `A_Θ = A + BΘ / 2R`.
    pub fn a_theta(&self, theta: f64) -> f64 {
        self.a + self.b * theta / (2.0 * self.r)
    }

    /// Effective stage weight `Q + Θ² / 2R`.
    pub fn stage_weight(&self, theta: f64) -> f64 {
        self.q + theta * theta / (2.0 * self.r)
    }

    fn drift(&self) -> f64 {
        (self.a - 1.0) * self.xref
    }

    pub fn geometric_sums(&self, theta: f64) -> GeometricSums {
        let open = geometric_sums(self.a, self.horizon);
        let closed = geometric_sums(self.a_theta(theta), self.horizon);
        GeometricSums {
            alpha1: open.first,
            alpha2: open.second,
            alpha_theta1: closed.first,
            alpha_theta2: closed.second,
            d_alpha1_da: open.d_first,
            d_alpha2_da: open.d_second,
        }
    }

    /// Open interval of Θ with `|A_Θ| < 1`.
    pub fn stability_interval(&self) -> (f64, f64) {
        (
            -2.0 * self.r * (1.0 + self.a) / self.b,
            2.0 * self.r * (1.0 - self.a) / self.b,
        )
    }

    /// Expected leader cost over the horizon in closed form.
    pub fn closed_form_cost(&self, theta: f64) -> f64 {
        let a_theta = self.a_theta(theta);
        let g = self.drift();
        let second_moment = self.var0 + self.mu0 * self.mu0;
        let n = self.horizon as f64;

        let bracket = if (1.0 - a_theta).abs() < SINGULAR_BAND {
            let t = transient_sums(a_theta, self.horizon);
            let alpha2 = geometric_sums(a_theta, self.horizon).second;
            second_moment * alpha2 + 2.0 * g * self.mu0 * t.ac + g * g * t.cc
        } else {
            let sums = geometric_sums(a_theta, self.horizon);
            let scaled = g / (1.0 - a_theta);
            second_moment * sums.second
                + 2.0 * scaled * self.mu0 * (sums.first - sums.second)
                + scaled * scaled * (n - 2.0 * sums.first + sums.second)
        };
        self.stage_weight(theta) * bracket
    }

    /// Long-run average stage cost `(Q + Θ²/2R) ((A-1) xref / (1 - A_Θ))²`.
    pub fn steady_state_avg_cost(&self, theta: f64) -> Result<f64> {
        let a_theta = self.a_theta(theta);
        if a_theta.abs() >= 1.0 {
            return Err(Error::Unstable {
                spectral_radius: a_theta.abs(),
            });
        }
        let offset = self.drift() / (1.0 - a_theta);
        Ok(self.stage_weight(theta) * offset * offset)
    }

    /// Minimizer of the infinite-horizon objective.
    ///
    /// For `A != 1` this minimizes the average stage cost: the unique critical
    /// point `BQ/(A-1)` when it stabilizes the loop, otherwise the lower edge
    /// of the stability interval. For `A = 1` the steady-state error vanishes
    /// and the transient cost is minimized by the negative root of
    /// `Θ² - BQΘ - 2QR = 0`.
    pub fn theta_opt_infinite_horizon(&self) -> Result<AsymptoticResult> {
        self.check()?;
        let stability_interval = self.stability_interval();
        if (self.a - 1.0).abs() <= UNIT_A_TOL {
            let half_bq = self.b * self.q / 2.0;
            let theta_star = half_bq - (half_bq * half_bq + 2.0 * self.q * self.r).sqrt();
            return Ok(AsymptoticResult {
                theta_star,
                regime: Regime::AEqualsOne,
                stability_interval,
            });
        }
        if self.xref == 0.0 {
            return Err(Error::DegenerateReference);
        }
        let critical = self.b * self.q / (self.a - 1.0);
        let a_crit = self.a_theta(critical);
        if a_crit > -1.0 && a_crit < 1.0 {
            Ok(AsymptoticResult {
                theta_star: critical,
                regime: Regime::Interior,
                stability_interval,
            })
        } else {
            Ok(AsymptoticResult {
                theta_star: stability_interval.0,
                regime: Regime::Boundary,
                stability_interval,
            })
        }
    }

    /// `Γ(A)` and `Γ'(A)` with `x0 = μ0 + xref`.
    pub fn horizon_aggregate(&self) -> HorizonAggregate {
        let sums = geometric_sums(self.a, self.horizon);
        let n = self.horizon as f64;
        let x0 = self.mu0 + self.xref;
        let xref = self.xref;
        let second_moment = self.var0 + x0 * x0;

        let gamma = second_moment * sums.second - 2.0 * xref * x0 * sums.first + n * xref * xref;

        // (N - α₁)/(1 - A) and (α₁ - α₂)/(1 - A), by summation near A = 1.
        let (lag, overlap) = if (1.0 - self.a).abs() < SINGULAR_BAND {
            let t = transient_sums(self.a, self.horizon);
            (t.c, t.ac)
        } else {
            let one_minus = 1.0 - self.a;
            ((n - sums.first) / one_minus, (sums.first - sums.second) / one_minus)
        };
        let gamma_prime = second_moment * sums.d_second - 2.0 * xref * x0 * sums.d_first
            + 2.0 * xref * (xref * lag - x0 * overlap);

        HorizonAggregate { gamma, gamma_prime }
    }

    /// Finite limit of the minimizer as the follower weight `R → ∞`:
    /// `-(QB/2) Γ'(A) / Γ(A)`.
    pub fn theta_opt_r_infinity(&self) -> Result<AsymptoticResult> {
        self.check()?;
        let agg = self.horizon_aggregate();
        if agg.gamma <= 1e-14 {
            return Err(Error::DegenerateGamma { gamma: agg.gamma });
        }
        Ok(AsymptoticResult {
            theta_star: -0.5 * self.q * self.b * agg.gamma_prime / agg.gamma,
            regime: Regime::RLimit,
            stability_interval: (f64::NEG_INFINITY, f64::INFINITY),
        })
    }

    pub fn with_horizon(&self, horizon: usize) -> Self {
        Self { horizon, ..*self }
    }

    pub fn with_r(&self, r: f64) -> Self {
        Self { r, ..*self }
    }
}

/// Global minimizer of `f` on `[lo, hi]`: a uniform grid of `points`
/// followed by successive local refinement down to `tol`.
///
/// Non-finite values count as `+∞`. Ties go to the smallest argument.
pub fn grid_argmin<F>(f: F, lo: f64, hi: f64, points: usize, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64 + Sync,
{
    assert!(hi > lo && points >= 3, "grid_argmin needs a nonempty interval");
    let mut lo = lo;
    let mut hi = hi;
    let mut count = points;
    loop {
        let step = (hi - lo) / (count - 1) as f64;
        let values: Vec<(f64, f64)> = (0..count)
            .into_par_iter()
            .map(|i| {
                let x = lo + step * i as f64;
                let v = f(x);
                (x, if v.is_nan() { f64::INFINITY } else { v })
            })
            .collect();
        let best = values
            .iter()
            .copied()
            .fold((f64::NAN, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
        let best = if best.0.is_nan() { values[0] } else { best };
        if step <= tol {
            return best;
        }
        lo = (best.0 - step).max(lo);
        hi = (best.0 + step).min(hi);
        count = 21;
    }
}
