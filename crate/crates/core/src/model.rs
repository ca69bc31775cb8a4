//! Domain types for the linear-quadratic game with a bilinear incentive.
//!
//! A leader pays a myopic follower `p = (x - xref)ᵀ Θ u` per stage. The
//! follower controls `x_{k+1} = A x_k + B u_k` and pays `uᵀ R u` for effort;
//! the leader pays `(x - xref)ᵀ Q (x - xref)` plus the incentive.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Absolute tolerance for the symmetry check before projection.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Smallest admissible eigenvalue of the initial covariance.
pub const PSD_TOL: f64 = 1e-10;

/// Unvalidated description of a game, as read from a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct GameParameters {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub xref: DVector<f64>,
    pub horizon: usize,
    /// Mean of the initial tracking error `x0 - xref`.
    pub mu0: DVector<f64>,
    /// Covariance of the initial tracking error.
    pub sigma0: DMatrix<f64>,
}

/// A validated game instance. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct GameInstance {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    xref: DVector<f64>,
    horizon: usize,
    mu0: DVector<f64>,
    sigma0: DMatrix<f64>,
}

/// Checks every invariant of `params` and returns the validated instance
/// with `Q`, `R` and `Sigma0` projected onto the symmetric matrices.
pub fn validate(params: GameParameters) -> Result<GameInstance> {
    let GameParameters {
        a,
        b,
        q,
        r,
        xref,
        horizon,
        mu0,
        sigma0,
    } = params;

    let n = a.nrows();
    let m = b.ncols();
    if n == 0 || m == 0 {
        return Err(Error::DimensionMismatch(format!(
            "state and input dimensions must be positive (n = {n}, m = {m})"
        )));
    }
    if horizon < 1 {
        return Err(Error::BadHorizon(horizon));
    }
    check_shape("A", &a, n, n)?;
    check_shape("B", &b, n, m)?;
    check_shape("Q", &q, n, n)?;
    check_shape("R", &r, m, m)?;
    check_shape("Sigma0", &sigma0, n, n)?;
    if xref.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "xref has length {}, expected {n}",
            xref.len()
        )));
    }
    if mu0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "mu0 has length {}, expected {n}",
            mu0.len()
        )));
    }

    for (name, entries) in [
        ("A", a.as_slice()),
        ("B", b.as_slice()),
        ("Q", q.as_slice()),
        ("R", r.as_slice()),
        ("xref", xref.as_slice()),
        ("mu0", mu0.as_slice()),
        ("Sigma0", sigma0.as_slice()),
    ] {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { name });
        }
    }

    let q = symmetrize(&q).ok_or(Error::NotPositiveDefinite { name: "Q" })?;
    let r = symmetrize(&r).ok_or(Error::NotPositiveDefinite { name: "R" })?;
    let sigma0 = symmetrize(&sigma0).ok_or(Error::NotPsd { name: "Sigma0" })?;

    if Cholesky::new(q.clone()).is_none() {
        return Err(Error::NotPositiveDefinite { name: "Q" });
    }
    let r_inv = match Cholesky::new(r.clone()) {
        Some(chol) => project_symmetric(&chol.inverse()),
        None => return Err(Error::NotPositiveDefinite { name: "R" }),
    };

    let min_eig = SymmetricEigen::new(sigma0.clone()).eigenvalues.min();
    if min_eig < -PSD_TOL {
        return Err(Error::NotPsd { name: "Sigma0" });
    }

    Ok(GameInstance {
        a,
        b,
        q,
        r,
        r_inv,
        xref,
        horizon,
        mu0,
        sigma0,
    })
}

fn check_shape(name: &str, mat: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if mat.shape() != (rows, cols) {
        return Err(Error::DimensionMismatch(format!(
            "{name} is {}x{}, expected {rows}x{cols}",
            mat.nrows(),
            mat.ncols()
        )));
    }
    Ok(())
}

/// Projects onto the symmetric matrices, or `None` if the asymmetry
/// exceeds [`SYMMETRY_TOL`].
fn symmetrize(mat: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let asym = (mat - mat.transpose()).amax();
    (asym <= SYMMETRY_TOL).then(|| project_symmetric(mat))
}

pub(crate) fn project_symmetric(mat: &DMatrix<f64>) -> DMatrix<f64> {
    (mat + mat.transpose()) * 0.5
}

impl GameInstance {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Inverse of the follower weight, symmetric.
    pub fn r_inv(&self) -> &DMatrix<f64> {
        &self.r_inv
    }

    pub fn xref(&self) -> &DVector<f64> {
        &self.xref
    }

    pub fn mu0(&self) -> &DVector<f64> {
        &self.mu0
    }

    pub fn sigma0(&self) -> &DMatrix<f64> {
        &self.sigma0
    }

    /// Constant drift `(A - I) xref` of the error dynamics.
    pub fn drift(&self) -> DVector<f64> {
        &self.a * &self.xref - &self.xref
    }

    /// The raw parameters, suitable for re-validation.
    pub fn parameters(&self) -> GameParameters {
        GameParameters {
            a: self.a.clone(),
            b: self.b.clone(),
            q: self.q.clone(),
            r: self.r.clone(),
            xref: self.xref.clone(),
            horizon: self.horizon,
            mu0: self.mu0.clone(),
            sigma0: self.sigma0.clone(),
        }
    }

    /// Same game with a different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        if horizon < 1 {
            return Err(Error::BadHorizon(horizon));
        }
        Ok(Self {
            horizon,
            ..self.clone()
        })
    }

    /// Same game with a different initial-error distribution.
    pub fn with_initial(&self, mu0: DVector<f64>, sigma0: DMatrix<f64>) -> Result<Self> {
        validate(GameParameters {
            mu0,
            sigma0,
            ..self.parameters()
        })
    }

    pub fn check_theta(&self, theta: &IncentiveMatrix) -> Result<()> {
        let expected = (self.state_dim(), self.input_dim());
        if theta.shape() != expected {
            return Err(Error::DimensionMismatch(format!(
                "theta is {}x{}, expected {}x{}",
                theta.nrows(),
                theta.ncols(),
                expected.0,
                expected.1
            )));
        }
        Ok(())
    }
}

/// The leader's incentive parameter Θ (n×m).
#[derive(Debug, Clone, PartialEq)]
pub struct IncentiveMatrix(DMatrix<f64>);

impl IncentiveMatrix {
    pub fn new(theta: DMatrix<f64>) -> Self {
        Self(theta)
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self(DMatrix::zeros(n, m))
    }

    pub fn scalar(theta: f64) -> Self {
        Self(DMatrix::from_element(1, 1, theta))
    }

    /// Builds Θ from row-major entries.
    pub fn from_row_slice(n: usize, m: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * m {
            return Err(Error::DimensionMismatch(format!(
                "theta needs {} entries for {n}x{m}, got {}",
                n * m,
                entries.len()
            )));
        }
        Ok(Self(DMatrix::from_row_slice(n, m, entries)))
    }

    /// Row-major entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.transpose().as_slice().to_vec()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }
}

impl From<DMatrix<f64>> for IncentiveMatrix {
    fn from(theta: DMatrix<f64>) -> Self {
        Self(theta)
    }
}

/// Closed-loop quantities induced by a fixed incentive.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    a_theta: DMatrix<f64>,
    gain: DMatrix<f64>,
    drift: DVector<f64>,
    stage_cost: DMatrix<f64>,
    spectral_radius: f64,
}

/// Forms `A_Θ = A + ½ B R⁻¹ Θᵀ`, the drift `(A - I) xref` and the stage
/// cost matrix `S = Q + ½ Θ R⁻¹ Θᵀ`.
pub fn build_closed_loop(instance: &GameInstance, theta: &IncentiveMatrix) -> Result<ClosedLoop> {
    instance.check_theta(theta)?;
    let theta = theta.as_matrix();
    // Follower feedback u = K e with K = ½ R⁻¹ Θᵀ.
    let gain = instance.r_inv() * theta.transpose() * 0.5;
    let a_theta = instance.a() + instance.b() * &gain;
    let stage_cost = project_symmetric(&(instance.q() + theta * &gain));
    let spectral_radius = spectral_radius(&a_theta);
    Ok(ClosedLoop {
        a_theta,
        gain,
        drift: instance.drift(),
        stage_cost,
        spectral_radius,
    })
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(mat: &DMatrix<f64>) -> f64 {
    mat.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

impl ClosedLoop {
    pub fn a_theta(&self) -> &DMatrix<f64> {
        &self.a_theta
    }

    /// Follower feedback gain `½ R⁻¹ Θᵀ` (m×n).
    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    pub fn drift(&self) -> &DVector<f64> {
        &self.drift
    }

    pub fn stage_cost(&self) -> &DMatrix<f64> {
        &self.stage_cost
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    pub fn is_schur(&self) -> bool {
        self.spectral_radius < 1.0
    }

    pub fn summary(&self) -> StabilitySummary {
        StabilitySummary {
            spectral_radius: self.spectral_radius,
            is_schur: self.is_schur(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilitySummary {
    pub spectral_radius: f64,
    pub is_schur: bool,
}
