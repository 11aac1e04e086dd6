//! Closed-form solvers for sandwiched least squares:
//!
//! ```text
//! J(A) = (1/n) Σᵢ ‖rᵢ − Wᵀ A zᵢ‖² + λ‖A‖²_F
//! ```
//!
//! with `A` a scalar multiple of the identity, a diagonal matrix, or a dense
//! `D×p` matrix. All three use the `nλ` scaling of the ridge term.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, frobenius, gram, solve_spd, sym_eig, Matrix};

/// Shape constraint on the block map `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SandwichStructure {
    Scalar,
    Diagonal,
    Dense,
}

impl SandwichStructure {
    /// Scalar and diagonal maps need as many features as representation
    /// dimensions.
    pub fn requires_square(self) -> bool {
        !matches!(self, SandwichStructure::Dense)
    }
}

/// Borrowed problem data: residuals `R` (n×d), top predictor `W` (D×d),
/// features `Z` (n×p) and the ridge weight.
#[derive(Debug, Clone, Copy)]
pub struct SandwichProblem<'a> {
    residuals: ArrayView2<'a, f64>,
    top: ArrayView2<'a, f64>,
    features: ArrayView2<'a, f64>,
    lambda: f64,
}

impl<'a> SandwichProblem<'a> {
    pub fn new(
        residuals: ArrayView2<'a, f64>,
        top: ArrayView2<'a, f64>,
        features: ArrayView2<'a, f64>,
        lambda: f64,
    ) -> Result<Self> {
        let (n, d) = residuals.dim();
        if n == 0 {
            return Err(Error::invalid("sandwich problem needs at least one row"));
        }
        if features.nrows() != n {
            return Err(Error::invalid(format!(
                "residuals have {n} rows but features have {}",
                features.nrows()
            )));
        }
        if top.ncols() != d {
            return Err(Error::invalid(format!(
                "residual width {d} does not match top predictor width {}",
                top.ncols()
            )));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("ridge weight must be finite and >= 0, got {lambda}")));
        }
        ensure_finite(residuals, "residuals")?;
        ensure_finite(top, "top predictor")?;
        ensure_finite(features, "features")?;
        Ok(Self {
            residuals,
            top,
            features,
            lambda,
        })
    }

    pub fn n(&self) -> usize {
        self.residuals.nrows()
    }

    /// Representation width `D`.
    pub fn width(&self) -> usize {
        self.top.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn require_square(&self, what: &str) -> Result<()> {
        if self.feature_dim() != self.width() {
            return Err(Error::invalid(format!(
                "{what} map needs p = D, got p = {} and D = {}",
                self.feature_dim(),
                self.width()
            )));
        }
        Ok(())
    }

    /// `J(A)` for a dense `A` (D×p).
    pub fn objective(&self, a: ArrayView2<'_, f64>) -> f64 {
        let pred = self.features.dot(&a.t()).dot(&self.top);
        let resid = &self.residuals - &pred;
        let fit = resid.iter().map(|v| v * v).sum::<f64>() / self.n() as f64;
        fit + self.lambda * a.iter().map(|v| v * v).sum::<f64>()
    }
}

/// A solved block map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockMap {
    Scalar(f64),
    Diagonal(Array1<f64>),
    Dense(Matrix),
}

impl BlockMap {
    pub fn structure(&self) -> SandwichStructure {
        match self {
            BlockMap::Scalar(_) => SandwichStructure::Scalar,
            BlockMap::Diagonal(_) => SandwichStructure::Diagonal,
            BlockMap::Dense(_) => SandwichStructure::Dense,
        }
    }

    /// Zero map of the given structure for a `width × feature_dim` block.
    pub fn zeros(structure: SandwichStructure, width: usize, feature_dim: usize) -> Self {
        match structure {
            SandwichStructure::Scalar => BlockMap::Scalar(0.0),
            SandwichStructure::Diagonal => BlockMap::Diagonal(Array1::zeros(width)),
            SandwichStructure::Dense => BlockMap::Dense(Array2::zeros((width, feature_dim))),
        }
    }

    /// Rows `A zᵢ` stacked into an n×D matrix.
    pub fn apply(&self, features: ArrayView2<'_, f64>) -> Matrix {
        match self {
            BlockMap::Scalar(a) => features.to_owned() * *a,
            BlockMap::Diagonal(a) => &features * &a.view().insert_axis(Axis(0)),
            BlockMap::Dense(a) => features.dot(&a.t()),
        }
    }

    /// Dense `D×p` embedding.
    pub fn to_dense(&self, width: usize, feature_dim: usize) -> Matrix {
        match self {
            BlockMap::Scalar(a) => {
                let mut m = Array2::zeros((width, feature_dim));
                for k in 0..width.min(feature_dim) {
                    m[[k, k]] = *a;
                }
                m
            }
            BlockMap::Diagonal(a) => {
                let mut m = Array2::zeros((width, feature_dim));
                for k in 0..a.len().min(feature_dim) {
                    m[[k, k]] = a[k];
                }
                m
            }
            BlockMap::Dense(a) => a.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            BlockMap::Scalar(a) => a.is_finite(),
            BlockMap::Diagonal(a) => a.iter().all(|v| v.is_finite()),
            BlockMap::Dense(a) => a.iter().all(|v| v.is_finite()),
        }
    }
}

/// `A = ⟨R, ZW⟩_F / (‖ZW‖²_F + nλ)`.
pub fn sandwich_scalar(problem: &SandwichProblem<'_>) -> Result<f64> {
    problem.require_square("scalar")?;
    let zw = problem.features.dot(&problem.top);
    let num: f64 = zw.iter().zip(problem.residuals.iter()).map(|(a, b)| a * b).sum();
    let den = zw.iter().map(|v| v * v).sum::<f64>() + problem.n() as f64 * problem.lambda;
    if den == 0.0 {
        return Err(Error::DegenerateProblem(
            "projected features ZW vanish and no ridge term is present".into(),
        ));
    }
    Ok(num / den)
}

/// Solves `(C + λI) a = b` with `C = (WWᵀ ⊙ ZᵀZ)/n`, `b = diag(W Rᵀ Z)/n`.
pub fn sandwich_diag(problem: &SandwichProblem<'_>) -> Result<Array1<f64>> {
    problem.require_square("diagonal")?;
    let n = problem.n() as f64;
    let ww = problem.top.dot(&problem.top.t());
    let zz = gram(problem.features);
    let mut c = (ww * zz) / n;
    for k in 0..c.nrows() {
        c[[k, k]] += problem.lambda;
    }
    // diag(W Rᵀ Z)_k = Σᵢ (R Wᵀ)[i,k] Z[i,k]
    let rw = problem.residuals.dot(&problem.top.t());
    let b = (rw * problem.features).sum_axis(Axis(0)) / n;
    let b = b.insert_axis(Axis(1));
    let a = solve_spd(c.view(), b.view())?;
    Ok(a.column(0).to_owned())
}

/// Dense solution through the eigenbases of `WWᵀ` and `ZᵀZ`:
/// `A = U[(Uᵀ W Rᵀ Z V) ⊘ (nλ𝟏 + λᵂ ⊗ λᶻ)]Vᵀ`. Requires `λ > 0`.
pub fn sandwich_dense(problem: &SandwichProblem<'_>) -> Result<Matrix> {
    if !(problem.lambda > 0.0) {
        return Err(Error::invalid(format!(
            "dense sandwich solver needs lambda > 0, got {}",
            problem.lambda
        )));
    }
    Ok(dense_spectral(problem, false))
}

/// Minimum-norm minimizer of `J` for the dense case, accepting `λ = 0`.
///
/// Identical to [`sandwich_dense`] for `λ > 0`. Eigen-directions whose
/// denominator is negligible are zeroed, which picks the minimum-norm
/// solution among the minimizers when the problem is rank deficient.
pub fn sandwich_dense_min_norm(problem: &SandwichProblem<'_>) -> Result<Matrix> {
    Ok(dense_spectral(problem, true))
}

fn dense_spectral(problem: &SandwichProblem<'_>, truncate: bool) -> Matrix {
    let ww = problem.top.dot(&problem.top.t());
    let zz = gram(problem.features);
    // Inputs are finite and symmetric by construction.
    let w_eig = sym_eig(ww.view()).expect("finite WWᵀ");
    let z_eig = sym_eig(zz.view()).expect("finite ZᵀZ");
    let (u, v) = (&w_eig.eigenvectors, &z_eig.eigenvectors);

    let wrz = problem.top.dot(&problem.residuals.t()).dot(&problem.features);
    let mut core = u.t().dot(&wrz).dot(v);
    let nl = problem.n() as f64 * problem.lambda;
    let max_den = nl
        + w_eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()))
            * z_eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let cutoff = if truncate { 1e-12 * max_den } else { 0.0 };
    for ((k, j), value) in core.indexed_iter_mut() {
        // Roundoff can push eigenvalues of a PSD matrix slightly negative.
        let den = nl + w_eig.eigenvalues[k].max(0.0) * z_eig.eigenvalues[j].max(0.0);
        if den <= cutoff {
            *value = 0.0;
        } else {
            *value /= den;
        }
    }
    u.dot(&core).dot(&v.t())
}

/// Dispatches on the requested structure.
///
/// The dense branch uses the minimum-norm variant when `λ = 0` so that
/// unregularized boosting remains well defined.
pub fn solve(problem: &SandwichProblem<'_>, structure: SandwichStructure) -> Result<BlockMap> {
    let map = match structure {
        SandwichStructure::Scalar => BlockMap::Scalar(sandwich_scalar(problem)?),
        SandwichStructure::Diagonal => BlockMap::Diagonal(sandwich_diag(problem)?),
        SandwichStructure::Dense if problem.lambda > 0.0 => BlockMap::Dense(sandwich_dense(problem)?),
        SandwichStructure::Dense => BlockMap::Dense(sandwich_dense_min_norm(problem)?),
    };
    Ok(map)
}

/// Relative residual of the dense stationarity equation
/// `W Rᵀ Z = W Wᵀ A Zᵀ Z + nλ A`.
pub fn dense_stationarity_residual(problem: &SandwichProblem<'_>, a: ArrayView2<'_, f64>) -> f64 {
    let lhs = problem.top.dot(&problem.residuals.t()).dot(&problem.features);
    let ww = problem.top.dot(&problem.top.t());
    let zz = gram(problem.features);
    let rhs = ww.dot(&a).dot(&zz) + &a * (problem.n() as f64 * problem.lambda);
    frobenius((&lhs - &rhs).view()) / frobenius(lhs.view()).max(frobenius(rhs.view())).max(1e-300)
}
