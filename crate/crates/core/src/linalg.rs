//! Dense kernels shared by the solvers: symmetric eigendecomposition,
//! Cholesky solves and ridge least squares.
//!
//! Matrices are `ndarray::Array2<f64>` (row-major). Factorizations are
//! delegated to `nalgebra` and converted back.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

pub type Matrix = Array2<f64>;

/// Relative pivot size below which a positive semi-definite system is
/// treated as singular.
const PIVOT_RTOL: f64 = 1e-13;

pub fn ensure_finite(m: ArrayView2<'_, f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} contains non-finite entries")))
    }
}

pub(crate) fn to_nalgebra(m: ArrayView2<'_, f64>) -> DMatrix<f64> {
    let (r, c) = m.dim();
    DMatrix::from_fn(r, c, |i, j| m[[i, j]])
}

pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

pub fn frobenius(m: ArrayView2<'_, f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `XᵀX`.
pub fn gram(x: ArrayView2<'_, f64>) -> Matrix {
    x.t().dot(&x)
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Orthonormal eigenvectors stored as columns.
    pub eigenvectors: Matrix,
    pub eigenvalues: Array1<f64>,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> Matrix {
        let scaled = &self.eigenvectors * &self.eigenvalues.view().insert_axis(Axis(0));
        scaled.dot(&self.eigenvectors.t())
    }
}

/// Symmetric eigendecomposition. The input is symmetrized as `(S + Sᵀ)/2`.
pub fn sym_eig(s: ArrayView2<'_, f64>) -> Result<SpectralDecomposition> {
    let (r, c) = s.dim();
    if r != c {
        return Err(Error::invalid(format!("sym_eig needs a square matrix, got {r}x{c}")));
    }
    ensure_finite(s, "symmetric matrix")?;
    let sym = Array2::from_shape_fn((r, r), |(i, j)| 0.5 * (s[[i, j]] + s[[j, i]]));
    let eig = DMatrix::from_fn(r, r, |i, j| sym[[i, j]]).symmetric_eigen();
    let mut u = Array2::from_shape_fn((r, r), |(i, j)| eig.eigenvectors[(i, j)]);
    let mut m = u.t().dot(&sym).dot(&u);
    jacobi_polish(&mut m, &mut u);

    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| m[[a, a]].total_cmp(&m[[b, b]]));
    let eigenvalues = Array1::from_iter(order.iter().map(|&k| m[[k, k]]));
    let eigenvectors = Array2::from_shape_fn((r, r), |(i, j)| u[[i, order[j]]]);
    Ok(SpectralDecomposition {
        eigenvectors,
        eigenvalues,
    })
}

/// Cyclic Jacobi sweeps on the nearly diagonal `m = UᵀSU`, accumulating the
/// rotations into `u`, until the off-diagonal mass is at rounding level.
fn jacobi_polish(m: &mut Matrix, u: &mut Matrix) {
    let n = m.nrows();
    let total = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    if total == 0.0 {
        return;
    }
    let off = |m: &Matrix| {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += m[[i, j]] * m[[i, j]];
                }
            }
        }
        acc.sqrt()
    };
    let skip = 1e-17 * total / n as f64;
    for _ in 0..30 {
        if off(m) <= 1e-15 * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let mpq = m[[p, q]];
                if mpq.abs() <= skip {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * mpq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let (kp, kq) = (m[[k, p]], m[[k, q]]);
                    m[[k, p]] = c * kp - sn * kq;
                    m[[k, q]] = sn * kp + c * kq;
                }
                for k in 0..n {
                    let (pk, qk) = (m[[p, k]], m[[q, k]]);
                    m[[p, k]] = c * pk - sn * qk;
                    m[[q, k]] = sn * pk + c * qk;
                }
                m[[p, q]] = 0.0;
                m[[q, p]] = 0.0;
                for k in 0..n {
                    let (kp, kq) = (u[[k, p]], u[[k, q]]);
                    u[[k, p]] = c * kp - sn * kq;
                    u[[k, q]] = sn * kp + c * kq;
                }
            }
        }
    }
}

/// Solves `A X = B` for symmetric positive definite `A` by Cholesky.
///
/// Returns `SingularSystem` when the factorization fails or a pivot is
/// negligible relative to the largest diagonal entry.
pub fn solve_spd(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Matrix> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::invalid("solve_spd dimension mismatch"));
    }
    if n == 0 {
        return Ok(Array2::zeros((0, b.ncols())));
    }
    Ok(spd_factor(a)?(b))
}

/// Cholesky-factors `a` once and returns its solver.
fn spd_factor(a: ArrayView2<'_, f64>) -> Result<impl Fn(ArrayView2<'_, f64>) -> Matrix> {
    let n = a.nrows();
    let max_diag = (0..n).map(|i| a[[i, i]].abs()).fold(0.0, f64::max);
    if max_diag == 0.0 {
        return Err(Error::SingularSystem);
    }
    let chol = to_nalgebra(a).cholesky().ok_or(Error::SingularSystem)?;
    let l = chol.l_dirty();
    let min_pivot = (0..n).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(min_pivot > PIVOT_RTOL * max_diag) {
        return Err(Error::SingularSystem);
    }
    Ok(move |b: ArrayView2<'_, f64>| from_nalgebra(&chol.solve(&to_nalgebra(b))))
}

/// Cholesky factor `L` of an SPD matrix `S = L Lᵀ`.
pub struct CholeskyFactor {
    lower: DMatrix<f64>,
}

impl CholeskyFactor {
    pub fn new(s: ArrayView2<'_, f64>) -> Result<Self> {
        let chol = to_nalgebra(s).cholesky().ok_or(Error::SingularSystem)?;
        Ok(Self { lower: chol.l() })
    }

    /// `L⁻¹ B`.
    pub fn solve_lower(&self, b: ArrayView2<'_, f64>) -> Matrix {
        let x = self.lower.solve_lower_triangular(&to_nalgebra(b)).expect("nonzero pivots");
        from_nalgebra(&x)
    }

    /// `L⁻ᵀ B`.
    pub fn solve_upper(&self, b: ArrayView2<'_, f64>) -> Matrix {
        let x = self.lower.tr_solve_lower_triangular(&to_nalgebra(b)).expect("nonzero pivots");
        from_nalgebra(&x)
    }

    /// `Lᵀ B`.
    pub fn mul_upper(&self, b: ArrayView2<'_, f64>) -> Matrix {
        from_nalgebra(&(self.lower.transpose() * to_nalgebra(b)))
    }
}

/// Ridge least squares.
///
/// Minimizes `(1/n)‖T − F M‖²_F + λ‖M‖²_F`, i.e. solves
/// `(FᵀF + nλI) M = FᵀT`.
pub fn ridge_solve(
    features: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    lambda: f64,
) -> Result<Matrix> {
    let (n, p) = features.dim();
    if n == 0 {
        return Err(Error::invalid("ridge_solve needs at least one row"));
    }
    if targets.nrows() != n {
        return Err(Error::invalid(format!(
            "ridge_solve: {n} feature rows but {} target rows",
            targets.nrows()
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("ridge weight must be finite and >= 0, got {lambda}")));
    }
    ensure_finite(features, "features")?;
    ensure_finite(targets, "targets")?;
    let mut normal = gram(features);
    let shift = n as f64 * lambda;
    for i in 0..p {
        normal[[i, i]] += shift;
    }
    if p == 0 {
        return Ok(Array2::zeros((0, targets.ncols())));
    }
    let solve = spd_factor(normal.view())?;
    let mut m = solve(features.t().dot(&targets).view());
    // Two steps of iterative refinement against the original design.
    for _ in 0..2 {
        let resid = features.t().dot(&(&targets - &features.dot(&m))) - &m * shift;
        m += &solve(resid.view());
    }
    Ok(m)
}
