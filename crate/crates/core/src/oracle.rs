//! Brute-force reference solvers used to verify the closed forms.
//!
//! These are deliberately naive: they build the vectorized normal equations
//! explicitly and solve them by Gaussian elimination, sharing no code with
//! the spectral solvers they check.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Largest `D·p` the Kronecker oracle accepts.
pub const KRON_ORACLE_MAX_UNKNOWNS: usize = 256;

/// Minimizes `(1/n) Σ ‖rᵢ − Wᵀ A zᵢ‖² + λ‖A‖²_F` over dense `A` (D×p) by
/// assembling the `(Dp)×(Dp)` normal system one design row at a time.
pub fn kron_sandwich_oracle(
    residuals: ArrayView2<'_, f64>,
    top: ArrayView2<'_, f64>,
    features: ArrayView2<'_, f64>,
    lambda: f64,
) -> Result<Matrix> {
    let (n, d) = residuals.dim();
    let (big_d, d2) = top.dim();
    let (n2, p) = features.dim();
    if d != d2 || n != n2 || n == 0 {
        return Err(Error::invalid(format!(
            "oracle dims: R {n}x{d}, W {big_d}x{d2}, Z {n2}x{p}"
        )));
    }
    let m = big_d * p;
    if m > KRON_ORACLE_MAX_UNKNOWNS {
        return Err(Error::invalid(format!("oracle limited to D*p <= 256, got {m}")));
    }
    let mut normal = Array2::<f64>::zeros((m, m));
    let mut rhs = vec![0.0; m];
    let mut row = vec![0.0; m];
    for i in 0..n {
        for c in 0..d {
            // (Wᵀ A zᵢ)_c = Σ_{k,j} W[k,c] z[i,j] A[k,j]
            for k in 0..big_d {
                for j in 0..p {
                    row[k * p + j] = top[[k, c]] * features[[i, j]];
                }
            }
            let r = residuals[[i, c]];
            for a in 0..m {
                if row[a] == 0.0 {
                    continue;
                }
                rhs[a] += row[a] * r;
                for b in 0..m {
                    normal[[a, b]] += row[a] * row[b];
                }
            }
        }
    }
    for a in 0..m {
        normal[[a, a]] += n as f64 * lambda;
    }
    let solution = gauss_solve(normal, rhs)?;
    Ok(Array2::from_shape_vec((big_d, p), solution).expect("shape"))
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Matrix, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[[x, col]].abs().total_cmp(&a[[y, col]].abs()))
            .unwrap();
        if a[[pivot, col]].abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::SingularSystem);
        }
        if pivot != col {
            for j in 0..n {
                a.swap([pivot, j], [col, j]);
            }
            b.swap(pivot, col);
        }
        for r in col + 1..n {
            let f = a[[r, col]] / a[[col, col]];
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[[r, j]] -= f * a[[col, j]];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|j| a[[r, j]] * x[j]).sum();
        x[r] = (b[r] - s) / a[[r, r]];
    }
    Ok(x)
}
