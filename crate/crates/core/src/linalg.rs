//! Pseudo-inverse and the least-squares dictionary update.

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

fn to_faer(m: &DenseMatrix) -> Mat<f64> {
    Mat::from_fn(m.rows(), m.cols(), |r, c| m.get(r, c))
}

fn from_faer(m: MatRef<'_, f64>) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
}

/// Thin SVD `A = P·diag(s)·Qᵀ` with the reciprocal singular values already
/// thresholded at `max(rows, cols)·ε·σ_max`.
struct TruncatedSvd {
    p: Mat<f64>,
    inv_s: Vec<f64>,
    q: Mat<f64>,
    rank: usize,
}

fn truncated_svd(a: &DenseMatrix) -> Result<TruncatedSvd> {
    let (rows, cols) = a.shape();
    let wide = rows < cols;
    // faer's thin SVD is driven on the tall orientation.
    let tall = if wide {
        to_faer(&a.transpose())
    } else {
        to_faer(a)
    };
    let svd = tall
        .thin_svd()
        .map_err(|_| Error::SvdNonConvergence { rows, cols })?;
    let s = svd.S().column_vector();
    let sigma_max = if s.nrows() > 0 { s[0] } else { 0.0 };
    let tau = rows.max(cols) as f64 * f64::EPSILON * sigma_max;
    let mut rank = 0;
    let inv_s = (0..s.nrows())
        .map(|i| {
            if s[i] > tau {
                rank += 1;
                1.0 / s[i]
            } else {
                0.0
            }
        })
        .collect();
    let (u, v) = (svd.U().to_owned(), svd.V().to_owned());
    let (p, q) = if wide { (v, u) } else { (u, v) };
    Ok(TruncatedSvd { p, inv_s, q, rank })
}

/// Moore–Penrose pseudo-inverse via SVD. Singular values at or below
/// `max(rows, cols)·ε·σ_max` are treated as zero.
pub fn pseudo_inverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_finite() {
        return Err(Error::NonFinite("pseudo_inverse input"));
    }
    let svd = truncated_svd(a)?;
    // A⁺ = Q·diag(1/s)·Pᵀ
    let mut q_scaled = svd.q;
    for (j, &w) in svd.inv_s.iter().enumerate() {
        for i in 0..q_scaled.nrows() {
            q_scaled[(i, j)] *= w;
        }
    }
    let pinv = &q_scaled * svd.p.transpose();
    Ok(from_faer(pinv.as_ref()))
}

/// Numerical rank under the pseudo-inverse threshold.
pub fn numerical_rank(a: &DenseMatrix) -> Result<usize> {
    Ok(truncated_svd(a)?.rank)
}

/// Result of [`least_squares_dictionary`].
#[derive(Debug, Clone)]
pub struct LeastSquaresUpdate {
    pub dictionary: DenseMatrix,
    /// Set when the code matrix was entirely zero; the dictionary is then all
    /// zeros and every atom needs repair.
    pub degenerate: bool,
}

/// The MOD update `D = Y·X⁺`, the minimizer of `‖Y − D·X‖_F` over all `n×K`
/// matrices for fixed codes `X`.
pub fn least_squares_dictionary(y: &DenseMatrix, x: &DenseMatrix) -> Result<LeastSquaresUpdate> {
    if y.cols() != x.cols() {
        return Err(Error::ShapeMismatch {
            op: "least_squares_dictionary",
            left: y.shape(),
            right: x.shape(),
        });
    }
    if !y.is_finite() || !x.is_finite() {
        return Err(Error::NonFinite("least_squares_dictionary input"));
    }
    if x.as_slice().iter().all(|&v| v == 0.0) {
        return Ok(LeastSquaresUpdate {
            dictionary: DenseMatrix::zeros(y.rows(), x.rows()),
            degenerate: true,
        });
    }
    // X = P·S·Qᵀ, so Y·X⁺ = (Y·Q)·S⁺·Pᵀ without forming the M×K pseudo-inverse.
    let svd = truncated_svd(x)?;
    let mut yq = &to_faer(y) * &svd.q;
    for (j, &w) in svd.inv_s.iter().enumerate() {
        for i in 0..yq.nrows() {
            yq[(i, j)] *= w;
        }
    }
    let d = &yq * svd.p.transpose();
    let dictionary = from_faer(d.as_ref());
    if !dictionary.is_finite() {
        return Err(Error::NonFinite("least-squares dictionary"));
    }
    Ok(LeastSquaresUpdate {
        dictionary,
        degenerate: false,
    })
}
