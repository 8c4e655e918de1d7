//! Shared fixtures and reference implementations for the integration tests.
//!
//! The reference routines here deliberately avoid the library's own linear
//! algebra so they can serve as independent oracles.

#![allow(dead_code)]

use dictlearn::{seeded_uniform_matrix, DenseMatrix, Dictionary, InitMode, RngState};

/// Unit-norm dictionary with entries drawn from `[-1, 1)` before normalization.
pub fn signed_dictionary(n: usize, k: usize, rng: &mut RngState) -> Dictionary {
    let raw = seeded_uniform_matrix(n, k, -1.0, 1.0, rng).unwrap();
    Dictionary::from_matrix(&raw, InitMode::Loaded, None).unwrap()
}

/// `k×samples` codes with exactly `sparsity` nonzeros per column, magnitudes
/// in `[1, 2)` times `scale` and random signs.
pub fn sparse_codes(
    k: usize,
    samples: usize,
    sparsity: usize,
    scale: f64,
    rng: &mut RngState,
) -> DenseMatrix {
    let mut x = DenseMatrix::zeros(k, samples);
    for i in 0..samples {
        let mut used = Vec::with_capacity(sparsity);
        while used.len() < sparsity {
            let j = rng.below(k);
            if !used.contains(&j) {
                used.push(j);
                let sign = if rng.uniform(0.0, 1.0) < 0.5 {
                    -1.0
                } else {
                    1.0
                };
                x.set(j, i, sign * scale * rng.uniform(1.0, 2.0));
            }
        }
    }
    x
}

/// Samples `D·X` from a planted signed dictionary and `sparsity`-sparse codes.
pub fn planted(
    n: usize,
    k: usize,
    samples: usize,
    sparsity: usize,
    scale: f64,
    seed: u64,
) -> (Dictionary, DenseMatrix) {
    let mut rng = RngState::new(seed);
    let d = signed_dictionary(n, k, &mut rng);
    let x = sparse_codes(k, samples, sparsity, scale, &mut rng);
    let y = d.atoms().matmul(&x).unwrap();
    (d, y)
}

/// The 16×32 step fixture: a random starting dictionary and 200 samples that
/// are 4-sparse in a different planted dictionary plus uniform noise.
pub fn step_fixture() -> (Dictionary, DenseMatrix) {
    let (_, clean) = planted(16, 32, 200, 4, 10.0, 16032);
    let mut rng = RngState::new(77);
    let noise = seeded_uniform_matrix(16, 200, -0.5, 0.5, &mut rng).unwrap();
    let y = DenseMatrix::from_fn(16, 200, |r, c| clean.get(r, c) + noise.get(r, c));
    let d0 = dictlearn::random_dictionary(16, 32, &mut RngState::new(5)).unwrap();
    (d0, y)
}

pub fn naive_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.cols(), b.rows());
    DenseMatrix::from_fn(a.rows(), b.cols(), |i, j| {
        (0..a.cols()).map(|p| a.get(i, p) * b.get(p, j)).sum()
    })
}

/// Solves `A·X = B` for square `A` by Gaussian elimination with partial
/// pivoting. Returns `None` when a pivot vanishes.
pub fn gauss_solve(a: &DenseMatrix, b: &DenseMatrix) -> Option<DenseMatrix> {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    assert_eq!(b.rows(), n);
    let m = b.cols();
    let mut aug: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| a.get(i, j))
                .chain((0..m).map(|j| b.get(i, j)))
                .collect()
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| aug[x][col].abs().total_cmp(&aug[y][col].abs()))?;
        if aug[piv][col].abs() < 1e-300 {
            return None;
        }
        aug.swap(col, piv);
        for row in col + 1..n {
            let f = aug[row][col] / aug[col][col];
            if f != 0.0 {
                for j in col..n + m {
                    aug[row][j] -= f * aug[col][j];
                }
            }
        }
    }
    let mut x = DenseMatrix::zeros(n, m);
    for j in 0..m {
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|p| aug[i][p] * x.get(p, j)).sum();
            x.set(i, j, (aug[i][n + j] - s) / aug[i][i]);
        }
    }
    Some(x)
}

/// `Y·Xᵀ·(X·Xᵀ)⁻¹` through the normal equations, for full-row-rank `X`.
pub fn normal_equations_dictionary(y: &DenseMatrix, x: &DenseMatrix) -> Option<DenseMatrix> {
    let xt = x.transpose();
    let gram = naive_matmul(x, &xt);
    let rhs = naive_matmul(x, &y.transpose());
    // (X·Xᵀ)·Dᵀ = X·Yᵀ
    gauss_solve(&gram, &rhs).map(|dt| dt.transpose())
}

pub fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Path of a file under `tests/fixtures`.
pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}
