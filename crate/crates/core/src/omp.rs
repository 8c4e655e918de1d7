//! Orthogonal Matching Pursuit and sparse code containers.

use rayon::prelude::*;

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::matrix::{dot, sum_sq, DenseMatrix};

/// Default relative residual at which OMP stops before spending its budget.
pub const DEFAULT_OMP_TOL: f64 = 1e-9;

/// An atom whose distance from the span of the already selected atoms is
/// below this makes the least-squares subsystem singular.
const SINGULAR_TOL: f64 = 1e-10;

/// Sparse coefficient vector: atom indices in selection order plus their
/// coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseCode {
    support: Vec<usize>,
    coefficients: Vec<f64>,
    dim: usize,
}

impl SparseCode {
    pub fn empty(dim: usize) -> Self {
        SparseCode {
            support: Vec::new(),
            coefficients: Vec::new(),
            dim,
        }
    }

    pub fn new(support: Vec<usize>, coefficients: Vec<f64>, dim: usize) -> Result<Self> {
        if support.len() != coefficients.len() {
            return Err(Error::InvalidArgument(format!(
                "{} support indices for {} coefficients",
                support.len(),
                coefficients.len()
            )));
        }
        for (i, &j) in support.iter().enumerate() {
            if j >= dim {
                return Err(Error::InvalidArgument(format!("atom index {j} >= {dim}")));
            }
            if support[..i].contains(&j) {
                return Err(Error::InvalidArgument(format!(
                    "atom {j} repeated in support"
                )));
            }
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("sparse code coefficients"));
        }
        Ok(SparseCode {
            support,
            coefficients,
            dim,
        })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of nonzeros.
    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.support
            .iter()
            .copied()
            .zip(self.coefficients.iter().copied())
    }

    /// Scatters the code into a dense length-`dim` vector.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for (j, c) in self.iter() {
            v[j] = c;
        }
        v
    }

    fn accumulate(&mut self, atom: usize, value: f64) {
        match self.support.iter().position(|&j| j == atom) {
            Some(p) => self.coefficients[p] += value,
            None => {
                self.support.push(atom);
                self.coefficients.push(value);
            }
        }
    }

    fn drop_zeros(&mut self) {
        let mut i = 0;
        while i < self.support.len() {
            if self.coefficients[i] == 0.0 {
                self.support.remove(i);
                self.coefficients.remove(i);
            } else {
                i += 1;
            }
        }
    }
}

/// One code per sample, all over the same `dim` atoms and within `k_budget`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseCodeSet {
    codes: Vec<SparseCode>,
    k_budget: usize,
    dim: usize,
}

impl SparseCodeSet {
    pub fn new(codes: Vec<SparseCode>, k_budget: usize, dim: usize) -> Result<Self> {
        for (i, c) in codes.iter().enumerate() {
            if c.dim != dim {
                return Err(Error::InvalidArgument(format!(
                    "code {i} has dim {} instead of {dim}",
                    c.dim
                )));
            }
            if c.len() > k_budget {
                return Err(Error::InvalidArgument(format!(
                    "code {i} has {} atoms, budget is {k_budget}",
                    c.len()
                )));
            }
        }
        Ok(SparseCodeSet {
            codes,
            k_budget,
            dim,
        })
    }

    pub fn codes(&self) -> &[SparseCode] {
        &self.codes
    }

    pub fn k_budget(&self) -> usize {
        self.k_budget
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Dense `K×M` code matrix, zeros off-support.
    pub fn to_matrix(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.dim.max(1), self.codes.len().max(1));
        for (i, code) in self.codes.iter().enumerate() {
            for (j, c) in code.iter() {
                m.set(j, i, c);
            }
        }
        m
    }

    /// Reads a dense `K×M` code matrix; support order is ascending atom index.
    pub fn from_matrix(m: &DenseMatrix, k_budget: usize) -> Result<Self> {
        let codes = (0..m.cols())
            .map(|i| {
                let (support, coefficients) = (0..m.rows())
                    .filter_map(|j| {
                        let v = m.get(j, i);
                        (v != 0.0).then_some((j, v))
                    })
                    .unzip();
                SparseCode::new(support, coefficients, m.rows())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(codes, k_budget, m.rows())
    }

    /// Rewrites the codes after the dictionary columns were rescaled and some
    /// atoms replaced.
    ///
    /// Coefficient `j` is multiplied by `scales[j]`. Entries on a duplicate
    /// atom move onto the atom it duplicated (with its sign); entries on other
    /// replaced atoms are dropped.
    pub(crate) fn rescale_and_remap(
        &mut self,
        scales: &[f64],
        replaced: &[usize],
        duplicates: &[(usize, usize, f64)],
    ) {
        for code in &mut self.codes {
            let old = std::mem::replace(code, SparseCode::empty(self.dim));
            for (j, c) in old.iter() {
                let v = c * scales[j];
                if let Some(&(_, kept, sign)) = duplicates.iter().find(|d| d.0 == j) {
                    code.accumulate(kept, sign * v);
                } else if !replaced.contains(&j) {
                    code.accumulate(j, v);
                }
            }
            code.drop_zeros();
        }
    }
}

/// Histogram of support sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportStats {
    /// `histogram[s]` counts codes with exactly `s` atoms, `s = 0..=k_budget`.
    /// Empty for an empty set.
    pub histogram: Vec<usize>,
    /// `None` for an empty set.
    pub mean: Option<f64>,
}

pub fn support_stats(codes: &SparseCodeSet) -> SupportStats {
    if codes.is_empty() {
        return SupportStats {
            histogram: Vec::new(),
            mean: None,
        };
    }
    let mut histogram = vec![0; codes.k_budget + 1];
    let mut total = 0usize;
    for c in &codes.codes {
        histogram[c.len()] += 1;
        total += c.len();
    }
    SupportStats {
        histogram,
        mean: Some(total as f64 / codes.len() as f64),
    }
}

/// Coefficient-wise sum over the union of supports, no re-fitting.
/// Coefficients that cancel to exactly zero are dropped.
pub fn code_sum(a: &SparseCode, b: &SparseCode) -> Result<SparseCode> {
    if a.dim != b.dim {
        return Err(Error::InvalidArgument(format!(
            "code dims differ: {} vs {}",
            a.dim, b.dim
        )));
    }
    let mut out = a.clone();
    for (j, c) in b.iter() {
        out.accumulate(j, c);
    }
    out.drop_zeros();
    Ok(out)
}

/// Elementwise [`code_sum`] of two sets; the result budget is the sum of the
/// input budgets.
pub fn code_set_sum(a: &SparseCodeSet, b: &SparseCodeSet) -> Result<SparseCodeSet> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "code sets hold {} and {} samples",
            a.len(),
            b.len()
        )));
    }
    let codes = a
        .codes
        .iter()
        .zip(&b.codes)
        .map(|(x, y)| code_sum(x, y))
        .collect::<Result<Vec<_>>>()?;
    SparseCodeSet::new(codes, a.k_budget + b.k_budget, a.dim)
}

/// `D·x` for one code.
pub fn reconstruct(d: &Dictionary, code: &SparseCode) -> Vec<f64> {
    let atoms = d.atoms();
    let mut out = vec![0.0; atoms.rows()];
    for (j, c) in code.iter() {
        for (r, o) in out.iter_mut().enumerate() {
            *o += c * atoms.get(r, j);
        }
    }
    out
}

fn reconstruct_into(atoms_t: &DenseMatrix, code: &SparseCode, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (j, c) in code.iter() {
        for (o, a) in out.iter_mut().zip(atoms_t.row(j)) {
            *o += c * a;
        }
    }
}

/// `D·X` as an `n×M` matrix.
pub fn reconstruct_set(atoms: &DenseMatrix, codes: &SparseCodeSet) -> DenseMatrix {
    let atoms_t = atoms.transpose();
    let n = atoms.rows();
    let mut out_t = DenseMatrix::zeros(codes.len().max(1), n);
    out_t
        .as_mut_slice()
        .par_chunks_mut(n)
        .zip(codes.codes.par_iter())
        .for_each(|(row, code)| reconstruct_into(&atoms_t, code, row));
    out_t.transpose()
}

/// Per-sample `‖y_i − D·x_i‖₂`.
pub fn residual_norms(atoms: &DenseMatrix, y: &DenseMatrix, codes: &SparseCodeSet) -> Vec<f64> {
    let atoms_t = atoms.transpose();
    let y_t = y.transpose();
    let n = atoms.rows();
    codes
        .codes
        .par_iter()
        .enumerate()
        .map(|(i, code)| {
            let mut buf = vec![0.0; n];
            reconstruct_into(&atoms_t, code, &mut buf);
            buf.iter()
                .zip(y_t.row(i))
                .fold(0.0, |acc, (r, y)| acc + (y - r) * (y - r))
                .sqrt()
        })
        .collect()
}

/// `‖Y − D·X‖²_F`, summed over samples in index order.
pub fn residual_energy(atoms: &DenseMatrix, y: &DenseMatrix, codes: &SparseCodeSet) -> f64 {
    residual_norms(atoms, y, codes)
        .iter()
        .fold(0.0, |acc, r| acc + r * r)
}

/// A single OMP run with its residual history.
#[derive(Clone, Debug)]
pub struct OmpTrace {
    pub code: SparseCode,
    /// `‖r‖₂` after each selection; empty when nothing was selected.
    pub residual_norms: Vec<f64>,
    pub residual: Vec<f64>,
}

/// OMP on one signal, keeping the residual history.
pub fn omp_encode_traced(d: &Dictionary, y: &[f64], k: usize, tol: f64) -> Result<OmpTrace> {
    check_args(d, y.len(), tol)?;
    encode(&d.atoms().transpose(), y, k, tol * sum_sq(y).sqrt())
}

/// Greedy sparse coding of `y` with at most `k` atoms.
///
/// Each round picks the atom most correlated with the residual (lowest index
/// on ties), re-fits all selected coefficients by least squares and stops at
/// `k` atoms or once `‖r‖ ≤ tol·‖y‖`.
pub fn omp_encode(d: &Dictionary, y: &[f64], k: usize, tol: f64) -> Result<SparseCode> {
    omp_encode_traced(d, y, k, tol).map(|t| t.code)
}

fn check_args(d: &Dictionary, len: usize, tol: f64) -> Result<()> {
    if len != d.signal_dim() {
        return Err(Error::InvalidArgument(format!(
            "signal length {len} does not match dictionary dimension {}",
            d.signal_dim()
        )));
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "OMP tolerance {tol} is negative"
        )));
    }
    Ok(())
}

/// OMP with an absolute residual threshold `stop`.
fn encode(atoms_t: &DenseMatrix, y: &[f64], k: usize, stop: f64) -> Result<OmpTrace> {
    let (num_atoms, n) = atoms_t.shape();
    let y_norm = sum_sq(y).sqrt();
    let mut trace = OmpTrace {
        code: SparseCode::empty(num_atoms),
        residual_norms: Vec::new(),
        residual: y.to_vec(),
    };
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("OMP signal"));
    }
    if k == 0 || y_norm == 0.0 {
        return Ok(trace);
    }
    // More than n atoms can never be independent.
    let budget = k.min(n).min(num_atoms);

    let mut support: Vec<usize> = Vec::with_capacity(budget);
    let mut selected = vec![false; num_atoms];
    // Orthonormal basis of the selected atoms and the triangular factor
    // D_S = Q·R, built column by column with re-orthogonalized Gram–Schmidt.
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(budget);
    let mut r: Vec<Vec<f64>> = Vec::with_capacity(budget);
    let mut qty: Vec<f64> = Vec::with_capacity(budget);
    let mut coefs: Vec<f64> = Vec::new();
    let mut residual = y.to_vec();
    let mut r_norm = y_norm;

    while support.len() < budget && r_norm > stop {
        let mut best = None;
        let mut best_abs = 0.0;
        for j in 0..num_atoms {
            if selected[j] {
                continue;
            }
            let c = dot(atoms_t.row(j), &residual).abs();
            if c > best_abs {
                best_abs = c;
                best = Some(j);
            }
        }
        let Some(j) = best else { break };

        let atom = atoms_t.row(j);
        let mut v = atom.to_vec();
        let mut rcol = vec![0.0; q.len() + 1];
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let p = dot(qi, &v);
                rcol[i] += p;
                v.iter_mut().zip(qi).for_each(|(a, b)| *a -= p * b);
            }
        }
        let rjj = sum_sq(&v).sqrt();
        support.push(j);
        if rjj <= SINGULAR_TOL {
            return Err(Error::SingularSupport { support });
        }
        rcol[q.len()] = rjj;
        v.iter_mut().for_each(|a| *a /= rjj);
        qty.push(dot(&v, y));
        q.push(v);
        r.push(rcol);
        selected[j] = true;

        // Back-substitution R·c = Qᵀy; r[col][row] holds R[row][col].
        let s = support.len();
        coefs = vec![0.0; s];
        for row in (0..s).rev() {
            let mut acc = qty[row];
            for col in row + 1..s {
                acc -= r[col][row] * coefs[col];
            }
            coefs[row] = acc / r[row][row];
        }

        residual.copy_from_slice(y);
        for (&idx, &c) in support.iter().zip(&coefs) {
            for (res, a) in residual.iter_mut().zip(atoms_t.row(idx)) {
                *res -= c * a;
            }
        }
        r_norm = sum_sq(&residual).sqrt();
        trace.residual_norms.push(r_norm);
    }

    trace.code = SparseCode::new(support, coefs, num_atoms)?;
    trace.residual = residual;
    Ok(trace)
}

/// OMP on every column of `Y`. Runs in parallel; output is identical to
/// [`omp_encode_batch_serial`].
pub fn omp_encode_batch(
    d: &Dictionary,
    y: &DenseMatrix,
    k: usize,
    tol: f64,
) -> Result<SparseCodeSet> {
    batch(d, y, k, tol, true)
}

pub fn omp_encode_batch_serial(
    d: &Dictionary,
    y: &DenseMatrix,
    k: usize,
    tol: f64,
) -> Result<SparseCodeSet> {
    batch(d, y, k, tol, false)
}

fn batch(
    d: &Dictionary,
    y: &DenseMatrix,
    k: usize,
    tol: f64,
    parallel: bool,
) -> Result<SparseCodeSet> {
    check_args(d, y.rows(), tol)?;
    let stops: Vec<f64> = y
        .transpose()
        .as_slice()
        .chunks(y.rows())
        .map(|s| tol * sum_sq(s).sqrt())
        .collect();
    batch_with_stops(d, y, k, &stops, parallel)
}

/// Batch OMP where sample `i` stops once its residual norm is at most
/// `stops[i]`.
pub(crate) fn omp_encode_batch_with_stops(
    d: &Dictionary,
    y: &DenseMatrix,
    k: usize,
    stops: &[f64],
) -> Result<SparseCodeSet> {
    check_args(d, y.rows(), 0.0)?;
    batch_with_stops(d, y, k, stops, true)
}

fn batch_with_stops(
    d: &Dictionary,
    y: &DenseMatrix,
    k: usize,
    stops: &[f64],
    parallel: bool,
) -> Result<SparseCodeSet> {
    debug_assert_eq!(stops.len(), y.cols());
    let atoms_t = d.atoms().transpose();
    let samples = y.transpose();
    let n = y.rows();
    let run = |(i, s): (usize, &[f64])| {
        encode(&atoms_t, s, k, stops[i])
            .map(|t| t.code)
            .map_err(|e| e.at_sample(i))
    };
    let results: Vec<Result<SparseCode>> = if parallel {
        samples
            .as_slice()
            .par_chunks(n)
            .enumerate()
            .map(run)
            .collect()
    } else {
        samples.as_slice().chunks(n).enumerate().map(run).collect()
    };
    let codes = results.into_iter().collect::<Result<Vec<_>>>()?;
    SparseCodeSet::new(codes, k, d.num_atoms())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{random_dictionary, Dictionary, InitMode};
    use crate::matrix::{seeded_uniform_matrix, RngState};

    fn signed_dict(n: usize, k: usize, seed: u64) -> Dictionary {
        let m = seeded_uniform_matrix(n, k, -1.0, 1.0, &mut RngState::new(seed)).unwrap();
        Dictionary::from_matrix(&m, InitMode::Random, Some(seed)).unwrap()
    }

    /// Plain-loop OMP written independently: normal equations solved by
    /// Gaussian elimination with partial pivoting.
    fn reference_omp(d: &DenseMatrix, y: &[f64], k: usize) -> (Vec<usize>, Vec<f64>) {
        let (n, kk) = d.shape();
        let mut support: Vec<usize> = vec![];
        let mut coef: Vec<f64> = vec![];
        let mut r = y.to_vec();
        for _ in 0..k {
            let mut best = 0;
            let mut best_v = -1.0;
            for j in 0..kk {
                if support.contains(&j) {
                    continue;
                }
                let mut c = 0.0;
                for i in 0..n {
                    c += d.get(i, j) * r[i];
                }
                if c.abs() > best_v {
                    best_v = c.abs();
                    best = j;
                }
            }
            support.push(best);
            let s = support.len();
            let mut a = vec![vec![0.0; s + 1]; s];
            for p in 0..s {
                for q in 0..s {
                    a[p][q] = (0..n)
                        .map(|i| d.get(i, support[p]) * d.get(i, support[q]))
                        .sum();
                }
                a[p][s] = (0..n).map(|i| d.get(i, support[p]) * y[i]).sum();
            }
            for col in 0..s {
                let piv = (col..s)
                    .max_by(|&x, &z| a[x][col].abs().total_cmp(&a[z][col].abs()))
                    .unwrap();
                a.swap(col, piv);
                for row in col + 1..s {
                    let f = a[row][col] / a[col][col];
                    for c in col..=s {
                        a[row][c] -= f * a[col][c];
                    }
                }
            }
            coef = vec![0.0; s];
            for row in (0..s).rev() {
                let mut acc = a[row][s];
                for c in row + 1..s {
                    acc -= a[row][c] * coef[c];
                }
                coef[row] = acc / a[row][row];
            }
            for i in 0..n {
                r[i] = y[i] - (0..s).map(|p| coef[p] * d.get(i, support[p])).sum::<f64>();
            }
        }
        (support, coef)
    }

    #[test]
    fn recovers_exact_atom() {
        let d = signed_dict(6, 12, 3);
        let y = d.atom(5);
        let t = omp_encode_traced(&d, &y, 1, DEFAULT_OMP_TOL).unwrap();
        assert_eq!(t.code.support(), &[5]);
        assert!((t.code.coefficients()[0] - 1.0).abs() < 1e-14);
        assert!(t.residual_norms[0] < 1e-14);
    }

    #[test]
    fn zero_signal_and_zero_budget() {
        let d = signed_dict(4, 8, 1);
        assert!(omp_encode(&d, &[0.0; 4], 3, 1e-9).unwrap().is_empty());
        assert!(omp_encode(&d, &[1.0, 2.0, 3.0, 4.0], 0, 1e-9)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn matches_reference_loop() {
        let d = signed_dict(4, 8, 17);
        let y = seeded_uniform_matrix(4, 1, -1.0, 1.0, &mut RngState::new(18))
            .unwrap()
            .into_vec();
        let code = omp_encode(&d, &y, 2, 0.0).unwrap();
        let (s, c) = reference_omp(d.atoms(), &y, 2);
        assert_eq!(code.support(), &s[..]);
        for (a, b) in code.coefficients().iter().zip(&c) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn budget_capped_by_signal_dimension() {
        let d = signed_dict(3, 9, 5);
        let code = omp_encode(&d, &[1.0, -2.0, 0.5], 6, 0.0).unwrap();
        assert!(code.len() <= 3);
    }

    #[test]
    fn rejects_wrong_length_and_negative_tol() {
        let d = signed_dict(3, 9, 5);
        assert!(omp_encode(&d, &[1.0, 2.0], 1, 0.0).is_err());
        assert!(omp_encode(&d, &[1.0, 2.0, 3.0], 1, -1.0).is_err());
    }

    #[test]
    fn singleton_batch_matches_single() {
        let d = random_dictionary(5, 10, &mut RngState::new(2)).unwrap();
        let y = DenseMatrix::from_fn(5, 1, |r, _| (r as f64).sin() + 0.3);
        let set = omp_encode_batch(&d, &y, 3, 1e-9).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(
            set.codes()[0],
            omp_encode(&d, &y.column(0), 3, 1e-9).unwrap()
        );
    }

    #[test]
    fn batch_parallel_equals_serial() {
        let d = signed_dict(16, 32, 4);
        let y = seeded_uniform_matrix(16, 64, -1.0, 1.0, &mut RngState::new(5)).unwrap();
        let a = omp_encode_batch(&d, &y, 4, 1e-9).unwrap();
        let b = omp_encode_batch_serial(&d, &y, 4, 1e-9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn batch_error_carries_sample_index() {
        let d = signed_dict(3, 6, 4);
        let y = DenseMatrix::zeros(4, 2);
        assert!(omp_encode_batch(&d, &y, 2, 0.0).is_err());
    }

    #[test]
    fn reconstruct_cases() {
        let d = signed_dict(4, 8, 9);
        assert_eq!(reconstruct(&d, &SparseCode::empty(8)), vec![0.0; 4]);
        let single = SparseCode::new(vec![3], vec![2.0], 8).unwrap();
        let r = reconstruct(&d, &single);
        for (a, b) in r.iter().zip(d.atom(3)) {
            assert!((a - 2.0 * b).abs() < 1e-15);
        }
        let code = SparseCode::new(vec![6, 1, 2], vec![0.5, -1.5, 3.0], 8).unwrap();
        let x = DenseMatrix::new(8, 1, code.to_dense()).unwrap();
        let dense = d.atoms().matmul(&x).unwrap();
        for (a, b) in reconstruct(&d, &code).iter().zip(dense.as_slice()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn code_sum_cases() {
        let a = SparseCode::new(vec![1], vec![1.0], 5).unwrap();
        let b = SparseCode::new(vec![2], vec![2.0], 5).unwrap();
        let s = code_sum(&a, &b).unwrap();
        assert_eq!(s.support(), &[1, 2]);
        assert_eq!(s.coefficients(), &[1.0, 2.0]);

        let a = SparseCode::new(vec![3], vec![1.0], 5).unwrap();
        let b = SparseCode::new(vec![3], vec![-1.0], 5).unwrap();
        assert!(code_sum(&a, &b).unwrap().is_empty());

        assert_eq!(code_sum(&a, &SparseCode::empty(5)).unwrap(), a);
        assert!(code_sum(&a, &SparseCode::empty(4)).is_err());
    }

    #[test]
    fn code_sum_support_size_enumeration() {
        // Every split of {0..6} into an m-set and a (k−m)-set with overlap o.
        let dim = 6;
        for mask_a in 0u32..(1 << dim) {
            for mask_b in 0u32..(1 << dim) {
                let a_idx: Vec<usize> = (0..dim).filter(|i| mask_a >> i & 1 == 1).collect();
                let b_idx: Vec<usize> = (0..dim).filter(|i| mask_b >> i & 1 == 1).collect();
                let a = SparseCode::new(a_idx.clone(), vec![1.0; a_idx.len()], dim).unwrap();
                let b = SparseCode::new(b_idx.clone(), vec![0.5; b_idx.len()], dim).unwrap();
                let overlap = (mask_a & mask_b).count_ones() as usize;
                let s = code_sum(&a, &b).unwrap();
                assert_eq!(s.len(), a_idx.len() + b_idx.len() - overlap);
            }
        }
    }

    #[test]
    fn support_stats_cases() {
        let codes: Vec<SparseCode> = (0..4)
            .map(|i| SparseCode::new(vec![i, i + 1], vec![1.0, 1.0], 8).unwrap())
            .collect();
        let set = SparseCodeSet::new(codes, 2, 8).unwrap();
        let st = support_stats(&set);
        assert_eq!(st.histogram, vec![0, 0, 4]);
        assert_eq!(st.mean, Some(2.0));

        let empty = SparseCodeSet::new(vec![], 3, 8).unwrap();
        let st = support_stats(&empty);
        assert!(st.histogram.is_empty());
        assert_eq!(st.mean, None);
    }

    #[test]
    fn code_set_budget_enforced() {
        let c = SparseCode::new(vec![0, 1, 2], vec![1.0; 3], 4).unwrap();
        assert!(SparseCodeSet::new(vec![c], 2, 4).is_err());
        assert!(SparseCode::new(vec![1, 1], vec![1.0, 1.0], 4).is_err());
        assert!(SparseCode::new(vec![4], vec![1.0], 4).is_err());
    }

    #[test]
    fn matrix_round_trip() {
        let codes = vec![
            SparseCode::new(vec![2, 0], vec![1.5, -1.0], 3).unwrap(),
            SparseCode::empty(3),
        ];
        let set = SparseCodeSet::new(codes, 2, 3).unwrap();
        let m = set.to_matrix();
        assert_eq!(m.shape(), (3, 2));
        assert_eq!(m.get(2, 0), 1.5);
        let back = SparseCodeSet::from_matrix(&m, 2).unwrap();
        assert_eq!(back.codes()[0].support(), &[0, 2]);
        assert_eq!(back.to_matrix(), m);
    }

    #[test]
    fn remap_moves_duplicate_mass() {
        let codes = vec![SparseCode::new(vec![3, 1, 0], vec![1.0, 2.0, 4.0], 4).unwrap()];
        let mut set = SparseCodeSet::new(codes, 3, 4).unwrap();
        // atom 3 duplicates atom 1 with flipped sign; atom 0 was a dead atom.
        set.rescale_and_remap(&[0.0, 2.0, 1.0, 3.0], &[0, 3], &[(3, 1, -1.0)]);
        let c = &set.codes()[0];
        assert_eq!(c.support(), &[1]);
        assert_eq!(c.coefficients(), &[-3.0 + 4.0]);
    }
}
