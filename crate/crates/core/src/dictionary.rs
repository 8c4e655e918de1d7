//! Dictionaries: construction, column normalization and dead-atom repair.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::matrix::{dot, seeded_uniform_matrix, sum_sq, DenseMatrix, RngState};

/// Columns whose norm is at most this fraction of the largest column norm
/// count as zero.
pub const ZERO_NORM_RTOL: f64 = 1e-10;

/// Two atoms with `|d_iᵀ d_j|` above this are duplicates.
pub const DUPLICATE_THRESHOLD: f64 = 1.0 - 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMode {
    Dct,
    Random,
    Loaded,
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitMode::Dct => "dct",
            InitMode::Random => "random",
            InitMode::Loaded => "loaded",
        })
    }
}

/// An `n×K` matrix of unit-norm atoms (one per column), `K ≥ n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    atoms: DenseMatrix,
    init: InitMode,
    seed: Option<u64>,
}

impl Dictionary {
    /// Normalizes the columns of `atoms` and wraps them. Fails on a zero
    /// column or when there are fewer atoms than signal dimensions.
    pub fn from_matrix(atoms: &DenseMatrix, init: InitMode, seed: Option<u64>) -> Result<Self> {
        let norm = normalize_columns(atoms);
        if let Some(&j) = norm.zero_columns.first() {
            return Err(Error::ZeroAtom(j));
        }
        Self::from_unit_columns(norm.atoms, init, seed)
    }

    fn from_unit_columns(atoms: DenseMatrix, init: InitMode, seed: Option<u64>) -> Result<Self> {
        let (n, k) = atoms.shape();
        if k < n {
            return Err(Error::InvalidDimensions {
                rows: n,
                cols: k,
                reason: "dictionary needs at least as many atoms as signal dimensions",
            });
        }
        if k < 2 * n {
            warn!("dictionary {n}x{k} is less than twice overcomplete");
        }
        debug_assert!(column_norms(&atoms).iter().all(|v| (v - 1.0).abs() < 1e-12));
        Ok(Dictionary { atoms, init, seed })
    }

    pub fn atoms(&self) -> &DenseMatrix {
        &self.atoms
    }

    /// Signal dimension `n`.
    pub fn signal_dim(&self) -> usize {
        self.atoms.rows()
    }

    /// Number of atoms `K`.
    pub fn num_atoms(&self) -> usize {
        self.atoms.cols()
    }

    pub fn init_mode(&self) -> InitMode {
        self.init
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn atom(&self, j: usize) -> Vec<f64> {
        self.atoms.column(j)
    }

    /// Largest absolute inner product between two distinct atoms.
    pub fn coherence(&self) -> f64 {
        let t = self.atoms.transpose();
        let k = self.num_atoms();
        let mut best = 0.0f64;
        for i in 0..k {
            for j in i + 1..k {
                best = best.max(dot(t.row(i), t.row(j)).abs());
            }
        }
        best
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.atoms.write_mat1(path)
    }

    /// Reads a MAT1 dictionary. Columns already at unit norm are kept
    /// bit-for-bit so a saved dictionary loads back unchanged; otherwise all
    /// columns are normalized as in [`Dictionary::from_matrix`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let m = DenseMatrix::read_mat1(path)?;
        if column_norms(&m).iter().all(|v| (v - 1.0).abs() < 1e-12) {
            return Self::from_unit_columns(m, InitMode::Loaded, None);
        }
        Self::from_matrix(&m, InitMode::Loaded, None)
    }
}

pub(crate) fn column_norms(m: &DenseMatrix) -> Vec<f64> {
    let mut acc = vec![0.0; m.cols()];
    for r in 0..m.rows() {
        for (a, v) in acc.iter_mut().zip(m.row(r)) {
            *a += v * v;
        }
    }
    acc.into_iter().map(f64::sqrt).collect()
}

/// Result of [`normalize_columns`].
#[derive(Clone, Debug)]
pub struct ColumnNormalization {
    pub atoms: DenseMatrix,
    /// Original column norms; 0 for columns flagged as zero.
    pub scales: Vec<f64>,
    pub zero_columns: Vec<usize>,
}

/// Divides every nonzero column by its ℓ2 norm. Zero columns are left alone
/// and reported. Multiplying code row `j` by `scales[j]` keeps `D·X` fixed.
pub fn normalize_columns(d: &DenseMatrix) -> ColumnNormalization {
    let norms = column_norms(d);
    let max_norm = norms.iter().cloned().fold(0.0, f64::max);
    let floor = max_norm * ZERO_NORM_RTOL;
    let mut zero_columns = Vec::new();
    let mut scales = Vec::with_capacity(norms.len());
    for (j, &s) in norms.iter().enumerate() {
        if s == 0.0 || s <= floor {
            zero_columns.push(j);
            scales.push(0.0);
        } else {
            scales.push(s);
        }
    }
    let mut atoms = d.clone();
    let k = d.cols();
    for row in atoms.as_mut_slice().chunks_mut(k) {
        for (v, &s) in row.iter_mut().zip(&scales) {
            if s > 0.0 {
                *v /= s;
            }
        }
    }
    ColumnNormalization {
        atoms,
        scales,
        zero_columns,
    }
}

/// Overcomplete 2-D DCT dictionary for `patch_side×patch_side` patches.
///
/// A 1-D `patch_side×q` cosine frame (`q² = num_atoms`) with mean-subtracted
/// non-constant columns is squared with a Kronecker product; atom `p1·q + p2`
/// is the outer product of 1-D atoms `p1` (rows) and `p2` (columns).
pub fn overcomplete_dct(patch_side: usize, num_atoms: usize) -> Result<Dictionary> {
    let q = (num_atoms as f64).sqrt().round() as usize;
    if q * q != num_atoms {
        return Err(Error::InvalidArgument(format!(
            "overcomplete DCT needs a square atom count, got {num_atoms}"
        )));
    }
    if patch_side == 0 || q < patch_side {
        return Err(Error::InvalidArgument(format!(
            "overcomplete DCT needs sqrt(atoms) >= patch side, got {q} < {patch_side}"
        )));
    }
    let mut one_d = vec![vec![0.0; patch_side]; q];
    for (p, col) in one_d.iter_mut().enumerate() {
        for (i, v) in col.iter_mut().enumerate() {
            *v = (i as f64 * p as f64 * PI / q as f64).cos();
        }
        if p > 0 {
            let mean = col.iter().sum::<f64>() / patch_side as f64;
            col.iter_mut().for_each(|v| *v -= mean);
        }
        let norm = sum_sq(col).sqrt();
        col.iter_mut().for_each(|v| *v /= norm);
    }
    let n = patch_side * patch_side;
    let atoms = DenseMatrix::from_fn(n, num_atoms, |pix, atom| {
        let (i1, i2) = (pix / patch_side, pix % patch_side);
        let (p1, p2) = (atom / q, atom % q);
        one_d[p1][i1] * one_d[p2][i2]
    });
    Dictionary::from_matrix(&atoms, InitMode::Dct, None)
}

/// Entries uniform on `[0, 1)`, then column-normalized.
pub fn random_dictionary(n: usize, k: usize, rng: &mut RngState) -> Result<Dictionary> {
    if n == 0 || k < n {
        return Err(Error::InvalidDimensions {
            rows: n,
            cols: k,
            reason: "random dictionary needs n >= 1 and K >= n",
        });
    }
    let seed = rng.seed();
    let m = seeded_uniform_matrix(n, k, 0.0, 1.0, rng)?;
    Dictionary::from_matrix(&m, InitMode::Random, Some(seed))
}

/// What to do once no usable training sample is left for a degenerate atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RepairPolicy {
    /// Fail with [`Error::TooManyDegenerateAtoms`].
    Strict,
    /// Fill the remaining atoms with seeded random unit vectors.
    RandomFallback,
}

/// Outcome of [`replace_degenerate_atoms`].
#[derive(Clone, Debug)]
pub struct AtomRepair {
    pub dictionary: Dictionary,
    /// Column norms of the input; 0 for zero columns.
    pub scales: Vec<f64>,
    /// Replaced atom indices, ascending.
    pub replaced: Vec<usize>,
    /// `(dropped, kept, sign)` for each duplicate: atom `dropped` was
    /// approximately `sign·kept` before replacement.
    pub duplicates: Vec<(usize, usize, f64)>,
}

/// Replaces every zero-norm or duplicate atom with the normalized training
/// sample of largest residual that has not been used yet in this call.
///
/// The input is normalized first. For a duplicate pair the higher index is
/// replaced. Samples that are zero or would themselves duplicate an atom are
/// skipped. `rng` is only drawn from under [`RepairPolicy::RandomFallback`].
pub fn replace_degenerate_atoms(
    d: &DenseMatrix,
    y: &DenseMatrix,
    residuals: &[f64],
    rng: &mut RngState,
    policy: RepairPolicy,
    init: InitMode,
    seed: Option<u64>,
) -> Result<AtomRepair> {
    if residuals.len() != y.cols() {
        return Err(Error::InvalidArgument(format!(
            "{} residuals for {} samples",
            residuals.len(),
            y.cols()
        )));
    }
    if d.rows() != y.rows() {
        return Err(Error::ShapeMismatch {
            op: "replace_degenerate_atoms",
            left: d.shape(),
            right: y.shape(),
        });
    }
    let norm = normalize_columns(d);
    let n = d.rows();
    let k = d.cols();
    let mut atoms_t = norm.atoms.transpose();

    let mut degenerate = vec![false; k];
    for &j in &norm.zero_columns {
        degenerate[j] = true;
    }
    let mut duplicates = Vec::new();
    for i in 0..k {
        if degenerate[i] {
            continue;
        }
        for j in i + 1..k {
            if degenerate[j] {
                continue;
            }
            let g = dot(atoms_t.row(i), atoms_t.row(j));
            if g.abs() > DUPLICATE_THRESHOLD {
                degenerate[j] = true;
                duplicates.push((j, i, g.signum()));
            }
        }
    }
    duplicates.sort_by_key(|&(j, _, _)| j);
    let replaced: Vec<usize> = (0..k).filter(|&j| degenerate[j]).collect();

    if !replaced.is_empty() {
        let mut order: Vec<usize> = (0..y.cols()).collect();
        order.sort_by(|&a, &b| residuals[b].total_cmp(&residuals[a]).then(a.cmp(&b)));
        let samples_t = y.transpose();
        let mut live = degenerate.iter().map(|d| !d).collect::<Vec<_>>();
        let mut cursor = 0;

        let fits = |cand: &[f64], atoms_t: &DenseMatrix, live: &[bool]| {
            (0..k).all(|j| !live[j] || dot(cand, atoms_t.row(j)).abs() <= DUPLICATE_THRESHOLD)
        };

        for (filled, &j) in replaced.iter().enumerate() {
            let mut chosen = None;
            while cursor < order.len() {
                let s = samples_t.row(order[cursor]);
                cursor += 1;
                let nrm = sum_sq(s).sqrt();
                if nrm == 0.0 {
                    continue;
                }
                let cand: Vec<f64> = s.iter().map(|v| v / nrm).collect();
                if fits(&cand, &atoms_t, &live) {
                    chosen = Some(cand);
                    break;
                }
            }
            let atom = match (chosen, policy) {
                (Some(a), _) => a,
                (None, RepairPolicy::Strict) => {
                    return Err(Error::TooManyDegenerateAtoms {
                        count: replaced.len(),
                        available: filled,
                    })
                }
                (None, RepairPolicy::RandomFallback) => loop {
                    let raw: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
                    let nrm = sum_sq(&raw).sqrt();
                    if nrm == 0.0 {
                        continue;
                    }
                    let cand: Vec<f64> = raw.iter().map(|v| v / nrm).collect();
                    if fits(&cand, &atoms_t, &live) {
                        break cand;
                    }
                },
            };
            let row = atoms_t.row(j).len();
            debug_assert_eq!(row, n);
            for (c, v) in atom.iter().enumerate() {
                atoms_t.set(j, c, *v);
            }
            live[j] = true;
        }
    }

    let dictionary = Dictionary::from_unit_columns(atoms_t.transpose(), init, seed)?;
    Ok(AtomRepair {
        dictionary,
        scales: norm.scales,
        replaced,
        duplicates,
    })
}
