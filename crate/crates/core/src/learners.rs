//! MOD, EcMOD and EcMOD+ training steps and the iteration driver.
//!
//! Every least-squares dictionary update is followed by column normalization
//! (with the codes rescaled so `D·X` is unchanged) and dead-atom repair.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::dictionary::{
    column_norms, replace_degenerate_atoms, Dictionary, InitMode, RepairPolicy,
};
use crate::error::{Error, Result};
use crate::linalg::least_squares_dictionary;
use crate::matrix::{sum_sq, DenseMatrix, RngState};
use crate::omp::{
    code_set_sum, omp_encode_batch, omp_encode_batch_with_stops, reconstruct_set, residual_energy,
    residual_norms, support_stats, SparseCode, SparseCodeSet, DEFAULT_OMP_TOL,
};
use crate::patches::{psnr, PEAK, PSNR_PERFECT};

/// RNG stream reserved for atom repair, distinct from initialization.
const REPAIR_STREAM: u64 = 1;

/// Relative slack allowed on the descent check of each dictionary update.
pub const DESCENT_RTOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Mod,
    EcMod,
    EcModPlus,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Mod => "mod",
            Algorithm::EcMod => "ecmod",
            Algorithm::EcModPlus => "ecmodplus",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mod" => Ok(Algorithm::Mod),
            "ecmod" => Ok(Algorithm::EcMod),
            "ecmodplus" | "ecmod+" => Ok(Algorithm::EcModPlus),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnConfig {
    pub algo: Algorithm,
    /// Sparsity budget per code.
    pub k: usize,
    /// First-stage budget of the error-feedback variants, `1 ≤ m < k`.
    pub m: usize,
    pub max_iters: usize,
    pub omp_tol: f64,
    /// Stop once the relative MSE change over one iteration drops below this.
    pub stop_delta: f64,
    pub seed: u64,
    pub init: InitMode,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            algo: Algorithm::EcModPlus,
            k: 8,
            m: 4,
            max_iters: 40,
            omp_tol: DEFAULT_OMP_TOL,
            stop_delta: 1e-6,
            seed: 0,
            init: InitMode::Dct,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.algo != Algorithm::Mod && !(1 <= self.m && self.m < self.k) {
            return Err(Error::Config(format!(
                "{} needs 1 <= m < k, got m = {}, k = {}",
                self.algo, self.m, self.k
            )));
        }
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if self.omp_tol.is_nan()
            || self.omp_tol < 0.0
            || self.stop_delta.is_nan()
            || self.stop_delta < 0.0
        {
            return Err(Error::Config(
                "omp_tol and stop_delta must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Residual energy `‖Y − D·X‖²_F` around one least-squares update, codes
/// held fixed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateCheck {
    pub before: f64,
    pub after: f64,
}

/// Intermediate codes of an error-feedback step, each expressed against the
/// dictionary it was last updated with.
#[derive(Clone, Debug)]
pub struct EcStages {
    /// Codes with budget `m`.
    pub first: SparseCodeSet,
    /// Codes of the error matrix with budget `k − m`.
    pub error: SparseCodeSet,
    /// `first + error`.
    pub combined: SparseCodeSet,
}

#[derive(Clone, Debug)]
pub struct StepOutput {
    pub dictionary: Dictionary,
    /// Codes used by the final update, rescaled to the returned dictionary.
    pub codes: SparseCodeSet,
    pub stages: Option<EcStages>,
    pub updates: Vec<UpdateCheck>,
    pub atoms_repaired: usize,
}

struct Updater<'a> {
    y: &'a DenseMatrix,
    y_energy: f64,
    rng: &'a mut RngState,
    init: InitMode,
    seed: Option<u64>,
    checks: Vec<UpdateCheck>,
    repaired: usize,
}

impl<'a> Updater<'a> {
    fn new(y: &'a DenseMatrix, rng: &'a mut RngState, d: &Dictionary) -> Self {
        Updater {
            y,
            y_energy: sum_sq(y.as_slice()),
            rng,
            init: d.init_mode(),
            seed: d.seed(),
            checks: Vec::new(),
            repaired: 0,
        }
    }

    /// `D ← Y·X⁺`, then normalize and repair; `codes` are rewritten to match.
    fn update(&mut self, prev: &Dictionary, codes: &mut SparseCodeSet) -> Result<Dictionary> {
        let before = residual_energy(prev.atoms(), self.y, codes);
        let ls = least_squares_dictionary(self.y, &codes.to_matrix())?;
        let residuals = residual_norms(&ls.dictionary, self.y, codes);
        let after = residuals.iter().fold(0.0, |acc, r| acc + r * r);
        if after > before * (1.0 + DESCENT_RTOL) + 1e-12 * self.y_energy {
            return Err(Error::DescentViolation { before, after });
        }
        self.checks.push(UpdateCheck { before, after });
        let repair = replace_degenerate_atoms(
            &ls.dictionary,
            self.y,
            &residuals,
            self.rng,
            RepairPolicy::RandomFallback,
            self.init,
            self.seed,
        )?;
        codes.rescale_and_remap(&repair.scales, &repair.replaced, &repair.duplicates);
        self.repaired += repair.replaced.len();
        Ok(repair.dictionary)
    }

    fn finish(
        self,
        dictionary: Dictionary,
        codes: SparseCodeSet,
        stages: Option<EcStages>,
    ) -> StepOutput {
        StepOutput {
            dictionary,
            codes,
            stages,
            updates: self.checks,
            atoms_repaired: self.repaired,
        }
    }
}

fn check_shapes(d: &Dictionary, y: &DenseMatrix) -> Result<()> {
    if d.signal_dim() != y.rows() {
        return Err(Error::ShapeMismatch {
            op: "training step",
            left: d.atoms().shape(),
            right: y.shape(),
        });
    }
    Ok(())
}

fn check_split(m: usize, k: usize) -> Result<()> {
    if !(1 <= m && m < k) {
        return Err(Error::Config(format!(
            "error feedback needs 1 <= m < k, got m = {m}, k = {k}"
        )));
    }
    Ok(())
}

/// One MOD iteration: OMP with budget `k`, then `D ← Y·X⁺`.
pub fn mod_step(
    d: &Dictionary,
    y: &DenseMatrix,
    k: usize,
    omp_tol: f64,
    rng: &mut RngState,
) -> Result<StepOutput> {
    check_shapes(d, y)?;
    let mut codes = omp_encode_batch(d, y, k, omp_tol)?;
    let mut up = Updater::new(y, rng, d);
    let next = up.update(d, &mut codes)?;
    Ok(up.finish(next, codes, None))
}

/// Codes the error matrix; sample `i` stops once its error is within
/// `tol·‖y_i‖`, measured against the original sample rather than the error.
fn encode_error(
    d: &Dictionary,
    e: &DenseMatrix,
    y: &DenseMatrix,
    budget: usize,
    tol: f64,
) -> Result<SparseCodeSet> {
    let stops: Vec<f64> = column_norms(y).iter().map(|v| tol * v).collect();
    omp_encode_batch_with_stops(d, e, budget, &stops)
}

fn ecmod_inner(
    d: &Dictionary,
    y: &DenseMatrix,
    m: usize,
    k: usize,
    omp_tol: f64,
    up: &mut Updater<'_>,
) -> Result<(Dictionary, EcStages)> {
    let mut first = omp_encode_batch(d, y, m, omp_tol)?;
    let mid = up.update(d, &mut first)?;
    let approx = reconstruct_set(mid.atoms(), &first);
    let e = y.sub(&approx)?;
    let error = encode_error(&mid, &e, y, k - m, omp_tol)?;
    let mut combined = code_set_sum(&first, &error)?;
    if combined.codes().iter().all(SparseCode::is_empty) {
        return Err(Error::DegenerateCodes);
    }
    let next = up.update(&mid, &mut combined)?;
    Ok((
        next,
        EcStages {
            first,
            error,
            combined: combined.clone(),
        },
    ))
}

/// One error-feedback iteration:
///
/// 1. `A ← OMP(D, Y, m)`, `D ← Y·A⁺`
/// 2. `E ← Y − D·A`, `B ← OMP(D, E, k − m)`
/// 3. `D ← Y·(A + B)⁺`
///
/// Returns the final dictionary and the combined codes `A + B`.
pub fn ecmod_step(
    d: &Dictionary,
    y: &DenseMatrix,
    m: usize,
    k: usize,
    omp_tol: f64,
    rng: &mut RngState,
) -> Result<StepOutput> {
    check_shapes(d, y)?;
    check_split(m, k)?;
    let mut up = Updater::new(y, rng, d);
    let (next, stages) = ecmod_inner(d, y, m, k, omp_tol, &mut up)?;
    let codes = stages.combined.clone();
    Ok(up.finish(next, codes, Some(stages)))
}

/// [`ecmod_step`] followed by a full-budget MOD update: `X ← OMP(D, Y, k)`,
/// `D ← Y·X⁺`.
pub fn ecmod_plus_step(
    d: &Dictionary,
    y: &DenseMatrix,
    m: usize,
    k: usize,
    omp_tol: f64,
    rng: &mut RngState,
) -> Result<StepOutput> {
    check_shapes(d, y)?;
    check_split(m, k)?;
    let mut up = Updater::new(y, rng, d);
    let (mid, stages) = ecmod_inner(d, y, m, k, omp_tol, &mut up)?;
    let mut codes = omp_encode_batch(&mid, y, k, omp_tol)?;
    let next = up.update(&mid, &mut codes)?;
    Ok(up.finish(next, codes, Some(stages)))
}

/// Runs one iteration of the configured algorithm.
pub fn step(
    config: &LearnConfig,
    d: &Dictionary,
    y: &DenseMatrix,
    rng: &mut RngState,
) -> Result<StepOutput> {
    match config.algo {
        Algorithm::Mod => mod_step(d, y, config.k, config.omp_tol, rng),
        Algorithm::EcMod => ecmod_step(d, y, config.m, config.k, config.omp_tol, rng),
        Algorithm::EcModPlus => ecmod_plus_step(d, y, config.m, config.k, config.omp_tol, rng),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainRecord {
    /// 1-based.
    pub iter: usize,
    pub mse: f64,
    pub psnr_db: f64,
    pub mean_support: f64,
    pub atoms_repaired: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<TrainRecord>,
}

impl TrainTrace {
    pub fn last(&self) -> Option<&TrainRecord> {
        self.records.last()
    }

    /// CSV with header `iter,mse,psnr_db,mean_support,atoms_repaired` and a
    /// trailing `seconds` column when `timings` is set.
    pub fn to_csv(&self, timings: bool) -> String {
        let mut out = String::from("iter,mse,psnr_db,mean_support,atoms_repaired");
        if timings {
            out.push_str(",seconds");
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}",
                r.iter, r.mse, r.psnr_db, r.mean_support, r.atoms_repaired
            ));
            if timings {
                out.push_str(&format!(",{}", r.seconds));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub dictionary: Dictionary,
    pub trace: TrainTrace,
    pub codes: SparseCodeSet,
}

/// Training MSE `‖Y − D·X‖²_F / (n·M)`.
pub fn training_mse(d: &Dictionary, y: &DenseMatrix, codes: &SparseCodeSet) -> f64 {
    residual_energy(d.atoms(), y, codes) / (y.rows() * y.cols()) as f64
}

/// Iterates the configured step until `max_iters`, or until the relative MSE
/// change over one iteration falls below `stop_delta`.
pub fn train(config: &LearnConfig, y: &DenseMatrix, d0: &Dictionary) -> Result<TrainOutcome> {
    config.validate()?;
    check_shapes(d0, y)?;
    let mut rng = RngState::with_stream(config.seed, REPAIR_STREAM);
    let mut trace = TrainTrace::default();
    let mut d = d0.clone();
    let mut codes = None;
    for iter in 1..=config.max_iters {
        let t0 = Instant::now();
        let out = step(config, &d, y, &mut rng).map_err(|e| Error::Training {
            iteration: iter,
            trace: trace.clone(),
            source: Box::new(e),
        })?;
        let mse = training_mse(&out.dictionary, y, &out.codes);
        let record = TrainRecord {
            iter,
            mse,
            psnr_db: psnr(mse, PEAK)?,
            mean_support: support_stats(&out.codes).mean.unwrap_or(0.0),
            atoms_repaired: out.atoms_repaired,
            seconds: t0.elapsed().as_secs_f64(),
        };
        let prev = trace.last().map(|r| r.mse);
        trace.records.push(record);
        d = out.dictionary;
        codes = Some(out.codes);
        if mse == 0.0 {
            break;
        }
        if let Some(prev) = prev {
            if prev > 0.0 && ((prev - mse) / prev).abs() < config.stop_delta {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        dictionary: d,
        trace,
        codes: codes.expect("max_iters >= 1"),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalRow {
    pub k: usize,
    pub psnr_db: f64,
    pub mse: f64,
}

/// Codes `Y_test` with OMP at each `k` and reports the global MSE and PSNR.
/// PSNR is [`PSNR_PERFECT`] once the whole test set is reconstructed to the
/// OMP tolerance.
pub fn evaluate_dictionary(
    d: &Dictionary,
    y_test: &DenseMatrix,
    k_list: &[usize],
    omp_tol: f64,
) -> Result<Vec<EvalRow>> {
    if k_list.is_empty() {
        return Err(Error::InvalidArgument("k_list is empty".into()));
    }
    let y_energy = sum_sq(y_test.as_slice());
    k_list
        .iter()
        .map(|&k| {
            let codes = omp_encode_batch(d, y_test, k, omp_tol)?;
            let energy = residual_energy(d.atoms(), y_test, &codes);
            let mse = energy / (y_test.rows() * y_test.cols()) as f64;
            let psnr_db = if energy <= omp_tol * omp_tol * y_energy {
                PSNR_PERFECT
            } else {
                psnr(mse, PEAK)?
            };
            Ok(EvalRow { k, psnr_db, mse })
        })
        .collect()
}

pub fn eval_to_csv(rows: &[EvalRow]) -> String {
    let mut out = String::from("k,psnr_db,mse\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.k, r.psnr_db, r.mse));
    }
    out
}
