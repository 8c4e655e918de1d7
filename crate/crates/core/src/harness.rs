//! Experiment runner: patches in, per-seed traces, dictionaries and
//! evaluation tables out.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use crate::dictionary::{overcomplete_dct, random_dictionary, Dictionary, InitMode};
use crate::error::{Error, Result};
use crate::learners::{eval_to_csv, evaluate_dictionary, train, EvalRow, LearnConfig, TrainTrace};
use crate::matrix::{DenseMatrix, RngState};
use crate::patches::{extract_patches, load_pgm, save_pgm, GrayImage};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub image: PathBuf,
    pub patch_side: usize,
    pub stride: usize,
    /// Number of atoms `K`; the signal dimension is `patch_side²`.
    pub atoms: usize,
    /// `config.seed` is overwritten per run.
    pub config: LearnConfig,
    pub test_k: Vec<usize>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub timings: bool,
}

impl ExperimentSpec {
    pub fn signal_dim(&self) -> usize {
        self.patch_side * self.patch_side
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.patch_side == 0 || self.stride == 0 {
            return Err(Error::Config(
                "patch size and stride must be at least 1".into(),
            ));
        }
        if self.atoms < self.signal_dim() {
            return Err(Error::Config(format!(
                "{} atoms is fewer than the patch dimension {}",
                self.atoms,
                self.signal_dim()
            )));
        }
        if self.config.init == InitMode::Random && self.seeds.is_empty() {
            return Err(Error::Config(
                "random initialization needs at least one seed".into(),
            ));
        }
        if self.config.init == InitMode::Loaded {
            return Err(Error::Config(
                "experiments start from dct or random dictionaries".into(),
            ));
        }
        if self.test_k.is_empty() {
            return Err(Error::Config("test k list is empty".into()));
        }
        Ok(())
    }

    /// `(label, seed)` of each run: one per seed for random initialization,
    /// a single `dct` run otherwise.
    pub fn runs(&self) -> Vec<(String, u64)> {
        match self.config.init {
            InitMode::Random => self.seeds.iter().map(|s| (s.to_string(), *s)).collect(),
            _ => vec![("dct".to_string(), self.seeds.first().copied().unwrap_or(0))],
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub label: String,
    pub seed: u64,
    pub trace: TrainTrace,
    pub eval: Vec<EvalRow>,
    pub dictionary: Dictionary,
}

impl RunResult {
    pub fn final_psnr(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.psnr_db)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsnrSummary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl PsnrSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        PsnrSummary { min, mean, max }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub runs: Vec<RunResult>,
    pub summary: PsnrSummary,
    pub files: Vec<PathBuf>,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    files.push(path.to_path_buf());
    Ok(())
}

/// Loads the image, extracts patches and trains one dictionary per run.
///
/// Writes `trace_<algo>_<label>.csv`, `dict_<algo>_<label>.mat1` and
/// `eval_<algo>_<label>.csv` per run and `summary.csv` at the end. Files
/// written before a failure are left in place.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let img = load_pgm(&spec.image)?;
    let patches = extract_patches(&img, spec.patch_side, spec.stride)?;
    run_on_samples(spec, &patches.data)
}

/// [`run_experiment`] on an explicit `n×M` sample matrix.
pub fn run_on_samples(spec: &ExperimentSpec, y: &DenseMatrix) -> Result<ExperimentReport> {
    spec.validate()?;
    if y.rows() != spec.signal_dim() {
        return Err(Error::ShapeMismatch {
            op: "run_experiment",
            left: (spec.signal_dim(), spec.atoms),
            right: y.shape(),
        });
    }
    fs::create_dir_all(&spec.out_dir).map_err(|e| Error::io(&spec.out_dir, e))?;
    let algo = spec.config.algo;
    let mut files = Vec::new();
    let mut runs = Vec::new();
    for (label, seed) in spec.runs() {
        let d0 = match spec.config.init {
            InitMode::Random => {
                random_dictionary(spec.signal_dim(), spec.atoms, &mut RngState::new(seed))?
            }
            _ => overcomplete_dct(spec.patch_side, spec.atoms)?,
        };
        let config = LearnConfig {
            seed,
            ..spec.config.clone()
        };
        let trace_path = spec.out_dir.join(format!("trace_{algo}_{label}.csv"));
        let outcome = match train(&config, y, &d0) {
            Ok(o) => o,
            Err(Error::Training {
                iteration,
                trace,
                source,
            }) => {
                write_file(&trace_path, trace.to_csv(spec.timings), &mut files)?;
                return Err(Error::Training {
                    iteration,
                    trace,
                    source,
                });
            }
            Err(e) => return Err(e),
        };
        write_file(&trace_path, outcome.trace.to_csv(spec.timings), &mut files)?;
        let dict_path = spec.out_dir.join(format!("dict_{algo}_{label}.mat1"));
        write_file(
            &dict_path,
            outcome.dictionary.atoms().to_mat1_bytes(),
            &mut files,
        )?;
        let eval = evaluate_dictionary(&outcome.dictionary, y, &spec.test_k, config.omp_tol)?;
        let eval_path = spec.out_dir.join(format!("eval_{algo}_{label}.csv"));
        write_file(&eval_path, eval_to_csv(&eval), &mut files)?;
        let result = RunResult {
            label,
            seed,
            trace: outcome.trace,
            eval,
            dictionary: outcome.dictionary,
        };
        info!(
            "{algo} run {}: final PSNR {:.3} dB",
            result.label,
            result.final_psnr()
        );
        runs.push(result);
    }
    let finals: Vec<f64> = runs.iter().map(RunResult::final_psnr).collect();
    let summary = PsnrSummary::from_values(&finals);
    let csv = format!(
        "algo,runs,final_psnr_min,final_psnr_mean,final_psnr_max\n{},{},{},{},{}\n",
        algo,
        runs.len(),
        summary.min,
        summary.mean,
        summary.max
    );
    write_file(&spec.out_dir.join("summary.csv"), csv, &mut files)?;
    Ok(ExperimentReport {
        runs,
        summary,
        files,
    })
}

/// Tiles the atoms as `side×side` images, each min–max scaled to `[0, 255]`
/// (constant atoms map to 128), on a `⌈√K⌉`-wide grid with 1-pixel black
/// separators. Atom `j` sits at grid cell `(j / width, j % width)`.
pub fn dictionary_mosaic(d: &Dictionary) -> Result<GrayImage> {
    let n = d.signal_dim();
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::InvalidArgument(format!(
            "atom dimension {n} is not a square patch"
        )));
    }
    let k = d.num_atoms();
    let grid_w = (k as f64).sqrt().ceil() as usize;
    let grid_h = k.div_ceil(grid_w);
    let width = grid_w * (side + 1) + 1;
    let height = grid_h * (side + 1) + 1;
    let mut pixels = vec![0u8; width * height];
    for j in 0..k {
        let atom = d.atom(j);
        let lo = atom.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = atom.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (gy, gx) = (j / grid_w, j % grid_w);
        for (p, &v) in atom.iter().enumerate() {
            let level = if hi > lo {
                ((v - lo) / (hi - lo) * 255.0).round() as u8
            } else {
                128
            };
            let x = gx * (side + 1) + 1 + p % side;
            let y = gy * (side + 1) + 1 + p / side;
            pixels[y * width + x] = level;
        }
    }
    GrayImage::new(width, height, pixels)
}

pub fn export_dictionary_mosaic(d: &Dictionary, path: impl AsRef<Path>) -> Result<()> {
    save_pgm(&dictionary_mosaic(d)?, path)
}
