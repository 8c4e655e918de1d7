//! Command-line front end.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dictionary::{Dictionary, InitMode};
use crate::error::{Error, Result};
use crate::harness::{export_dictionary_mosaic, run_experiment, ExperimentReport, ExperimentSpec};
use crate::learners::{eval_to_csv, evaluate_dictionary, Algorithm, LearnConfig};
use crate::matrix::DenseMatrix;
use crate::omp::{omp_encode_batch, DEFAULT_OMP_TOL};
use crate::patches::{extract_patches, load_pgm};

#[derive(Parser, Debug)]
#[command(
    name = "dictlearn",
    version,
    about = "Dictionary learning with MOD, EcMOD and EcMOD+"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train dictionaries on image patches and write traces, dictionaries and PSNR tables.
    Learn(LearnArgs),
    /// Sparse-code image patches with a stored dictionary.
    Encode(EncodeArgs),
    /// Report PSNR of a stored dictionary for several sparsity levels.
    Evaluate(EvaluateArgs),
    /// Render a dictionary as a PGM mosaic of its atoms.
    Mosaic(MosaicArgs),
    /// Write the patch matrix of an image as MAT1.
    Extract(ExtractArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    Mod,
    Ecmod,
    Ecmodplus,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Mod => Algorithm::Mod,
            AlgoArg::Ecmod => Algorithm::EcMod,
            AlgoArg::Ecmodplus => Algorithm::EcModPlus,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum InitArg {
    Dct,
    Random,
}

#[derive(Args, Debug)]
struct PatchArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long, default_value_t = 8)]
    patch_size: usize,
    /// Defaults to the patch size (non-overlapping patches).
    #[arg(long)]
    stride: Option<usize>,
}

impl PatchArgs {
    fn stride(&self) -> usize {
        self.stride.unwrap_or(self.patch_size)
    }

    fn load(&self) -> Result<DenseMatrix> {
        let img = load_pgm(&self.image)?;
        Ok(extract_patches(&img, self.patch_size, self.stride())?.data)
    }
}

#[derive(Args, Debug)]
struct LearnArgs {
    #[command(flatten)]
    patches: PatchArgs,
    #[arg(long, default_value_t = 256)]
    atoms: usize,
    #[arg(long, value_enum, default_value_t = AlgoArg::Ecmodplus)]
    algo: AlgoArg,
    #[arg(long, default_value_t = 8)]
    k: usize,
    /// First-stage budget of ecmod/ecmodplus; defaults to k/2.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 40)]
    iters: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Dct)]
    init: InitArg,
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = DEFAULT_OMP_TOL)]
    omp_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    stop_delta: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 5, 10, 20])]
    test_k: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Append an elapsed-seconds column to the trace files.
    #[arg(long)]
    timings: bool,
}

impl LearnArgs {
    fn to_spec(&self) -> Result<ExperimentSpec> {
        let init = match self.init {
            InitArg::Dct => InitMode::Dct,
            InitArg::Random => InitMode::Random,
        };
        let spec = ExperimentSpec {
            image: self.patches.image.clone(),
            patch_side: self.patches.patch_size,
            stride: self.patches.stride(),
            atoms: self.atoms,
            config: LearnConfig {
                algo: self.algo.into(),
                k: self.k,
                m: self.m.unwrap_or(self.k / 2),
                max_iters: self.iters,
                omp_tol: self.omp_tol,
                stop_delta: self.stop_delta,
                seed: self.seeds.first().copied().unwrap_or(0),
                init,
            },
            test_k: self.test_k.clone(),
            seeds: self.seeds.clone(),
            out_dir: self.out.clone(),
            timings: self.timings,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args, Debug, Clone, PartialEq)]
pub struct EncodeArgs {
    #[arg(long)]
    pub dict: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub patch_size: usize,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_OMP_TOL)]
    pub omp_tol: f64,
    /// Output MAT1 file holding the dense `K×M` code matrix.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, PartialEq)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub dict: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub patch_size: usize,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 5, 10, 20])]
    pub test_k: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_OMP_TOL)]
    pub omp_tol: f64,
    /// Output CSV; printed to standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, PartialEq)]
pub struct MosaicArgs {
    #[arg(long)]
    pub dict: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, PartialEq)]
pub struct ExtractArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub patch_size: usize,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

/// A parsed and validated command line.
#[derive(Debug, Clone, PartialEq)]
pub enum Invocation {
    Learn(ExperimentSpec),
    Encode(EncodeArgs),
    Evaluate(EvaluateArgs),
    Mosaic(MosaicArgs),
    Extract(ExtractArgs),
}

#[derive(Debug)]
pub enum ArgError {
    /// Unknown or missing flags, `--help` and `--version`.
    Usage(clap::Error),
    /// Flags parsed but describe an invalid experiment.
    Invalid(Error),
}

impl ArgError {
    /// Help and version requests are not failures.
    pub fn is_informational(&self) -> bool {
        use clap::error::ErrorKind;
        matches!(
            self,
            ArgError::Usage(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion)
        )
    }
}

impl fmt::Display for ArgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgError::Usage(e) => write!(f, "{e}"),
            ArgError::Invalid(e) => write!(f, "invalid arguments: {e}"),
        }
    }
}

impl std::error::Error for ArgError {}

/// Parses `argv` (including the program name) into a validated invocation.
pub fn parse_args<I, T>(argv: I) -> std::result::Result<Invocation, ArgError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(ArgError::Usage)?;
    Ok(match cli.command {
        Command::Learn(a) => Invocation::Learn(a.to_spec().map_err(ArgError::Invalid)?),
        Command::Encode(a) => Invocation::Encode(a),
        Command::Evaluate(a) => Invocation::Evaluate(a),
        Command::Mosaic(a) => Invocation::Mosaic(a),
        Command::Extract(a) => Invocation::Extract(a),
    })
}

fn patch_matrix(image: &Path, side: usize, stride: Option<usize>) -> Result<DenseMatrix> {
    PatchArgs {
        image: image.to_path_buf(),
        patch_size: side,
        stride,
    }
    .load()
}

fn check_dim(d: &Dictionary, y: &DenseMatrix) -> Result<()> {
    if d.signal_dim() != y.rows() {
        return Err(Error::ShapeMismatch {
            op: "dictionary vs patches",
            left: d.atoms().shape(),
            right: y.shape(),
        });
    }
    Ok(())
}

/// What a finished invocation produced.
#[derive(Debug)]
pub enum Outcome {
    Experiment(ExperimentReport),
    Written(PathBuf),
    Printed(String),
}

pub fn execute(inv: &Invocation) -> Result<Outcome> {
    match inv {
        Invocation::Learn(spec) => run_experiment(spec).map(Outcome::Experiment),
        Invocation::Encode(a) => {
            let d = Dictionary::load(&a.dict)?;
            let y = patch_matrix(&a.image, a.patch_size, a.stride)?;
            check_dim(&d, &y)?;
            let codes = omp_encode_batch(&d, &y, a.k, a.omp_tol)?;
            codes.to_matrix().write_mat1(&a.out)?;
            Ok(Outcome::Written(a.out.clone()))
        }
        Invocation::Evaluate(a) => {
            let d = Dictionary::load(&a.dict)?;
            let y = patch_matrix(&a.image, a.patch_size, a.stride)?;
            check_dim(&d, &y)?;
            let csv = eval_to_csv(&evaluate_dictionary(&d, &y, &a.test_k, a.omp_tol)?);
            match &a.out {
                Some(p) => {
                    std::fs::write(p, csv).map_err(|e| Error::io(p, e))?;
                    Ok(Outcome::Written(p.clone()))
                }
                None => Ok(Outcome::Printed(csv)),
            }
        }
        Invocation::Mosaic(a) => {
            export_dictionary_mosaic(&Dictionary::load(&a.dict)?, &a.out)?;
            Ok(Outcome::Written(a.out.clone()))
        }
        Invocation::Extract(a) => {
            let y = patch_matrix(&a.image, a.patch_size, a.stride)?;
            y.write_mat1(&a.out)?;
            Ok(Outcome::Written(a.out.clone()))
        }
    }
}
