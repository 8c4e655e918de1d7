//! Dictionary learning for sparse representations: MOD and its error-feedback
//! variants EcMOD and EcMOD+, with OMP sparse coding and an image-patch
//! experiment harness.
//!
//! Training samples are the columns of a [`DenseMatrix`]. A [`Dictionary`]
//! holds unit-norm atoms as columns, and sparse codes are kept per sample in
//! a [`SparseCodeSet`].

pub mod cli;
pub mod dictionary;
pub mod error;
pub mod harness;
pub mod learners;
pub mod linalg;
pub mod matrix;
pub mod omp;
pub mod patches;

pub use dictionary::{overcomplete_dct, random_dictionary, Dictionary, InitMode};
pub use error::{Error, Result};
pub use learners::{train, Algorithm, LearnConfig, TrainTrace};
pub use linalg::{least_squares_dictionary, pseudo_inverse};
pub use matrix::{frobenius_mse, seeded_uniform_matrix, DenseMatrix, RngState};
pub use omp::{omp_encode, omp_encode_batch, SparseCode, SparseCodeSet};
pub use patches::{extract_patches, load_pgm, psnr, save_pgm, GrayImage, PatchMatrix};
