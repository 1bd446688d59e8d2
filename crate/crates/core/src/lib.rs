//! Structure-aware matrix pencil (SAMP) estimation of sums of complex exponentials.
//!
//! The crate is organised bottom-up:
//!
//! - [`signal`]: the exponential signal model, noise models and SNR helpers.
//! - [`pencil`]: Hankel pencil construction, SVD, reduced matrix and the MP modes.
//! - [`detect`]: the mode-similarity detector and the singular-value baselines.
//! - [`estimate`]: pole/amplitude extraction and the end-to-end pipelines.
//! - [`perturbation`]: first-order noise analysis of the signal modes, used to
//!   validate the detector against ground truth.
//! - [`io`]: CSV readers and writers for signals, estimates and feature dumps.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod detect;
pub mod error;
pub mod estimate;
pub mod io;
pub mod linalg;
pub mod pencil;
pub mod perturbation;
pub mod signal;

pub use error::{Result, SampError};
pub use linalg::{CMatrix, CVector, C64};
