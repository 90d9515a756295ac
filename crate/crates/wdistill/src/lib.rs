//! Numerical study of W-state distillation from vacuum correlations of a
//! Klein-Gordon field, probed by switched two-level detectors.
//!
//! Layering, bottom up: `quad` (quadrature and extrapolation), `windows`
//! (coupling windows and their transforms), `field` (Wightman kernels),
//! `amplitudes` (two-point amplitude tables), `wick` (density-matrix
//! assembly and filtering), `qinfo` (certification and nonlocality),
//! `config`/`pipeline` (the CLI orchestration).

pub mod amplitudes;
pub mod config;
pub mod error;
pub mod field;
pub mod pipeline;
pub mod qinfo;
pub mod quad;
pub mod wick;
pub mod windows;

pub use error::{Result, WdError};
