//! Surrogate prediction of lossy-compression quality.
//!
//! Given a 3D scalar volume and a relative error bound, the models in this
//! crate predict the compression ratio, PSNR and SSIM that one of two
//! built-in error-bounded codecs would achieve, without running the codec.
//!
//! * [`field`] loads, generates and samples volumes.
//! * [`codec`] holds the prediction-based (`pred-eb`) and transform-based
//!   (`xform-eb`) codecs that produce ground truth.
//! * [`quality`] computes CR, MSE, PSNR, 3D SSIM and percentage errors.
//! * [`autodiff`] is the small reverse-mode tensor engine behind the networks.
//! * [`surrogate`] defines the shared 3D CNN backbone and per-(codec, metric)
//!   prediction heads.
//! * [`pipeline`] generates labels, trains in two stages and evaluates.
//! * [`cli`] exposes every stage as a subcommand of the `cqs` binary.

pub mod autodiff;
pub mod cli;
pub mod codec;
pub mod error;
pub mod field;
pub mod pipeline;
pub mod quality;
pub mod rng;
pub mod surrogate;

pub use error::{Error, Result};
