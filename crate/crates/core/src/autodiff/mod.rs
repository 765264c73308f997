//! Minimal reverse-mode tensor engine: dense tensors, 3D convolution,
//! the layers the surrogate needs, Adam, and a finite-difference checker.
//!
//! Networks are generic over [`Real`]: training runs in `f32`, gradient
//! verification in `f64`. Parameters always live in `f32` inside a
//! [`ParamStore`] and are cast when bound to a graph.

mod adam;
mod gradcheck;
mod graph;
pub mod kernels;
mod params;
mod tensor;

pub use adam::{step_decay, AdamConfig, AdamState};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, REL_FLOOR};
pub use graph::{Grads, Graph, Var, RMSE_EPS};
pub use params::{Binding, ParamId, ParamStore, Parameter};
pub use tensor::{Real, Tensor};
