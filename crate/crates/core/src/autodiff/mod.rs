//! Dense reverse-mode automatic differentiation.
//!
//! Values live on a [`Tape`]; each operation appends a node that remembers
//! its inputs and whatever it needs for the backward rule. [`Tape::backward`]
//! walks the nodes in reverse creation order and accumulates gradients into
//! the leaves. Learnable tensors are kept in a [`ParamSet`] between steps and
//! re-bound onto a fresh tape for every forward pass.

mod checkpoint;
mod optim;
mod params;
mod scalar;
mod tape;
mod tensor;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use optim::{adam_step, lr_at, AdamState, LrSchedule};
pub use params::{BoundParams, ParamId, ParamSet};
pub use scalar::Real;
pub use tape::{Activation, Gradients, Tape, Var, GELU_TANH_SCALE};
pub use tensor::Tensor;

/// Layer-norm epsilon used throughout the model.
pub const LAYER_NORM_EPS: f64 = 1e-5;
