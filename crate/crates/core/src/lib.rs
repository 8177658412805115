//! Channel mapping for MIMO-OFDM systems with a complex-domain,
//! interleaved space/frequency MLP-Mixer.
//!
//! * [`chanmodel`] draws synthetic multipath channels and extracts the known
//!   sub-grid a model sees.
//! * [`autodiff`] is a small tape-based reverse-mode engine with Adam.
//! * [`model`] builds the mixer, its ablation variants and a pure-MLP baseline.
//! * [`harness`] trains models and runs the ablation experiments.
//! * [`iocli`] is the command-line front end and owns all file I/O.

pub mod autodiff;
pub mod chanmodel;
mod codec;
pub mod error;
pub mod harness;
pub mod iocli;
pub mod model;

pub use error::{Error, Result};
