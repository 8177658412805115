use serde::{Deserialize, Serialize};

use super::{Architecture, MixerHyperparams, MixingBlock, MixingKind, Model};
use crate::autodiff::Real;

/// Learnable-scalar count split by stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBreakdown {
    pub embeddings: usize,
    pub mixer_stack: usize,
    pub heads: usize,
    /// Fully connected layers of the pure-MLP baseline.
    pub baseline: usize,
    pub total: usize,
}

/// How multiply-accumulates and elementwise work are turned into FLOPs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopConvention {
    pub flops_per_mac: u64,
    /// Count one FLOP per element for layer norms, activations and residual adds.
    pub elementwise: bool,
}

impl FlopConvention {
    /// Profiler-style count: one FLOP per MAC plus one per elementwise op.
    pub const PROFILER: Self = Self {
        flops_per_mac: 1,
        elementwise: true,
    };
    /// Textbook count: two FLOPs per MAC, elementwise work ignored.
    pub const TWO_PER_MAC: Self = Self {
        flops_per_mac: 2,
        elementwise: false,
    };

    pub fn describe(&self) -> String {
        format!(
            "{} FLOP per multiply-accumulate; layer norm, activation and residual add {}; bias adds excluded",
            self.flops_per_mac,
            if self.elementwise {
                "counted once per element"
            } else {
                "excluded"
            }
        )
    }
}

impl Default for FlopConvention {
    fn default() -> Self {
        Self::PROFILER
    }
}

/// Forward FLOPs of one channel sample, split by stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopBreakdown {
    pub embeddings: u64,
    pub mixer_stack: u64,
    pub heads: u64,
    pub baseline: u64,
    pub total: u64,
    pub convention: FlopConvention,
}

/// FLOPs of an `input -> output` affine map applied to `rows` vectors.
pub fn affine_flops(input: usize, output: usize, rows: usize, convention: FlopConvention) -> u64 {
    (rows * input * output) as u64 * convention.flops_per_mac
}

fn block_params(kind: MixingKind, x: usize, s: usize) -> usize {
    match kind {
        MixingKind::Cmlp => (2 * x + 1) * s + (s + 1) * 2 * x,
        MixingKind::RealParallel => 2 * ((x + 1) * s + (s + 1) * x),
    }
}

/// Closed-form parameter count of a mixer with the given block kinds.
pub(crate) fn mixer_param_count(hp: &MixerHyperparams, kinds: (MixingKind, MixingKind)) -> usize {
    let embed = (2 * hp.n_t0 + 1) * 2 * hp.n_t_prime + (2 * hp.n_c0 + 1) * 2 * hp.n_c_prime;
    let layer = 4 * hp.n_t_prime
        + block_params(kinds.0, hp.n_t_prime, hp.s_t)
        + 4 * hp.n_c_prime
        + block_params(kinds.1, hp.n_c_prime, hp.s_c);
    let heads = (2 * hp.n_t_prime + 1) * 2 * hp.n_t + (2 * hp.n_c_prime + 1) * 2 * hp.n_c;
    embed + hp.k * layer + heads
}

pub(crate) fn count_params<T: Real>(model: &Model<T>) -> ParamBreakdown {
    let mut out = ParamBreakdown::default();
    for (name, t) in model.params().iter() {
        let slot = if name.starts_with("embed_") {
            &mut out.embeddings
        } else if name.starts_with("layers.") {
            &mut out.mixer_stack
        } else if name.starts_with("head_") {
            &mut out.heads
        } else {
            &mut out.baseline
        };
        *slot += t.len();
        out.total += t.len();
    }
    out
}

fn mixing_stage_flops(block: &MixingBlock, rows: usize, c: FlopConvention) -> u64 {
    let mut flops = (rows * block.macs_per_row()) as u64 * c.flops_per_mac;
    if c.elementwise {
        let width = 2 * block.width();
        // layer norm + residual add over the 2X inputs, activation over the hidden units
        flops += (rows * (2 * width + block.activations_per_row())) as u64;
    }
    flops
}

pub(crate) fn count_flops<T: Real>(model: &Model<T>, c: FlopConvention) -> FlopBreakdown {
    let hp = model.hyper();
    let mut out = FlopBreakdown {
        embeddings: 0,
        mixer_stack: 0,
        heads: 0,
        baseline: 0,
        total: 0,
        convention: c,
    };
    match model.architecture() {
        Architecture::Mixer(m) => {
            out.embeddings = affine_flops(m.embed_ant.input, m.embed_ant.output, hp.n_c0, c)
                + affine_flops(m.embed_sub.input, m.embed_sub.output, hp.n_t_prime, c);
            for layer in &m.layers {
                out.mixer_stack += mixing_stage_flops(&layer.space, hp.n_c_prime, c)
                    + mixing_stage_flops(&layer.freq, hp.n_t_prime, c);
            }
            out.heads = affine_flops(m.head_ant.input, m.head_ant.output, hp.n_c_prime, c)
                + affine_flops(m.head_sub.input, m.head_sub.output, hp.n_t, c);
        }
        Architecture::Mlp(m) => {
            let last = m.layers.len() - 1;
            for (i, layer) in m.layers.iter().enumerate() {
                out.baseline += affine_flops(layer.input, layer.output, 1, c);
                if c.elementwise && i < last {
                    out.baseline += layer.output as u64;
                }
            }
        }
    }
    out.total = out.embeddings + out.mixer_stack + out.heads + out.baseline;
    out
}
