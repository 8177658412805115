use rand::Rng;

use super::blocks::AffineLayer;
use super::MixerHyperparams;
use crate::autodiff::{Activation, BoundParams, ParamSet, Real, Tape, Var};
use crate::error::{Error, Result};

/// Number of hidden layers in the baseline.
pub const BASELINE_HIDDEN_LAYERS: usize = 3;

/// Fully connected baseline: the flattened known channel goes through
/// three equal-width hidden layers to the flattened full channel.
#[derive(Clone, Debug, PartialEq)]
pub struct PureMlp {
    pub hyper: MixerHyperparams,
    pub layers: Vec<AffineLayer>,
    pub activation: Activation,
}

/// Parameter count of the baseline with hidden width `h`.
pub fn baseline_params(input: usize, output: usize, h: usize) -> usize {
    (input + 1) * h + (BASELINE_HIDDEN_LAYERS - 1) * (h + 1) * h + (h + 1) * output
}

/// Hidden width whose parameter count is closest to `target`.
pub fn matched_hidden_width(input: usize, output: usize, target: usize) -> usize {
    // Parameter count is increasing in h, so bisect then compare neighbours.
    let (mut lo, mut hi) = (1usize, 1usize);
    while baseline_params(input, output, hi) < target {
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if baseline_params(input, output, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gap = |h: usize| baseline_params(input, output, h).abs_diff(target);
    if gap(lo) <= gap(hi) {
        lo
    } else {
        hi
    }
}

impl PureMlp {
    pub(crate) fn init<T: Real, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        hp: &MixerHyperparams,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let input = 2 * hp.n_t0 * hp.n_c0;
        let output = 2 * hp.n_t * hp.n_c;
        let mut widths = vec![input];
        widths.extend(std::iter::repeat_n(hidden, BASELINE_HIDDEN_LAYERS));
        widths.push(output);
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| AffineLayer::init(params, &format!("mlp.{i}"), w[0], w[1], rng))
            .collect();
        Self {
            hyper: hp.clone(),
            layers,
            activation: hp.activation,
        }
    }

    pub fn hidden_width(&self) -> usize {
        self.layers[0].output
    }

    /// `[B, N_c0, N_t0, 2]` to `[B, N_c, N_t, 2]`.
    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, bound: &BoundParams, x: Var) -> Result<Var> {
        let hp = &self.hyper;
        let shape = tape.shape(x);
        if shape.len() != 4 || shape[1..] != [hp.n_c0, hp.n_t0, 2] {
            return Err(Error::shape("model_forward", shape, &[hp.n_c0, hp.n_t0, 2]));
        }
        let batch = shape[0];
        let mut h = tape.reshape(x, &[batch, 2 * hp.n_c0 * hp.n_t0])?;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, bound, h)?;
            if i < last {
                h = tape.activation(h, self.activation);
            }
        }
        tape.reshape(h, &[batch, hp.n_c, hp.n_t, 2])
    }
}
