use rand::Rng;

use super::blocks::{
    check_complex_trailing, AffineLayer, CmlpBlock, LayerNormParams, MixingBlock, RealParallelBlock,
};
use super::{MixerHyperparams, MixingKind};
use crate::autodiff::{Activation, BoundParams, ParamSet, Real, Tape, Var};
use crate::error::{Error, Result};

/// Swap the two middle axes of a `[B, A, C, 2]` tensor.
pub(crate) fn swap_middle<T: Real>(tape: &mut Tape<T>, x: Var) -> Result<Var> {
    tape.permute(x, &[0, 2, 1, 3])
}

fn mixing_block<T: Real, R: Rng + ?Sized>(
    params: &mut ParamSet<T>,
    name: &str,
    kind: MixingKind,
    width: usize,
    hidden: usize,
    activation: Activation,
    rng: &mut R,
) -> MixingBlock {
    match kind {
        MixingKind::Cmlp => MixingBlock::Cmlp(CmlpBlock::init(
            params, name, width, hidden, activation, rng,
        )),
        MixingKind::RealParallel => MixingBlock::RealParallel(RealParallelBlock::init(
            params, name, width, hidden, activation, rng,
        )),
    }
}

/// One interleaved learning layer: space mixing shared across every
/// subcarrier, then frequency mixing shared across every antenna, each with
/// a pre-norm residual connection.
#[derive(Clone, Debug, PartialEq)]
pub struct MixerLayer {
    pub ln_space: LayerNormParams,
    pub space: MixingBlock,
    pub ln_freq: LayerNormParams,
    pub freq: MixingBlock,
}

impl MixerLayer {
    pub(crate) fn init<T: Real, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        hp: &MixerHyperparams,
        kinds: (MixingKind, MixingKind),
        rng: &mut R,
    ) -> Self {
        let ln_space = LayerNormParams::init(params, &format!("{name}.ln_space"), 2 * hp.n_t_prime);
        let space = mixing_block(
            params,
            &format!("{name}.space"),
            kinds.0,
            hp.n_t_prime,
            hp.s_t,
            hp.activation,
            rng,
        );
        let ln_freq = LayerNormParams::init(params, &format!("{name}.ln_freq"), 2 * hp.n_c_prime);
        let freq = mixing_block(
            params,
            &format!("{name}.freq"),
            kinds.1,
            hp.n_c_prime,
            hp.s_c,
            hp.activation,
            rng,
        );
        Self {
            ln_space,
            space,
            ln_freq,
            freq,
        }
    }

    /// `x + block(LN(x))` applied to every slice `x[b, a, :, :]` of a `[B, A, C, 2]` tensor.
    fn residual_stage<T: Real>(
        tape: &mut Tape<T>,
        bound: &BoundParams,
        ln: &LayerNormParams,
        block: &MixingBlock,
        x: Var,
    ) -> Result<Var> {
        let shape = tape.shape(x).to_vec();
        let rows = shape[0] * shape[1];
        let flat = tape.reshape(x, &[rows, 2 * shape[2]])?;
        let normed = ln.forward(tape, bound, flat)?;
        let mixed = block.forward_rows(tape, bound, normed)?;
        let out = tape.add(flat, mixed)?;
        tape.reshape(out, &shape)
    }

    /// Input and output `[B, N_c', N_t', 2]`.
    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, bound: &BoundParams, x: Var) -> Result<Var> {
        let shape = tape.shape(x).to_vec();
        if shape.len() != 4 {
            return Err(Error::shape("mixer_layer_forward", &shape, &[0, 0, 0, 2]));
        }
        check_complex_trailing(&shape, self.space.width(), "mixer_layer_forward")?;
        if shape[1] != self.freq.width() {
            return Err(Error::shape(
                "mixer_layer_forward",
                &shape,
                &[shape[0], self.freq.width(), self.space.width(), 2],
            ));
        }
        let v = Self::residual_stage(tape, bound, &self.ln_space, &self.space, x)?;
        let vt = swap_middle(tape, v)?;
        let ot = Self::residual_stage(tape, bound, &self.ln_freq, &self.freq, vt)?;
        swap_middle(tape, ot)
    }

    /// Space-mixing half only (frequency mixing skipped).
    pub fn forward_space_only<T: Real>(
        &self,
        tape: &mut Tape<T>,
        bound: &BoundParams,
        x: Var,
    ) -> Result<Var> {
        Self::residual_stage(tape, bound, &self.ln_space, &self.space, x)
    }

    pub fn num_params(&self) -> usize {
        2 * self.ln_space.width
            + self.space.num_params()
            + 2 * self.ln_freq.width
            + self.freq.num_params()
    }
}

/// Embedding MLPs, `K` stacked mixer layers and head MLPs.
#[derive(Clone, Debug, PartialEq)]
pub struct CMixerModel {
    pub hyper: MixerHyperparams,
    pub embed_ant: AffineLayer,
    pub embed_sub: AffineLayer,
    pub layers: Vec<MixerLayer>,
    pub head_ant: AffineLayer,
    pub head_sub: AffineLayer,
}

impl CMixerModel {
    pub(crate) fn init<T: Real, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        hp: &MixerHyperparams,
        kinds: (MixingKind, MixingKind),
        rng: &mut R,
    ) -> Self {
        let embed_ant = AffineLayer::init(params, "embed_ant", 2 * hp.n_t0, 2 * hp.n_t_prime, rng);
        let embed_sub = AffineLayer::init(params, "embed_sub", 2 * hp.n_c0, 2 * hp.n_c_prime, rng);
        let layers = (0..hp.k)
            .map(|i| MixerLayer::init(params, &format!("layers.{i}"), hp, kinds, rng))
            .collect();
        let head_ant = AffineLayer::init(params, "head_ant", 2 * hp.n_t_prime, 2 * hp.n_t, rng);
        let head_sub = AffineLayer::init(params, "head_sub", 2 * hp.n_c_prime, 2 * hp.n_c, rng);
        Self {
            hyper: hp.clone(),
            embed_ant,
            embed_sub,
            layers,
            head_ant,
            head_sub,
        }
    }

    /// Map the trailing complex axis of `[B, A, C, 2]` through `layer`, then swap the middle axes.
    fn map_and_swap<T: Real>(
        tape: &mut Tape<T>,
        bound: &BoundParams,
        layer: &AffineLayer,
        x: Var,
    ) -> Result<Var> {
        let shape = tape.shape(x).to_vec();
        let rows = shape[0] * shape[1];
        let flat = tape.reshape(x, &[rows, 2 * shape[2]])?;
        let y = layer.forward(tape, bound, flat)?;
        let y = tape.reshape(y, &[shape[0], shape[1], layer.output / 2, 2])?;
        swap_middle(tape, y)
    }

    /// `[B, N_c0, N_t0, 2]` known channel to `[B, N_c', N_t', 2]` features.
    pub fn embed<T: Real>(&self, tape: &mut Tape<T>, bound: &BoundParams, x: Var) -> Result<Var> {
        let y = Self::map_and_swap(tape, bound, &self.embed_ant, x)?;
        Self::map_and_swap(tape, bound, &self.embed_sub, y)
    }

    /// `[B, N_c', N_t', 2]` features to `[B, N_c, N_t, 2]` CSI.
    pub fn head<T: Real>(&self, tape: &mut Tape<T>, bound: &BoundParams, x: Var) -> Result<Var> {
        let y = Self::map_and_swap(tape, bound, &self.head_ant, x)?;
        Self::map_and_swap(tape, bound, &self.head_sub, y)
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, bound: &BoundParams, x: Var) -> Result<Var> {
        let hp = &self.hyper;
        let shape = tape.shape(x);
        if shape.len() != 4 || shape[1..] != [hp.n_c0, hp.n_t0, 2] {
            return Err(Error::shape("model_forward", shape, &[hp.n_c0, hp.n_t0, 2]));
        }
        let mut h = self.embed(tape, bound, x)?;
        for layer in &self.layers {
            h = layer.forward(tape, bound, h)?;
        }
        self.head(tape, bound, h)
    }
}
