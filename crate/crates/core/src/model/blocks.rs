use rand::Rng;

use crate::autodiff::{
    Activation, BoundParams, ParamId, ParamSet, Real, Tape, Tensor, Var, LAYER_NORM_EPS,
};
use crate::error::{Error, Result};

/// Affine layer `in -> out` stored as `weight [out, in]` and `bias [out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineLayer {
    pub input: usize,
    pub output: usize,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl AffineLayer {
    /// Weights uniform on `(-1/sqrt(in), 1/sqrt(in))`, zero bias.
    pub fn init<T: Real, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        input: usize,
        output: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        let weight = params.add(
            format!("{name}.weight"),
            Tensor::uniform(&[output, input], bound, rng),
        );
        let bias = params.add(format!("{name}.bias"), Tensor::zeros(&[output]));
        Self {
            input,
            output,
            weight,
            bias,
        }
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, bound: &BoundParams, x: Var) -> Result<Var> {
        tape.affine(x, bound.var(self.weight), bound.var(self.bias))
    }

    pub fn num_params(&self) -> usize {
        (self.input + 1) * self.output
    }

    pub fn macs_per_row(&self) -> usize {
        self.input * self.output
    }
}

/// Learnable layer norm over a trailing axis of width `width`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerNormParams {
    pub width: usize,
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNormParams {
    pub fn init<T: Real>(params: &mut ParamSet<T>, name: &str, width: usize) -> Self {
        let gain = params.add(format!("{name}.gain"), Tensor::full(&[width], T::one()));
        let bias = params.add(format!("{name}.bias"), Tensor::zeros(&[width]));
        Self { width, gain, bias }
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, bound: &BoundParams, x: Var) -> Result<Var> {
        tape.layer_norm(
            x,
            bound.var(self.gain),
            bound.var(self.bias),
            LAYER_NORM_EPS,
        )
    }
}

/// Complex-domain MLP: the `X` complex values are flattened to `2X` reals,
/// mapped `2X -> S -> 2X`, and folded back to `X` complex values.
#[derive(Clone, Debug, PartialEq)]
pub struct CmlpBlock {
    pub width: usize,
    pub hidden: usize,
    pub up: AffineLayer,
    pub down: AffineLayer,
    pub activation: Activation,
}

impl CmlpBlock {
    pub fn init<T: Real, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        width: usize,
        hidden: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        Self {
            width,
            hidden,
            up: AffineLayer::init(params, &format!("{name}.up"), 2 * width, hidden, rng),
            down: AffineLayer::init(params, &format!("{name}.down"), hidden, 2 * width, rng),
            activation,
        }
    }

    /// Input `[..., X, 2]`, output of the same shape.
    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, bound: &BoundParams, x: Var) -> Result<Var> {
        let shape = tape.shape(x).to_vec();
        check_complex_trailing(&shape, self.width, "cmlp_forward")?;
        let rows = tape.value(x).len() / (2 * self.width);
        let flat = tape.reshape(x, &[rows, 2 * self.width])?;
        let y = self.forward_rows(tape, bound, flat)?;
        tape.reshape(y, &shape)
    }

    /// Rows already flattened to `[R, 2X]` with interleaved `(re, im)` pairs.
    pub fn forward_rows<T: Real>(
        &self,
        tape: &mut Tape<T>,
        bound: &BoundParams,
        x: Var,
    ) -> Result<Var> {
        let h = self.up.forward(tape, bound, x)?;
        let h = tape.activation(h, self.activation);
        self.down.forward(tape, bound, h)
    }

    pub fn num_params(&self) -> usize {
        self.up.num_params() + self.down.num_params()
    }

    pub fn macs_per_row(&self) -> usize {
        self.up.macs_per_row() + self.down.macs_per_row()
    }
}

/// Ablation counterpart of [`CmlpBlock`]: real and imaginary parts go
/// through two independent `X -> S -> X` MLPs and never meet inside the block.
#[derive(Clone, Debug, PartialEq)]
pub struct RealParallelBlock {
    pub width: usize,
    pub hidden: usize,
    pub real: [AffineLayer; 2],
    pub imag: [AffineLayer; 2],
    pub activation: Activation,
}

impl RealParallelBlock {
    pub fn init<T: Real, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        width: usize,
        hidden: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let mut pair = |part: &str| {
            [
                AffineLayer::init(params, &format!("{name}.{part}.up"), width, hidden, rng),
                AffineLayer::init(params, &format!("{name}.{part}.down"), hidden, width, rng),
            ]
        };
        let real = pair("real");
        let imag = pair("imag");
        Self {
            width,
            hidden,
            real,
            imag,
            activation,
        }
    }

    pub fn forward_rows<T: Real>(
        &self,
        tape: &mut Tape<T>,
        bound: &BoundParams,
        x: Var,
    ) -> Result<Var> {
        let rows = tape.value(x).len() / (2 * self.width);
        let pairs = tape.reshape(x, &[rows, self.width, 2])?;
        let mut parts = [None, None];
        for (k, mlp) in [&self.real, &self.imag].into_iter().enumerate() {
            let part = tape.select_last(pairs, k)?;
            let h = mlp[0].forward(tape, bound, part)?;
            let h = tape.activation(h, self.activation);
            parts[k] = Some(mlp[1].forward(tape, bound, h)?);
        }
        let stacked = tape.stack_last(parts[0].unwrap(), parts[1].unwrap())?;
        tape.reshape(stacked, &[rows, 2 * self.width])
    }

    pub fn num_params(&self) -> usize {
        self.real
            .iter()
            .chain(&self.imag)
            .map(AffineLayer::num_params)
            .sum()
    }

    pub fn macs_per_row(&self) -> usize {
        self.real
            .iter()
            .chain(&self.imag)
            .map(AffineLayer::macs_per_row)
            .sum()
    }
}

/// The map used for one mixing direction.
#[derive(Clone, Debug, PartialEq)]
pub enum MixingBlock {
    Cmlp(CmlpBlock),
    RealParallel(RealParallelBlock),
}

impl MixingBlock {
    pub fn forward_rows<T: Real>(
        &self,
        tape: &mut Tape<T>,
        bound: &BoundParams,
        x: Var,
    ) -> Result<Var> {
        match self {
            MixingBlock::Cmlp(b) => b.forward_rows(tape, bound, x),
            MixingBlock::RealParallel(b) => b.forward_rows(tape, bound, x),
        }
    }

    pub fn width(&self) -> usize {
        match self {
            MixingBlock::Cmlp(b) => b.width,
            MixingBlock::RealParallel(b) => b.width,
        }
    }

    pub fn hidden(&self) -> usize {
        match self {
            MixingBlock::Cmlp(b) => b.hidden,
            MixingBlock::RealParallel(b) => b.hidden,
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            MixingBlock::Cmlp(b) => b.num_params(),
            MixingBlock::RealParallel(b) => b.num_params(),
        }
    }

    /// Multiplies per mixed row; `4XS` for both kinds.
    pub fn macs_per_row(&self) -> usize {
        match self {
            MixingBlock::Cmlp(b) => b.macs_per_row(),
            MixingBlock::RealParallel(b) => b.macs_per_row(),
        }
    }

    /// Activation evaluations per mixed row.
    pub fn activations_per_row(&self) -> usize {
        match self {
            MixingBlock::Cmlp(b) => b.hidden,
            MixingBlock::RealParallel(b) => 2 * b.hidden,
        }
    }

    /// Second-stage affine layers, whose zeroing turns the block into the zero map.
    pub fn output_layers(&self) -> Vec<&AffineLayer> {
        match self {
            MixingBlock::Cmlp(b) => vec![&b.down],
            MixingBlock::RealParallel(b) => vec![&b.real[1], &b.imag[1]],
        }
    }
}

pub(crate) fn check_complex_trailing(
    shape: &[usize],
    width: usize,
    op: &'static str,
) -> Result<()> {
    let n = shape.len();
    if n < 2 || shape[n - 1] != 2 || shape[n - 2] != width {
        return Err(Error::shape(op, shape, &[width, 2]));
    }
    Ok(())
}
