//! CMixer channel-mapping model, its ablation variants and the pure-MLP baseline.
//!
//! All tensors flowing through a model use the layout `[B, subcarrier,
//! antenna, 2]`, with the trailing axis holding `(re, im)`. Flattening the
//! last two axes therefore gives the interleaved order `[r0, m0, r1, m1, ...]`
//! that every complex-domain layer consumes.

mod accounting;
mod baseline;
mod blocks;
mod mixer;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Activation, BoundParams, ParamSet, Real, Tape, Tensor, Var};
use crate::error::{Error, Result};

pub use accounting::{affine_flops, FlopBreakdown, FlopConvention, ParamBreakdown};
pub use baseline::{baseline_params, matched_hidden_width, PureMlp, BASELINE_HIDDEN_LAYERS};
pub use blocks::{AffineLayer, CmlpBlock, LayerNormParams, MixingBlock, RealParallelBlock};
pub use mixer::{CMixerModel, MixerLayer};

/// How a mixing block treats complex values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingKind {
    /// `2X -> S -> 2X` on interleaved real/imaginary parts.
    Cmlp,
    /// Two independent `X -> S -> X` MLPs, one per part.
    RealParallel,
}

/// Model family plus, for mixers, the block kind of each mixing direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelVariant {
    Mixer {
        space: MixingKind,
        frequency: MixingKind,
    },
    PureMlpBaseline,
}

impl ModelVariant {
    pub const CMIXER: Self = ModelVariant::Mixer {
        space: MixingKind::Cmlp,
        frequency: MixingKind::Cmlp,
    };
    pub const REAL_PARALLEL_MIXER: Self = ModelVariant::Mixer {
        space: MixingKind::RealParallel,
        frequency: MixingKind::RealParallel,
    };

    /// The four (space, frequency) combinations of the CMLP ablation.
    pub fn ablation_grid() -> [Self; 4] {
        use MixingKind::*;
        [
            ModelVariant::Mixer {
                space: RealParallel,
                frequency: RealParallel,
            },
            ModelVariant::Mixer {
                space: Cmlp,
                frequency: RealParallel,
            },
            ModelVariant::Mixer {
                space: RealParallel,
                frequency: Cmlp,
            },
            ModelVariant::Mixer {
                space: Cmlp,
                frequency: Cmlp,
            },
        ]
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use MixingKind::*;
        let name = match self {
            ModelVariant::Mixer {
                space: Cmlp,
                frequency: Cmlp,
            } => "cmixer",
            ModelVariant::Mixer {
                space: RealParallel,
                frequency: RealParallel,
            } => "real-parallel",
            ModelVariant::Mixer {
                space: Cmlp,
                frequency: RealParallel,
            } => "space-cmlp",
            ModelVariant::Mixer {
                space: RealParallel,
                frequency: Cmlp,
            } => "freq-cmlp",
            ModelVariant::PureMlpBaseline => "mlp",
        };
        f.write_str(name)
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use MixingKind::*;
        Ok(match s {
            "cmixer" => Self::CMIXER,
            "real-parallel" => Self::REAL_PARALLEL_MIXER,
            "space-cmlp" => ModelVariant::Mixer { space: Cmlp, frequency: RealParallel },
            "freq-cmlp" => ModelVariant::Mixer { space: RealParallel, frequency: Cmlp },
            "mlp" => ModelVariant::PureMlpBaseline,
            other => {
                return Err(Error::Config(format!(
                    "unknown variant '{other}' (expected cmixer, real-parallel, space-cmlp, freq-cmlp or mlp)"
                )))
            }
        })
    }
}

impl TryFrom<String> for ModelVariant {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelVariant> for String {
    fn from(v: ModelVariant) -> Self {
        v.to_string()
    }
}

/// Architecture sizes. Primed widths are the internal feature sizes, `S` the
/// hidden widths of the mixing MLPs, and `*0` the known sub-grid size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixerHyperparams {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N_t")]
    pub n_t: usize,
    #[serde(rename = "N_c")]
    pub n_c: usize,
    #[serde(rename = "N_t_prime")]
    pub n_t_prime: usize,
    #[serde(rename = "N_c_prime")]
    pub n_c_prime: usize,
    #[serde(rename = "S_t")]
    pub s_t: usize,
    #[serde(rename = "S_c")]
    pub s_c: usize,
    #[serde(rename = "N_t0")]
    pub n_t0: usize,
    #[serde(rename = "N_c0")]
    pub n_c0: usize,
    #[serde(default)]
    pub activation: Activation,
}

impl MixerHyperparams {
    /// K = 5, every width 32, hidden 128, with the given known sub-grid.
    pub fn reference(n_t0: usize, n_c0: usize) -> Self {
        Self {
            k: 5,
            n_t: 32,
            n_c: 32,
            n_t_prime: 32,
            n_c_prime: 32,
            s_t: 128,
            s_c: 128,
            n_t0,
            n_c0,
            activation: Activation::Gelu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [
            ("N_t", self.n_t),
            ("N_c", self.n_c),
            ("N_t_prime", self.n_t_prime),
            ("N_c_prime", self.n_c_prime),
            ("S_t", self.s_t),
            ("S_c", self.s_c),
            ("N_t0", self.n_t0),
            ("N_c0", self.n_c0),
        ];
        if let Some((name, _)) = widths.iter().find(|(_, w)| *w == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.n_t0 > self.n_t || self.n_c0 > self.n_c {
            return Err(Error::Config(format!(
                "known size {}x{} exceeds channel size {}x{}",
                self.n_t0, self.n_c0, self.n_t, self.n_c
            )));
        }
        Ok(())
    }
}

/// JSON description stored next to a checkpoint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub variant: ModelVariant,
    #[serde(flatten)]
    pub hyper: MixerHyperparams,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Architecture {
    Mixer(CMixerModel),
    Mlp(PureMlp),
}

/// A built model: architecture plus its learnable parameters.
#[derive(Clone, Debug)]
pub struct Model<T> {
    descriptor: ModelDescriptor,
    arch: Architecture,
    params: ParamSet<T>,
}

/// Construct a freshly initialised model. Hyperparameters are validated here
/// so forward passes never fail on configuration.
pub fn build_variant<T: Real>(descriptor: &ModelDescriptor, seed: u64) -> Result<Model<T>> {
    let hp = &descriptor.hyper;
    hp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamSet::new();
    let arch = match descriptor.variant {
        ModelVariant::Mixer { space, frequency } => {
            if hp.n_t_prime < 1 || hp.n_c_prime < 1 {
                return Err(Error::Config("mixer widths must be positive".into()));
            }
            Architecture::Mixer(CMixerModel::init(
                &mut params,
                hp,
                (space, frequency),
                &mut rng,
            ))
        }
        ModelVariant::PureMlpBaseline => {
            let target = accounting::mixer_param_count(hp, (MixingKind::Cmlp, MixingKind::Cmlp));
            let hidden = matched_hidden_width(2 * hp.n_t0 * hp.n_c0, 2 * hp.n_t * hp.n_c, target);
            Architecture::Mlp(PureMlp::init(&mut params, hp, hidden, &mut rng))
        }
    };
    Ok(Model {
        descriptor: descriptor.clone(),
        arch,
        params,
    })
}

impl<T: Real> Model<T> {
    pub fn descriptor(&self) -> &ModelDescriptor {
        &self.descriptor
    }

    pub fn hyper(&self) -> &MixerHyperparams {
        &self.descriptor.hyper
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    /// Same architecture with parameters converted to another precision.
    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            descriptor: self.descriptor.clone(),
            arch: self.arch.clone(),
            params: self.params.cast(),
        }
    }

    /// Input shape `[B, N_c0, N_t0, 2]`, output `[B, N_c, N_t, 2]`.
    pub fn forward(&self, tape: &mut Tape<T>, bound: &BoundParams, x: Var) -> Result<Var> {
        match &self.arch {
            Architecture::Mixer(m) => m.forward(tape, bound, x),
            Architecture::Mlp(m) => m.forward(tape, bound, x),
        }
    }

    /// Forward pass without gradient tracking.
    pub fn predict(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::inference();
        let bound = self.params.bind(&mut tape);
        let x = tape.leaf(input.clone(), false);
        let y = self.forward(&mut tape, &bound, x)?;
        Ok(tape.value(y).clone())
    }

    pub fn count_params(&self) -> ParamBreakdown {
        accounting::count_params(self)
    }

    pub fn count_flops(&self, convention: FlopConvention) -> FlopBreakdown {
        accounting::count_flops(self, convention)
    }
}
