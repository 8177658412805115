use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{nmse, rho, TestMetrics};
use super::{split_dataset, ExperimentConfig, Precision, ShufflePlan};
use crate::autodiff::{adam_step, lr_at, AdamState, Real, Tape, Tensor};
use crate::chanmodel::{extract_known, ChannelDataset, CsiMatrix, SubsetSpec};
use crate::error::{Error, Result};
use crate::model::{build_variant, Model};

/// Batch size used when predicting for evaluation.
const EVAL_BATCH: usize = 250;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: ExperimentConfig,
    pub epochs: Vec<EpochRecord>,
    /// `None` when the split leaves no test samples.
    pub test: Option<TestMetrics>,
    pub wallclock_s: f64,
    pub seed: u64,
    /// SHA-256 over the config and the dataset contents.
    pub fingerprint: String,
    pub params: usize,
    /// Training-set RMS that inputs and targets were divided by.
    pub normalization_scale: f64,
}

impl MetricsReport {
    pub fn initial_loss(&self) -> Option<f64> {
        self.epochs.first().map(|e| e.train_loss)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_loss)
    }
}

/// Result of [`train`]: the report plus the trained parameters in single precision.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub report: MetricsReport,
    pub model: Model<f32>,
}

/// Append `h / scale` in model layout `[subcarrier, antenna, (re, im)]`.
fn push_model_layout<T: Real>(h: &CsiMatrix, scale: f64, out: &mut Vec<T>) {
    for n in 0..h.n_c() {
        for m in 0..h.n_t() {
            let z = h.get(m, n);
            out.push(T::of(z.re / scale));
            out.push(T::of(z.im / scale));
        }
    }
}

/// Inverse of the model layout for one sample.
pub fn model_layout_to_csi<T: Real>(data: &[T], n_t: usize, n_c: usize) -> Result<CsiMatrix> {
    if data.len() != 2 * n_t * n_c {
        return Err(Error::shape(
            "model_layout_to_csi",
            &[data.len()],
            &[n_c, n_t, 2],
        ));
    }
    let mut h = CsiMatrix::zeros(n_t, n_c);
    for n in 0..n_c {
        for m in 0..n_t {
            let k = 2 * (n * n_t + m);
            h.set(
                m,
                n,
                num_complex::Complex64::new(data[k].as_f64(), data[k + 1].as_f64()),
            );
        }
    }
    Ok(h)
}

/// Model inputs and targets for a set of dataset samples, already normalized.
#[derive(Clone, Debug)]
pub struct PreparedSet<T> {
    inputs: Vec<T>,
    targets: Vec<T>,
    input_shape: [usize; 3],
    target_shape: [usize; 3],
}

impl<T: Real> PreparedSet<T> {
    /// Shuffled targets, inputs taken from the original channel unless `shuffle_inputs`.
    pub fn new(
        dataset: &ChannelDataset,
        indices: &[usize],
        subset: &SubsetSpec,
        plan: &ShufflePlan,
        shuffle_inputs: bool,
        scale: f64,
    ) -> Result<Self> {
        subset.check_bounds(dataset.n_t(), dataset.n_c())?;
        let (n_t0, n_c0) = (subset.antennas().len(), subset.subcarriers().len());
        let mut inputs = Vec::with_capacity(indices.len() * 2 * n_t0 * n_c0);
        let mut targets = Vec::with_capacity(indices.len() * 2 * dataset.n_t() * dataset.n_c());
        for &i in indices {
            let h = dataset.sample(i);
            let target = plan.apply(&h)?;
            let known = extract_known(if shuffle_inputs { &target } else { &h }, subset)?;
            push_model_layout(&known, scale, &mut inputs);
            push_model_layout(&target, scale, &mut targets);
        }
        Ok(Self {
            inputs,
            targets,
            input_shape: [n_c0, n_t0, 2],
            target_shape: [dataset.n_c(), dataset.n_t(), 2],
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.input_shape.iter().product::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn gather(data: &[T], shape: &[usize; 3], rows: &[usize]) -> Tensor<T> {
        let per: usize = shape.iter().product();
        let mut out = Vec::with_capacity(rows.len() * per);
        for &r in rows {
            out.extend_from_slice(&data[r * per..(r + 1) * per]);
        }
        Tensor::with_shape(vec![rows.len(), shape[0], shape[1], shape[2]], out)
    }

    pub fn batch(&self, rows: &[usize]) -> (Tensor<T>, Tensor<T>) {
        (
            Self::gather(&self.inputs, &self.input_shape, rows),
            Self::gather(&self.targets, &self.target_shape, rows),
        )
    }

    /// Target of row `r` as a channel matrix (normalized units).
    pub fn target_csi(&self, r: usize) -> CsiMatrix {
        let per: usize = self.target_shape.iter().product();
        model_layout_to_csi(
            &self.targets[r * per..(r + 1) * per],
            self.target_shape[1],
            self.target_shape[0],
        )
        .expect("prepared targets have the declared shape")
    }
}

/// RMS entry magnitude over the given samples.
pub fn rms_scale(dataset: &ChannelDataset, indices: &[usize]) -> Result<f64> {
    let mut sum = 0.0;
    for &i in indices {
        sum += dataset
            .raw_sample(i)
            .iter()
            .map(|&v| (v as f64) * (v as f64))
            .sum::<f64>();
    }
    let scale = (sum / (indices.len() * dataset.n_t() * dataset.n_c()) as f64).sqrt();
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Validation("training samples have zero power".into()));
    }
    Ok(scale)
}

/// Test NMSE and correlation of `model` on a prepared set.
pub fn evaluate<T: Real>(model: &Model<T>, set: &PreparedSet<T>) -> Result<TestMetrics> {
    if set.is_empty() {
        return Err(Error::Validation("evaluation set is empty".into()));
    }
    let [n_c, n_t, _] = set.target_shape;
    let rows: Vec<usize> = (0..set.len()).collect();
    let mut truth = Vec::with_capacity(set.len());
    let mut pred = Vec::with_capacity(set.len());
    for chunk in rows.chunks(EVAL_BATCH) {
        let (x, _) = set.batch(chunk);
        let y = model.predict(&x)?;
        for (k, &r) in chunk.iter().enumerate() {
            let per = 2 * n_t * n_c;
            pred.push(model_layout_to_csi(
                &y.data()[k * per..(k + 1) * per],
                n_t,
                n_c,
            )?);
            truth.push(set.target_csi(r));
        }
    }
    Ok(TestMetrics::new(nmse(&truth, &pred)?, rho(&truth, &pred)?))
}

/// SHA-256 over the serialized config and the dataset file image.
pub fn run_fingerprint(config: &ExperimentConfig, dataset: &ChannelDataset) -> Result<String> {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(config)?);
    hasher.update(dataset.to_bytes()?);
    Ok(hex::encode(hasher.finalize()))
}

/// Train the configured model on `dataset` with the shuffle given by the config.
pub fn train(config: &ExperimentConfig, dataset: &ChannelDataset) -> Result<TrainOutcome> {
    let plan = ShufflePlan::from_spec(&config.shuffle, dataset.n_t(), dataset.n_c());
    train_with_plan(config, dataset, &plan)
}

/// [`train`] with explicit shuffle permutations.
pub fn train_with_plan(
    config: &ExperimentConfig,
    dataset: &ChannelDataset,
    plan: &ShufflePlan,
) -> Result<TrainOutcome> {
    match config.precision {
        Precision::F32 => train_typed::<f32>(config, dataset, plan),
        Precision::F64 => train_typed::<f64>(config, dataset, plan),
    }
}

fn train_typed<T: Real>(
    config: &ExperimentConfig,
    dataset: &ChannelDataset,
    plan: &ShufflePlan,
) -> Result<TrainOutcome> {
    let start = Instant::now();
    config.validate()?;
    config.check_channel_size(dataset.n_t(), dataset.n_c())?;
    let hp = &config.model.hyper;
    let subset = SubsetSpec::uniform(hp.n_t, hp.n_t0, hp.n_c, hp.n_c0)?;
    let (train_idx, test_idx) = split_dataset(dataset.len(), config.split, config.seed)?;
    config.check_batching(train_idx.len())?;
    let scale = rms_scale(dataset, &train_idx)?;
    let shuffle_inputs = config.shuffle.shuffle_inputs;
    let train_set =
        PreparedSet::<T>::new(dataset, &train_idx, &subset, plan, shuffle_inputs, scale)?;
    let test_set = if test_idx.is_empty() {
        None
    } else {
        Some(PreparedSet::<T>::new(
            dataset,
            &test_idx,
            &subset,
            plan,
            shuffle_inputs,
            scale,
        )?)
    };

    let mut model = build_variant::<T>(&config.model, config.seed)?;
    let mut adam = AdamState::new(model.params());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let lr = lr_at(epoch, &config.schedule)?;
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, rows) in order.chunks(config.batch_size).enumerate() {
            let (x, y) = train_set.batch(rows);
            let mut tape = Tape::new();
            let bound = model.params().bind(&mut tape);
            let xv = tape.leaf(x, false);
            let yv = tape.leaf(y, false);
            let pred = model.forward(&mut tape, &bound, xv)?;
            let loss = tape.mse_loss(pred, yv)?;
            let value = tape.value(loss).data()[0].as_f64();
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: b + 1,
                    lr,
                });
            }
            let grads = tape.backward(loss)?;
            let grads = bound.gradients(&grads, model.params());
            adam_step(model.params_mut(), &grads, &mut adam, lr)?;
            total += value * rows.len() as f64;
        }
        let train_loss = total / train_set.len() as f64;
        log::debug!("epoch {epoch} lr {lr:.2e} loss {train_loss:.6}");
        epochs.push(EpochRecord {
            epoch,
            lr,
            train_loss,
        });
    }

    let test = test_set.as_ref().map(|s| evaluate(&model, s)).transpose()?;
    if let Some(t) = &test {
        log::info!(
            "{} ({}): test NMSE {:.2} dB, rho {:.4}",
            config.model.variant,
            plan.mode(),
            t.nmse_db,
            t.rho
        );
    }
    let report = MetricsReport {
        config: config.clone(),
        epochs,
        test,
        wallclock_s: start.elapsed().as_secs_f64(),
        seed: config.seed,
        fingerprint: run_fingerprint(config, dataset)?,
        params: model.count_params().total,
        normalization_scale: scale,
    };
    Ok(TrainOutcome {
        report,
        model: model.cast(),
    })
}
