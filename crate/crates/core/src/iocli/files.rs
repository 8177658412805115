use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autodiff::{decode_checkpoint, encode_checkpoint};
use crate::chanmodel::{generate_dataset, ChannelDataset};
use crate::error::{Error, Result};
use crate::harness::{DatasetSource, ExperimentConfig};
use crate::model::{build_variant, Model, ModelDescriptor};

/// Write `bytes` to a temporary file next to `path`, then rename it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))
}

pub fn save_dataset(path: &Path, dataset: &ChannelDataset) -> Result<()> {
    write_atomic(path, &dataset.to_bytes()?)
}

pub fn load_dataset(path: &Path) -> Result<ChannelDataset> {
    ChannelDataset::from_bytes(&std::fs::read(path)?, path)
}

/// Worker threads for generation and ablation cells: `CMIXER_THREADS` if set,
/// otherwise the number of available cores.
pub fn worker_threads() -> usize {
    std::env::var("CMIXER_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Load or generate the samples an experiment refers to.
pub fn resolve_dataset(config: &ExperimentConfig) -> Result<ChannelDataset> {
    match &config.dataset {
        DatasetSource::File { path } => load_dataset(path),
        DatasetSource::Generate { scenario, samples } => {
            generate_dataset(scenario, *samples, worker_threads())
        }
    }
}

/// Sidecar stored next to a checkpoint as `<checkpoint>.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelDescriptor,
    pub params: usize,
    pub normalization_scale: f64,
}

pub fn sidecar_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn save_checkpoint(path: &Path, model: &Model<f32>, normalization_scale: f64) -> Result<()> {
    let meta = CheckpointMeta {
        model: model.descriptor().clone(),
        params: model.count_params().total,
        normalization_scale,
    };
    write_atomic(path, &encode_checkpoint(model.params()))?;
    write_json(&sidecar_path(path), &meta)
}

/// Rebuild the model described by the sidecar and load the stored weights;
/// names, shapes and the recorded parameter count must all agree.
pub fn load_checkpoint(path: &Path) -> Result<(Model<f32>, CheckpointMeta)> {
    let meta: CheckpointMeta = read_json(&sidecar_path(path))?;
    let stored = decode_checkpoint(&std::fs::read(path)?, path)?;
    let mut model = build_variant::<f32>(&meta.model, 0)?;
    model
        .params_mut()
        .load_from(&stored)
        .map_err(|e| Error::format(path, format!("weights do not match descriptor: {e}")))?;
    if model.count_params().total != meta.params {
        return Err(Error::format(
            path,
            format!(
                "descriptor gives {} parameters, sidecar records {}",
                model.count_params().total,
                meta.params
            ),
        ));
    }
    Ok((model, meta))
}
