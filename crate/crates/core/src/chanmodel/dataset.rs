use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{assemble_csi, sample_scenario, CsiMatrix, ScenarioConfig};
use crate::codec::ByteCursor;
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"CMXD";
pub const DATASET_VERSION: u32 = 1;

/// JSON blob stored after the sample payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub scenario: ScenarioConfig,
    /// RMS magnitude over every stored entry (raw, unnormalised values).
    pub global_scale: f64,
    pub seed: u64,
}

/// A set of raw CSI samples stored as interleaved single-precision pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelDataset {
    n_t: usize,
    n_c: usize,
    data: Vec<f32>,
    metadata: DatasetMetadata,
}

fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn generate_one(config: &ScenarioConfig, index: usize) -> Result<Vec<f32>> {
    let geometry = config.geometry()?;
    let grid = config.grid()?;
    let paths = sample_scenario(config, &mut sample_rng(config.rng_seed, index))?;
    let h = assemble_csi(&paths, &geometry, &grid)?;
    Ok(h.entries()
        .iter()
        .flat_map(|z| [z.re as f32, z.im as f32])
        .collect())
}

/// Generate `samples` channels. Sample `i` uses its own RNG stream derived
/// from `(rng_seed, i)`, so the result does not depend on `threads`.
pub fn generate_dataset(
    config: &ScenarioConfig,
    samples: usize,
    threads: usize,
) -> Result<ChannelDataset> {
    config.validate()?;
    if samples == 0 {
        return Err(Error::Validation(
            "dataset needs at least one sample".into(),
        ));
    }
    let per_sample = config.n_t * config.n_c * 2;
    let mut data = vec![0f32; samples * per_sample];
    let threads = threads.clamp(1, samples);
    let chunk = samples.div_ceil(threads);
    std::thread::scope(|scope| -> Result<()> {
        let handles: Vec<_> = data
            .chunks_mut(chunk * per_sample)
            .enumerate()
            .map(|(c, out)| {
                scope.spawn(move || -> Result<()> {
                    for (k, dst) in out.chunks_mut(per_sample).enumerate() {
                        dst.copy_from_slice(&generate_one(config, c * chunk + k)?);
                    }
                    Ok(())
                })
            })
            .collect();
        for h in handles {
            h.join().expect("dataset worker panicked")?;
        }
        Ok(())
    })?;
    let sum_sq: f64 = data.iter().map(|&x| (x as f64) * (x as f64)).sum();
    let global_scale = (sum_sq / (samples * config.n_t * config.n_c) as f64).sqrt();
    Ok(ChannelDataset {
        n_t: config.n_t,
        n_c: config.n_c,
        data,
        metadata: DatasetMetadata {
            scenario: config.clone(),
            global_scale,
            seed: config.rng_seed,
        },
    })
}

impl ChannelDataset {
    pub fn from_raw(
        n_t: usize,
        n_c: usize,
        data: Vec<f32>,
        metadata: DatasetMetadata,
    ) -> Result<Self> {
        let per = n_t * n_c * 2;
        if per == 0 || !data.len().is_multiple_of(per) || data.is_empty() {
            return Err(Error::shape(
                "ChannelDataset",
                &[n_t, n_c, 2],
                &[data.len()],
            ));
        }
        Ok(Self {
            n_t,
            n_c,
            data,
            metadata,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len() / (self.n_t * self.n_c * 2)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn metadata(&self) -> &DatasetMetadata {
        &self.metadata
    }

    /// Raw interleaved `(re, im)` values of sample `i`, antenna-major.
    pub fn raw_sample(&self, i: usize) -> &[f32] {
        let per = self.n_t * self.n_c * 2;
        &self.data[i * per..(i + 1) * per]
    }

    pub fn sample(&self, i: usize) -> CsiMatrix {
        let entries = self
            .raw_sample(i)
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0] as f64, p[1] as f64))
            .collect();
        CsiMatrix::from_entries(self.n_t, self.n_c, entries).expect("stored samples are finite")
    }

    /// Little-endian `CMXD` encoding.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&self.metadata)?;
        let mut out = Vec::with_capacity(24 + self.data.len() * 4 + meta.len());
        out.extend_from_slice(DATASET_MAGIC);
        for v in [
            DATASET_VERSION,
            self.len() as u32,
            self.n_t as u32,
            self.n_c as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], origin: &std::path::Path) -> Result<Self> {
        let bad = |why: &str| Error::format(origin, why);
        let mut cur = ByteCursor::new(bytes);
        if cur.take(4).ok_or_else(|| bad("truncated header"))? != DATASET_MAGIC {
            return Err(bad("missing CMXD magic"));
        }
        let mut header = [0u32; 4];
        for h in header.iter_mut() {
            *h = cur.u32().ok_or_else(|| bad("truncated header"))?;
        }
        let [version, samples, n_t, n_c] = header;
        if version != DATASET_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let count = samples as usize * n_t as usize * n_c as usize * 2;
        let payload = cur
            .take(count * 4)
            .ok_or_else(|| bad("truncated payload"))?;
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let meta_len = cur.u32().ok_or_else(|| bad("missing metadata length"))? as usize;
        let meta = cur
            .take(meta_len)
            .ok_or_else(|| bad("truncated metadata"))?;
        if !cur.is_empty() {
            return Err(bad("trailing bytes after metadata"));
        }
        let metadata: DatasetMetadata = serde_json::from_slice(meta)?;
        Self::from_raw(n_t as usize, n_c as usize, data, metadata)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn small_config() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default_32x32(7);
        cfg.n_t = 4;
        cfg.n_c = 3;
        cfg
    }

    #[test]
    fn parallel_matches_serial() {
        let cfg = small_config();
        let a = generate_dataset(&cfg, 13, 1).unwrap();
        let b = generate_dataset(&cfg, 13, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bytes_round_trip_and_layout() {
        let ds = generate_dataset(&small_config(), 5, 1).unwrap();
        let bytes = ds.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"CMXD");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 5);
        let first = f32::from_le_bytes(bytes[20..24].try_into().unwrap());
        assert_eq!(first, ds.raw_sample(0)[0]);
        let back = ChannelDataset::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn corrupt_bytes_rejected() {
        let ds = generate_dataset(&small_config(), 2, 1).unwrap();
        let bytes = ds.to_bytes().unwrap();
        assert!(ChannelDataset::from_bytes(&bytes[..30], Path::new("x")).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(ChannelDataset::from_bytes(&wrong, Path::new("x")).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(ChannelDataset::from_bytes(&extra, Path::new("x")).is_err());
    }
}
