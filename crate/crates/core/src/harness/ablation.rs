use serde::{Deserialize, Serialize};

use super::{
    train_with_plan, ExperimentConfig, MetricsReport, ShuffleMode, ShufflePlan, ShuffleSpec,
};
use crate::chanmodel::ChannelDataset;
use crate::error::{Error, Result};
use crate::model::ModelVariant;

/// One line of an ablation table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub nmse_db: f64,
    pub rho: f64,
    pub params: usize,
}

impl AblationRow {
    fn from_report(label: impl Into<String>, report: &MetricsReport) -> Result<Self> {
        let test = report
            .test
            .ok_or_else(|| Error::Config("ablation runs need a non-empty test split".into()))?;
        Ok(Self {
            label: label.into(),
            nmse_db: test.nmse_db,
            rho: test.rho,
            params: report.params,
        })
    }
}

/// Render rows as CSV with a header line.
pub fn rows_to_csv(rows: &[AblationRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::Validation(format!("csv: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Validation(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Run independent jobs on up to `threads` worker threads, results in job order.
pub fn run_jobs<J, F, R>(jobs: Vec<J>, threads: usize, f: F) -> Vec<R>
where
    J: Send,
    R: Send,
    F: Fn(J) -> R + Sync,
{
    let threads = threads.max(1);
    if threads == 1 || jobs.len() <= 1 {
        return jobs.into_iter().map(f).collect();
    }
    let n = jobs.len();
    let queue = std::sync::Mutex::new(jobs.into_iter().enumerate().collect::<Vec<_>>());
    let results = std::sync::Mutex::new((0..n).map(|_| None).collect::<Vec<Option<R>>>());
    std::thread::scope(|s| {
        for _ in 0..threads.min(n) {
            s.spawn(|| loop {
                let job = queue.lock().expect("job queue poisoned").pop();
                let Some((i, job)) = job else { break };
                let r = f(job);
                results.lock().expect("results poisoned")[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("results poisoned")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

/// The 2x2 grid of (space, frequency) block kinds.
#[derive(Clone, Debug)]
pub struct CmlpAblation {
    pub cells: Vec<(ModelVariant, MetricsReport)>,
}

impl CmlpAblation {
    pub fn nmse_db(&self, variant: ModelVariant) -> Option<f64> {
        self.cells
            .iter()
            .find(|(v, _)| *v == variant)
            .and_then(|(_, r)| r.test.map(|t| t.nmse_db))
    }

    pub fn rows(&self) -> Result<Vec<AblationRow>> {
        self.cells
            .iter()
            .map(|(v, r)| AblationRow::from_report(v.to_string(), r))
            .collect()
    }
}

/// Train the four ablation variants under the budget of `base`. Cells whose
/// variant appears in `done` reuse that report.
pub fn run_cmlp_ablation(
    base: &ExperimentConfig,
    dataset: &ChannelDataset,
    threads: usize,
    done: &[(ModelVariant, MetricsReport)],
) -> Result<CmlpAblation> {
    base.validate()?;
    let jobs: Vec<ModelVariant> = ModelVariant::ablation_grid()
        .into_iter()
        .filter(|v| !done.iter().any(|(d, _)| d == v))
        .collect();
    let results = run_jobs(jobs.clone(), threads, |variant| {
        let mut cfg = base.clone();
        cfg.model.variant = variant;
        cfg.shuffle = ShuffleSpec::default();
        train_with_plan(&cfg, dataset, &ShufflePlan::Origin).map(|o| o.report)
    });
    let mut cells = done.to_vec();
    for (variant, r) in jobs.into_iter().zip(results) {
        cells.push((variant, r?));
    }
    let order = ModelVariant::ablation_grid();
    cells.sort_by_key(|(v, _)| order.iter().position(|o| o == v));
    Ok(CmlpAblation { cells })
}

/// Mean and sample standard deviation of test NMSE over the runs of one mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: ShuffleMode,
    pub runs: usize,
    pub mean_db: f64,
    pub std_db: f64,
}

#[derive(Clone, Debug)]
pub struct ShuffleAblation {
    pub runs: Vec<(ShuffleMode, MetricsReport)>,
}

impl ShuffleAblation {
    pub fn summary(&self, mode: ShuffleMode) -> Option<ModeSummary> {
        let vals: Vec<f64> = self
            .runs
            .iter()
            .filter(|(m, _)| *m == mode)
            .filter_map(|(_, r)| r.test.map(|t| t.nmse_db))
            .collect();
        if vals.is_empty() {
            return None;
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let std = if vals.len() > 1 {
            (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(ModeSummary {
            mode,
            runs: vals.len(),
            mean_db: mean,
            std_db: std,
        })
    }

    pub fn rows(&self) -> Result<Vec<AblationRow>> {
        self.runs
            .iter()
            .map(|(m, r)| AblationRow::from_report(format!("{m}#{}", r.config.shuffle.seed), r))
            .collect()
    }
}

/// Train the mixer on targets under each shuffle mode: one unshuffled run and
/// `permutations` seeded permutations for each of the two shuffle modes.
/// Permutation `k` uses shuffle seed `base.shuffle.seed + k`.
pub fn run_shuffle_ablation(
    base: &ExperimentConfig,
    dataset: &ChannelDataset,
    permutations: usize,
    threads: usize,
) -> Result<ShuffleAblation> {
    base.validate()?;
    if permutations == 0 {
        return Err(Error::Config(
            "shuffle ablation needs at least one permutation".into(),
        ));
    }
    let mut jobs = vec![ShuffleSpec {
        mode: ShuffleMode::Origin,
        ..base.shuffle
    }];
    for mode in [ShuffleMode::Interlaced, ShuffleMode::NonInterlaced] {
        for k in 0..permutations as u64 {
            jobs.push(ShuffleSpec {
                mode,
                seed: base.shuffle.seed.wrapping_add(k),
                shuffle_inputs: base.shuffle.shuffle_inputs,
            });
        }
    }
    let results = run_jobs(jobs.clone(), threads, |spec| {
        let mut cfg = base.clone();
        cfg.shuffle = spec;
        let plan = ShufflePlan::from_spec(&spec, dataset.n_t(), dataset.n_c());
        train_with_plan(&cfg, dataset, &plan).map(|o| o.report)
    });
    let runs = jobs
        .into_iter()
        .zip(results)
        .map(|(spec, r)| r.map(|r| (spec.mode, r)))
        .collect::<Result<_>>()?;
    Ok(ShuffleAblation { runs })
}
