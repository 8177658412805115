//! Train on targets whose entries were permuted. Permuting rows and columns
//! separately keeps each antenna's and subcarrier's entries together;
//! permuting all entries at once scatters them.
//!
//!     cargo run --release --example shuffle_ablation -- [EPOCHS] [PERMUTATIONS]

use anyhow::Result;
use cmixer::harness::{run_shuffle_ablation, ExperimentConfig, ShuffleMode};
use cmixer::iocli::{resolve_dataset, worker_threads};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(150);
    let permutations: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);
    let mut cfg = ExperimentConfig::toy(7);
    cfg.epochs = epochs;
    cfg.schedule.period = (epochs / 4).max(1);
    cfg.schedule.warm_period = cfg.schedule.period;
    let data = resolve_dataset(&cfg)?;
    let result = run_shuffle_ablation(&cfg, &data, permutations, worker_threads())?;
    for mode in [
        ShuffleMode::Origin,
        ShuffleMode::Interlaced,
        ShuffleMode::NonInterlaced,
    ] {
        if let Some(s) = result.summary(mode) {
            println!(
                "{:<15} {:>7.2} dB +- {:.2} over {} runs",
                s.mode, s.mean_db, s.std_db, s.runs
            );
        }
    }
    Ok(())
}
