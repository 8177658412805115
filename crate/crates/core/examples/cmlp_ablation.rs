//! Swap the complex-domain MLP for two real-valued MLPs in the space stage,
//! the frequency stage or both, and train each combination on the toy set.
//!
//!     cargo run --release --example cmlp_ablation -- [EPOCHS]

use anyhow::Result;
use cmixer::harness::{rows_to_csv, run_cmlp_ablation, ExperimentConfig};
use cmixer::iocli::{resolve_dataset, worker_threads};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn main() -> Result<()> {
    let epochs: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(300);
    let mut cfg = ExperimentConfig::toy(7);
    cfg.epochs = epochs;
    cfg.schedule.period = (epochs / 4).max(1);
    cfg.schedule.warm_period = cfg.schedule.period;
    let data = resolve_dataset(&cfg)?;
    let grid = run_cmlp_ablation(&cfg, &data, worker_threads(), &[])?;
    print!("{}", rows_to_csv(&grid.rows()?)?);
    Ok(())
}
