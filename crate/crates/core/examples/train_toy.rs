//! Train the mixer and the parameter-matched MLP baseline on the toy benchmark
//! (2000 train / 500 test channels, 32x32, 5x5 known) and compare test NMSE.
//!
//!     cargo run --release --example train_toy -- [EPOCHS]

use anyhow::Result;
use cmixer::harness::{train, ExperimentConfig};
use cmixer::iocli::resolve_dataset;
use cmixer::model::ModelVariant;

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

    for variant in [ModelVariant::CMIXER, ModelVariant::PureMlpBaseline] {
        cfg.model.variant = variant;
        let out = train(&cfg, &data)?;
        let r = &out.report;
        let test = r.test.expect("toy split has a test set");
        println!(
            "{variant:<10} params {:>7}  loss {:.3e} -> {:.3e}  test nmse {:>7.2} dB  rho {:.4}  ({:.0} s)",
            r.params,
            r.initial_loss().unwrap_or(f64::NAN),
            r.final_loss().unwrap_or(f64::NAN),
            test.nmse_db,
            test.rho,
            r.wallclock_s
        );
    }
    Ok(())
}
