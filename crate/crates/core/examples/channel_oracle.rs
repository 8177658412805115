//! Build CSI matrices two ways, by stacking per-subcarrier channel vectors
//! and by evaluating the shared-feature function q_h on (antenna offset,
//! frequency offset) pairs, and report how far apart they are.

use anyhow::Result;
use cmixer::chanmodel::{assemble_csi, q_h_grid, sample_scenario, ScenarioConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let cfg = ScenarioConfig::default_32x32(11);
    let (geo, grid) = (cfg.geometry()?, cfg.grid()?);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let paths = sample_scenario(&cfg, &mut rng)?;
        let h = assemble_csi(&paths, &geo, &grid)?;
        let q = q_h_grid(&paths, &geo, &grid)?;
        let diff = h
            .entries()
            .iter()
            .zip(q.entries())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if i < 3 {
            println!(
                "scenario {i}: {} paths, max |difference| {diff:.2e}",
                paths.len()
            );
        }
        worst = worst.max(diff);
    }
    println!("100 scenarios, worst entry difference {worst:.2e}");
    Ok(())
}
