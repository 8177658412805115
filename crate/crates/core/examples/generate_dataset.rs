//! Generate the synthetic toy dataset, write it as a CMXD file and read it back.
//!
//!     cargo run --release --example generate_dataset -- [OUT] [SAMPLES]

use anyhow::{ensure, Result};
use cmixer::chanmodel::generate_dataset;
use cmixer::harness::toy_scenario;
use cmixer::iocli::{load_dataset, save_dataset, worker_threads};

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "toy.cmxd".into());
    let samples: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2500);

    let scenario = toy_scenario(7);
    let data = generate_dataset(&scenario, samples, worker_threads())?;
    save_dataset(out.as_ref(), &data)?;
    let back = load_dataset(out.as_ref())?;
    ensure!(back == data, "dataset did not survive the round trip");

    let h = data.sample(0);
    println!(
        "{} samples of {}x{} CSI -> {out}",
        data.len(),
        data.n_t(),
        data.n_c()
    );
    println!("rms magnitude {:.4e}", data.metadata().global_scale);
    println!(
        "sample 0: |H[0,0]| = {:.4e}, ||H||^2 = {:.4e}",
        h.get(0, 0).norm(),
        h.norm_sqr()
    );
    Ok(())
}
