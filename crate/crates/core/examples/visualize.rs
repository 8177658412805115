//! Render a few channel magnitudes as PGM images, along with their interlaced
//! and non-interlaced shuffles.
//!
//!     cargo run --release --example visualize -- [OUT_DIR]

use std::path::PathBuf;

use anyhow::Result;
use cmixer::chanmodel::generate_dataset;
use cmixer::harness::{interlaced_shuffle, non_interlaced_shuffle, toy_scenario, Permutation};
use cmixer::iocli::export_grayscale;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "viz".into()));
    let data = generate_dataset(&toy_scenario(7), 4, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let p_t = Permutation::random(data.n_t(), &mut rng);
    let p_c = Permutation::random(data.n_c(), &mut rng);
    let p = Permutation::random(data.n_t() * data.n_c(), &mut rng);
    for i in 0..data.len() {
        let h = data.sample(i);
        let images = [
            ("origin", h.clone()),
            ("interlaced", interlaced_shuffle(&h, &p_t, &p_c)?),
            ("non_interlaced", non_interlaced_shuffle(&h, &p)?),
        ];
        for (name, m) in images {
            let path = dir.join(format!("sample{i}_{name}.pgm"));
            let img = export_grayscale(&m, &path, false)?;
            println!("{} ({}x{})", path.display(), img.height, img.width);
        }
    }
    Ok(())
}
