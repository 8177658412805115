//! Parameter and FLOP counts of the reference configuration, its ablation
//! variants and the parameter-matched MLP baseline.

use anyhow::Result;
use cmixer::model::{
    build_variant, FlopConvention, MixerHyperparams, ModelDescriptor, ModelVariant,
};

fn main() -> Result<()> {
    let hyper = MixerHyperparams::reference(5, 5);
    let mut variants = vec![ModelVariant::CMIXER];
    variants.extend(
        ModelVariant::ablation_grid()
            .into_iter()
            .filter(|v| *v != ModelVariant::CMIXER),
    );
    variants.push(ModelVariant::PureMlpBaseline);

    println!(
        "{:<28} {:>9} {:>12} {:>12}",
        "variant", "params", "flops", "flops(2/mac)"
    );
    for variant in variants {
        let model = build_variant::<f32>(
            &ModelDescriptor {
                variant,
                hyper: hyper.clone(),
            },
            0,
        )?;
        println!(
            "{:<28} {:>9} {:>12} {:>12}",
            variant.to_string(),
            model.count_params().total,
            model.count_flops(FlopConvention::PROFILER).total,
            model.count_flops(FlopConvention::TWO_PER_MAC).total,
        );
    }
    println!("flops: {}", FlopConvention::PROFILER.describe());
    println!("flops(2/mac): {}", FlopConvention::TWO_PER_MAC.describe());
    Ok(())
}
