//! Compare backpropagated gradients of a tiny CMixer with central finite
//! differences, in double precision.

use anyhow::{anyhow, Result};
use cmixer::autodiff::{Activation, Tape, Tensor};
use cmixer::model::{build_variant, MixerHyperparams, ModelDescriptor, ModelVariant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let hyper = MixerHyperparams {
        k: 1,
        n_t: 4,
        n_c: 4,
        n_t_prime: 4,
        n_c_prime: 4,
        s_t: 4,
        s_c: 4,
        n_t0: 2,
        n_c0: 2,
        activation: Activation::Gelu,
    };
    let descriptor = ModelDescriptor {
        variant: ModelVariant::CMIXER,
        hyper,
    };
    let model = build_variant::<f64>(&descriptor, 3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut random = |shape: Vec<usize>| {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
    };
    let x = random(vec![2, 2, 2, 2])?;
    let y = random(vec![2, 4, 4, 2])?;

    let mut tape = Tape::new();
    let bound = model.params().bind(&mut tape);
    let xv = tape.leaf(x.clone(), false);
    let yv = tape.leaf(y.clone(), false);
    let pred = model.forward(&mut tape, &bound, xv)?;
    let loss = tape.mse_loss(pred, yv)?;
    let grads = tape.backward(loss)?;
    let analytic = bound.gradients(&grads, model.params());

    let loss_of = |m: &cmixer::model::Model<f64>| -> Result<f64> {
        let p = m.predict(&x)?;
        let sq: f64 = p
            .data()
            .iter()
            .zip(y.data())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        Ok(sq / 2.0)
    };
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (id, g) in model.params().ids().zip(&analytic) {
        let mut num = Vec::with_capacity(g.len());
        for k in 0..g.len() {
            let mut plus = model.clone();
            plus.params_mut().get_mut(id).data_mut()[k] += h;
            let mut minus = model.clone();
            minus.params_mut().get_mut(id).data_mut()[k] -= h;
            num.push((loss_of(&plus)? - loss_of(&minus)?) / (2.0 * h));
        }
        let scale = num.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        let err = g
            .data()
            .iter()
            .zip(&num)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / scale;
        println!(
            "{:<40} {:>4} scalars  rel err {err:.2e}",
            model.params().name(id),
            g.len()
        );
        worst = worst.max(err);
    }
    println!("worst relative error {worst:.2e}");
    if worst > 1e-4 {
        return Err(anyhow!("gradient check failed"));
    }
    Ok(())
}
