//! Central finite-difference gradient checks shared by the gradient tests
//! and the acceptance run.
#![allow(dead_code)]

use cmixer::autodiff::{Activation, Tape, Tensor, Var, LAYER_NORM_EPS};
use cmixer::model::{build_variant, MixerHyperparams, Model, ModelDescriptor, ModelVariant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-5;
pub const PRIMITIVE_TOL: f64 = 1e-6;
pub const MODEL_TOL: f64 = 1e-4;

pub type Build = dyn Fn(&mut Tape<f64>, &[Var]) -> Var;

pub fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>();
    Tensor::new(shape.to_vec(), data).unwrap()
}

pub fn eval(inputs: &[Tensor<f64>], build: &Build) -> f64 {
    let mut tape = Tape::inference();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), false)).collect();
    let out = build(&mut tape, &vars);
    tape.value(out).data()[0]
}

/// Max over inputs of `max|analytic - numeric| / max|numeric|`.
pub fn check(inputs: Vec<Tensor<f64>>, build: &Build) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let loss = build(&mut tape, &vars);
    let grads = tape.backward(loss).unwrap();
    let mut worst: f64 = 0.0;
    for (k, v) in vars.iter().enumerate() {
        let analytic = grads.get_or_zeros(*v, inputs[k].shape());
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 1e-12;
        for i in 0..inputs[k].len() {
            let mut plus = inputs.clone();
            plus[k].data_mut()[i] += H;
            let mut minus = inputs.clone();
            minus[k].data_mut()[i] -= H;
            let numeric = (eval(&plus, build) - eval(&minus, build)) / (2.0 * H);
            diff = diff.max((analytic.data()[i] - numeric).abs());
            scale = scale.max(numeric.abs());
        }
        worst = worst.max(diff / scale);
    }
    worst
}

/// Reduce an arbitrary output to a scalar with a fixed random target.
pub fn to_loss(tape: &mut Tape<f64>, y: Var, seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = random(tape.shape(y), &mut rng);
    let t = tape.leaf(t, false);
    tape.mse_loss(y, t).unwrap()
}

/// Relative error of every tape primitive, by name.
pub fn primitive_errors() -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let inputs = vec![
        random(&[3, 2, 5], &mut rng),
        random(&[4, 5], &mut rng),
        random(&[4], &mut rng),
    ];
    out.push((
        "affine",
        check(inputs, &|t, v| {
            let y = t.affine(v[0], v[1], v[2]).unwrap();
            to_loss(t, y, 9)
        }),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let inputs = vec![
        random(&[4, 6], &mut rng),
        random(&[6], &mut rng),
        random(&[6], &mut rng),
    ];
    out.push((
        "layer_norm",
        check(inputs, &|t, v| {
            let y = t.layer_norm(v[0], v[1], v[2], LAYER_NORM_EPS).unwrap();
            to_loss(t, y, 9)
        }),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random(&[5, 7], &mut rng)
        .data()
        .iter()
        .map(|v| v * 3.0)
        .collect::<Vec<_>>();
    let x = Tensor::new(vec![5, 7], x).unwrap();
    out.push((
        "gelu",
        check(vec![x.clone()], &|t, v| {
            let y = t.gelu(v[0]);
            to_loss(t, y, 9)
        }),
    ));
    // ReLU away from its kink.
    let x = Tensor::new(
        vec![5, 7],
        x.data()
            .iter()
            .map(|v| if v.abs() < 0.1 { v + 0.3 } else { *v })
            .collect(),
    )
    .unwrap();
    out.push((
        "relu",
        check(vec![x], &|t, v| {
            let y = t.relu(v[0]);
            to_loss(t, y, 9)
        }),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = random(&[2, 3, 4, 2], &mut rng);
    let b = random(&[2, 3, 4, 2], &mut rng);
    let cases: Vec<(&str, Box<Build>)> = vec![
        (
            "add",
            Box::new(|t: &mut Tape<f64>, v: &[Var]| {
                let y = t.add(v[0], v[1]).unwrap();
                to_loss(t, y, 9)
            }),
        ),
        (
            "reshape",
            Box::new(|t: &mut Tape<f64>, v: &[Var]| {
                let y = t.reshape(v[0], &[6, 8]).unwrap();
                to_loss(t, y, 9)
            }),
        ),
        (
            "permute",
            Box::new(|t: &mut Tape<f64>, v: &[Var]| {
                let y = t.permute(v[0], &[2, 0, 3, 1]).unwrap();
                to_loss(t, y, 9)
            }),
        ),
        (
            "swap middle",
            Box::new(|t: &mut Tape<f64>, v: &[Var]| {
                let y = t.permute(v[0], &[0, 2, 1, 3]).unwrap();
                to_loss(t, y, 9)
            }),
        ),
        (
            "transpose",
            Box::new(|t: &mut Tape<f64>, v: &[Var]| {
                let y = t.transpose_last2(v[0]).unwrap();
                to_loss(t, y, 9)
            }),
        ),
        (
            "select and stack",
            Box::new(|t: &mut Tape<f64>, v: &[Var]| {
                let re = t.select_last(v[0], 0).unwrap();
                let im = t.select_last(v[1], 1).unwrap();
                let y = t.stack_last(im, re).unwrap();
                to_loss(t, y, 9)
            }),
        ),
        (
            "sum",
            Box::new(|t: &mut Tape<f64>, v: &[Var]| {
                let y = t.add(v[0], v[1]).unwrap();
                let g = t.gelu(y);
                t.sum(g)
            }),
        ),
        (
            "mse both sides",
            Box::new(|t: &mut Tape<f64>, v: &[Var]| t.mse_loss(v[0], v[1]).unwrap()),
        ),
    ];
    for (name, build) in cases {
        out.push((name, check(vec![a.clone(), b.clone()], build.as_ref())));
    }
    out
}

pub fn model_gradient_error(variant: ModelVariant, activation: Activation) -> f64 {
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
        activation,
    };
    let model = build_variant::<f64>(&ModelDescriptor { variant, hyper }, 17).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let x = random(&[2, 2, 2, 2], &mut rng);
    let target = random(&[2, 4, 4, 2], &mut rng);
    let loss_of = |m: &Model<f64>, x: &Tensor<f64>| -> f64 {
        let y = m.predict(x).unwrap();
        y.data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (p - t).powi(2))
            .sum::<f64>()
            / 2.0
    };

    let mut tape = Tape::new();
    let bound = model.params().bind(&mut tape);
    let xv = tape.leaf(x.clone(), true);
    let tv = tape.leaf(target.clone(), false);
    let y = model.forward(&mut tape, &bound, xv).unwrap();
    let loss = tape.mse_loss(y, tv).unwrap();
    let grads = tape.backward(loss).unwrap();
    let mut analytic = bound.gradients(&grads, model.params());
    analytic.push(grads.get(xv).unwrap().clone());

    let mut numeric = Vec::new();
    for k in 0..model.params().len() {
        let mut g = Vec::new();
        for i in 0..model.params().tensors()[k].len() {
            let mut plus = model.clone();
            plus.params_mut().tensors_mut()[k].data_mut()[i] += H;
            let mut minus = model.clone();
            minus.params_mut().tensors_mut()[k].data_mut()[i] -= H;
            g.push((loss_of(&plus, &x) - loss_of(&minus, &x)) / (2.0 * H));
        }
        numeric.push(g);
    }
    let mut g = Vec::new();
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += H;
        let mut minus = x.clone();
        minus.data_mut()[i] -= H;
        g.push((loss_of(&model, &plus) - loss_of(&model, &minus)) / (2.0 * H));
    }
    numeric.push(g);

    let diff = analytic
        .iter()
        .zip(&numeric)
        .flat_map(|(a, n)| a.data().iter().zip(n).map(|(a, n)| (a - n).abs()))
        .fold(0.0, f64::max);
    let scale = numeric
        .iter()
        .flatten()
        .fold(1e-12, |m: f64, v| m.max(v.abs()));
    diff / scale
}
