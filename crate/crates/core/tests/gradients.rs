//! Central finite-difference checks of every tape primitive and of whole
//! tiny models, in double precision.

mod common;

use cmixer::autodiff::{Activation, Tape, Tensor, LAYER_NORM_EPS};
use cmixer::model::{MixingKind, ModelVariant};
use common::{model_gradient_error, primitive_errors, random, MODEL_TOL, PRIMITIVE_TOL};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn every_primitive_matches_finite_differences() {
    for (name, err) in primitive_errors() {
        assert!(err < PRIMITIVE_TOL, "{name}: {err}");
    }
}

#[test]
fn tiny_cmixer_end_to_end() {
    let err = model_gradient_error(ModelVariant::CMIXER, Activation::Gelu);
    assert!(err < MODEL_TOL, "{err}");
}

#[test]
fn tiny_real_parallel_and_mixed_variants() {
    for variant in [
        ModelVariant::REAL_PARALLEL_MIXER,
        ModelVariant::Mixer {
            space: MixingKind::Cmlp,
            frequency: MixingKind::RealParallel,
        },
    ] {
        let err = model_gradient_error(variant, Activation::Gelu);
        assert!(err < MODEL_TOL, "{variant}: {err}");
    }
}

#[test]
fn tiny_baseline_end_to_end() {
    let err = model_gradient_error(ModelVariant::PureMlpBaseline, Activation::Gelu);
    assert!(err < MODEL_TOL, "{err}");
}

#[test]
fn fan_out_accumulates() {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Tensor::from_f64(&[3], &[1.0, -2.0, 0.5]).unwrap(), true);
    let y = tape.add(x, x).unwrap();
    let z = tape.add(y, x).unwrap();
    let s = tape.sum(z);
    let g = tape.backward(s).unwrap();
    assert_eq!(g.get(x).unwrap().data(), &[3.0, 3.0, 3.0]);
}

#[test]
fn mse_backward_formula() {
    let mut tape = Tape::<f64>::new();
    let p = tape.leaf(
        Tensor::from_f64(&[2, 2], &[1.0, 2.0, 3.0, 4.0]).unwrap(),
        true,
    );
    let t = tape.leaf(
        Tensor::from_f64(&[2, 2], &[0.0, 2.0, 5.0, 3.0]).unwrap(),
        false,
    );
    let l = tape.mse_loss(p, t).unwrap();
    // (1 + 0 + 4 + 1) / 2
    assert_eq!(tape.value(l).data(), &[3.0]);
    let g = tape.backward(l).unwrap();
    assert_eq!(g.get(p).unwrap().data(), &[1.0, 0.0, -2.0, 1.0]);
    assert!(g.get(t).is_none());
}

#[test]
fn backward_leaves_tape_untouched() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(random(&[3, 4], &mut rng), true);
    let g = tape.leaf(random(&[4], &mut rng), true);
    let b = tape.leaf(random(&[4], &mut rng), true);
    let y = tape.layer_norm(x, g, b, LAYER_NORM_EPS).unwrap();
    let y = tape.gelu(y);
    let s = tape.sum(y);
    let before: Vec<f64> = tape.value(y).data().to_vec();
    let len = tape.len();
    let g1 = tape.backward(s).unwrap();
    let g2 = tape.backward(s).unwrap();
    assert_eq!(tape.value(y).data(), &before[..]);
    assert_eq!(tape.len(), len);
    assert_eq!(g1.get(x).unwrap(), g2.get(x).unwrap());
}

#[test]
fn backward_needs_scalar_on_recording_tape() {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Tensor::zeros(&[2]), true);
    assert!(tape.backward(x).is_err());
    let mut inf = Tape::<f64>::inference();
    let x = inf.leaf(Tensor::scalar(1.0), true);
    let s = inf.sum(x);
    assert!(inf.backward(s).is_err());
}

#[test]
fn layer_norm_rejects_single_element_slices() {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Tensor::zeros(&[3, 1]), true);
    let g = tape.leaf(Tensor::full(&[1], 1.0), true);
    let b = tape.leaf(Tensor::zeros(&[1]), true);
    assert!(tape.layer_norm(x, g, b, LAYER_NORM_EPS).is_err());
}

#[test]
fn normalized_rows_pass_through_layer_norm() {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(
        Tensor::from_f64(&[1, 4], &[1.0, -1.0, 1.0, -1.0]).unwrap(),
        false,
    );
    let g = tape.leaf(Tensor::full(&[4], 1.0), false);
    let b = tape.leaf(Tensor::zeros(&[4]), false);
    let y = tape.layer_norm(x, g, b, LAYER_NORM_EPS).unwrap();
    let s = 1.0 / (1.0 + LAYER_NORM_EPS).sqrt();
    for (got, want) in tape.value(y).data().iter().zip([s, -s, s, -s]) {
        assert!((got - want).abs() < 1e-15);
    }
}
