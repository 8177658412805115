use super::*;
use crate::autodiff::{Activation, LrSchedule, Tape};
use crate::chanmodel::{generate_dataset, ChannelDataset, ScenarioConfig, SubsetSpec};
use crate::error::Error;
use crate::model::{build_variant, MixerHyperparams, ModelDescriptor, ModelVariant};

fn tiny_dataset(samples: usize) -> ChannelDataset {
    let scenario = ScenarioConfig {
        n_t: 8,
        n_c: 6,
        ..toy_scenario(3)
    };
    generate_dataset(&scenario, samples, 1).unwrap()
}

fn tiny_config() -> ExperimentConfig {
    let scenario = ScenarioConfig {
        n_t: 8,
        n_c: 6,
        ..toy_scenario(3)
    };
    ExperimentConfig {
        dataset: DatasetSource::Generate {
            scenario,
            samples: 40,
        },
        model: ModelDescriptor {
            variant: ModelVariant::CMIXER,
            hyper: MixerHyperparams {
                k: 1,
                n_t: 8,
                n_c: 6,
                n_t_prime: 4,
                n_c_prime: 4,
                s_t: 8,
                s_c: 8,
                n_t0: 2,
                n_c0: 2,
                activation: Activation::Gelu,
            },
        },
        batch_size: 8,
        epochs: 3,
        schedule: LrSchedule::with_period(1e-2, 2),
        ..ExperimentConfig::toy(5)
    }
}

fn strip_clock(mut r: MetricsReport) -> MetricsReport {
    r.wallclock_s = 0.0;
    r
}

#[test]
fn frozen_optimizer_keeps_parameters() {
    let data = tiny_dataset(40);
    let mut cfg = tiny_config();
    cfg.epochs = 2;
    cfg.schedule.base_lr = 0.0;
    let out = train(&cfg, &data).unwrap();
    let init = build_variant::<f32>(&cfg.model, cfg.seed).unwrap();
    assert_eq!(out.model.params().tensors(), init.params().tensors());
    let (a, b) = (
        out.report.epochs[0].train_loss,
        out.report.epochs[1].train_loss,
    );
    assert!((a - b).abs() <= 1e-5 * a, "{a} vs {b}");
}

#[test]
fn training_is_deterministic_and_reduces_loss() {
    let data = tiny_dataset(40);
    let mut cfg = tiny_config();
    cfg.epochs = 20;
    let a = train(&cfg, &data).unwrap();
    let b = train(&cfg, &data).unwrap();
    assert_eq!(strip_clock(a.report.clone()), strip_clock(b.report));
    assert_eq!(a.model.params().tensors(), b.model.params().tensors());
    assert!(a.report.final_loss().unwrap() < a.report.initial_loss().unwrap());
    let t = a.report.test.unwrap();
    assert!((t.nmse_db - 10.0 * t.nmse_linear.log10()).abs() < 1e-9);
    assert!((0.0..=1.0 + 1e-9).contains(&t.rho));
    assert_eq!(a.report.epochs.len(), 20);
    assert_eq!(a.report.fingerprint.len(), 64);
}

#[test]
fn identity_shuffles_reproduce_origin() {
    let data = tiny_dataset(40);
    let cfg = tiny_config();
    let origin = train_with_plan(&cfg, &data, &ShufflePlan::Origin)
        .unwrap()
        .report;
    let plans = [
        ShufflePlan::Interlaced {
            p_t: Permutation::identity(8),
            p_c: Permutation::identity(6),
        },
        ShufflePlan::NonInterlaced {
            p: Permutation::identity(48),
        },
    ];
    for plan in plans {
        let r = train_with_plan(&cfg, &data, &plan).unwrap().report;
        assert_eq!(r.epochs, origin.epochs);
        assert_eq!(r.test, origin.test);
    }
}

#[test]
fn batch_policy_enforced() {
    let data = tiny_dataset(40);
    let mut cfg = tiny_config();
    cfg.batch_size = 7;
    assert!(matches!(train(&cfg, &data), Err(Error::Config(_))));
    cfg.allow_short_batch = true;
    cfg.epochs = 1;
    assert!(train(&cfg, &data).is_ok());
}

#[test]
fn diverging_run_reports_position() {
    let data = tiny_dataset(40);
    let mut cfg = tiny_config();
    cfg.schedule.base_lr = 1e30;
    cfg.epochs = 50;
    match train(&cfg, &data) {
        Err(Error::NonFinite { epoch, batch, lr }) => {
            assert!(epoch >= 1 && batch >= 1);
            assert_eq!(lr, 1e30);
        }
        other => panic!("expected a non-finite error, got {other:?}"),
    }
}

#[test]
fn size_mismatch_is_config_error() {
    let data = tiny_dataset(40);
    let mut cfg = tiny_config();
    cfg.model.hyper.n_t = 16;
    cfg.dataset = DatasetSource::File { path: "x".into() };
    assert!(matches!(train(&cfg, &data), Err(Error::Config(_))));
}

#[test]
fn test_loss_matches_raw_squared_error() {
    // Loss on normalized data times scale^2 equals the mean raw squared error,
    // i.e. the NMSE numerator before division by ||H||^2.
    let data = tiny_dataset(20);
    let cfg = tiny_config();
    let hp = &cfg.model.hyper;
    let model = build_variant::<f64>(&cfg.model, 1).unwrap();
    let subset = SubsetSpec::uniform(hp.n_t, hp.n_t0, hp.n_c, hp.n_c0).unwrap();
    let idx: Vec<usize> = (0..10).collect();
    let scale = rms_scale(&data, &idx).unwrap();
    let set =
        PreparedSet::<f64>::new(&data, &idx, &subset, &ShufflePlan::Origin, false, scale).unwrap();
    let (x, y) = set.batch(&idx);
    let mut tape = Tape::inference();
    let bound = model.params().bind(&mut tape);
    let xv = tape.leaf(x, false);
    let yv = tape.leaf(y, false);
    let pred = model.forward(&mut tape, &bound, xv).unwrap();
    let loss = tape.mse_loss(pred, yv).unwrap();
    let loss = tape.value(loss).data()[0];
    let pred = tape.value(pred).data().to_vec();
    let per = 2 * hp.n_t * hp.n_c;
    let mut raw = 0.0;
    for (k, &i) in idx.iter().enumerate() {
        let p = model_layout_to_csi(&pred[k * per..(k + 1) * per], hp.n_t, hp.n_c).unwrap();
        let h = data.sample(i);
        raw += h
            .entries()
            .iter()
            .zip(p.entries())
            .map(|(a, b)| (a - b * scale).norm_sqr())
            .sum::<f64>();
    }
    raw /= idx.len() as f64;
    assert!(
        (loss * scale * scale - raw).abs() < 1e-6 * raw,
        "{} vs {raw}",
        loss * scale * scale
    );
}

#[test]
fn ablations_run_on_tiny_budget() {
    let data = tiny_dataset(40);
    let mut cfg = tiny_config();
    cfg.epochs = 1;
    let grid = run_cmlp_ablation(&cfg, &data, 2, &[]).unwrap();
    assert_eq!(grid.cells.len(), 4);
    for v in ModelVariant::ablation_grid() {
        assert!(grid.nmse_db(v).is_some());
    }
    let csv = rows_to_csv(&grid.rows().unwrap()).unwrap();
    assert!(csv.starts_with("label,nmse_db,rho,params\n"));
    assert_eq!(csv.lines().count(), 5);

    let reuse = grid.cells[3].clone();
    let again = run_cmlp_ablation(&cfg, &data, 1, std::slice::from_ref(&reuse)).unwrap();
    assert_eq!(again.cells[3].1, reuse.1);

    let sh = run_shuffle_ablation(&cfg, &data, 2, 1).unwrap();
    assert_eq!(sh.runs.len(), 5);
    assert_eq!(sh.summary(ShuffleMode::Origin).unwrap().std_db, 0.0);
    assert_eq!(sh.summary(ShuffleMode::Interlaced).unwrap().runs, 2);
    assert!(sh
        .summary(ShuffleMode::NonInterlaced)
        .unwrap()
        .std_db
        .is_finite());
}

#[test]
fn parallel_jobs_keep_order() {
    let out = run_jobs((0..9).collect(), 3, |i: usize| i * i);
    assert_eq!(out, (0..9).map(|i| i * i).collect::<Vec<_>>());
}

#[test]
fn config_json_round_trip() {
    for cfg in [
        ExperimentConfig::toy(3),
        ExperimentConfig::table1(9),
        tiny_config(),
    ] {
        let s = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&s).unwrap(), cfg);
    }
}
