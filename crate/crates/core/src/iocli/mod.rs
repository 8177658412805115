//! Command-line front end. This is the only module that touches the file
//! system: datasets (`CMXD`), checkpoints (`CMXW` plus a JSON sidecar),
//! JSON configs and reports, CSV ablation tables and PGM images.

mod files;
mod viz;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::autodiff::Tensor;
use crate::chanmodel::{extract_known, generate_dataset, ScenarioConfig, SubsetSpec};
use crate::error::{Error, Result};
use crate::harness::{
    evaluate, rows_to_csv, run_cmlp_ablation, run_shuffle_ablation, split_dataset, toy_scenario,
    train, DatasetSource, ExperimentConfig, Precision, PreparedSet, ShuffleMode, ShufflePlan,
};
use crate::model::{FlopConvention, ModelVariant};

pub use files::{
    load_checkpoint, load_dataset, read_json, resolve_dataset, save_checkpoint, save_dataset,
    sidecar_path, worker_threads, write_atomic, write_json, CheckpointMeta,
};
pub use viz::{
    csi_to_grayscale, decode_pgm, encode_pgm, export_grayscale, magnitude_range, read_pgm,
    GrayscaleImage,
};

const DEFAULT_SEED: u64 = 7;
const DEFAULT_SAMPLES: usize = 2500;

#[derive(Parser, Debug)]
#[command(
    name = "cmixer",
    version,
    about = "Channel mapping with a complex-domain MLP-Mixer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the commands that run experiments.
#[derive(Args, Debug, Clone, Default)]
struct RunFlags {
    /// Experiment config (JSON); defaults to the synthetic toy benchmark.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of samples when the config generates its dataset.
    #[arg(long)]
    samples: Option<usize>,
    /// Known sub-grid as ANTENNASxSUBCARRIERS, e.g. 5x5.
    #[arg(long, value_parser = parse_known)]
    known: Option<(usize, usize)>,
    /// cmixer, real-parallel, space-cmlp, freq-cmlp or mlp.
    #[arg(long)]
    variant: Option<ModelVariant>,
    /// f32 or f64.
    #[arg(long)]
    precision: Option<Precision>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset file.
    Generate {
        /// Scenario config (JSON); defaults to the toy scenario.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<usize>,
        /// Output file.
        #[arg(long, default_value = "dataset.cmxd")]
        out: PathBuf,
    },
    /// Train one model; writes checkpoint, config and metrics to --out.
    Train(RunFlags),
    /// Evaluate a checkpoint on the test split of the experiment config.
    Eval {
        checkpoint: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Train the four space/frequency block-kind variants.
    AblateCmlp(RunFlags),
    /// Train on shuffled targets: unshuffled, interlaced and non-interlaced.
    AblateShuffle {
        #[command(flatten)]
        flags: RunFlags,
        /// Random permutations per shuffle mode.
        #[arg(long, default_value_t = 5)]
        permutations: usize,
    },
    /// Render the magnitude of one dataset sample as a PGM image.
    Viz {
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        sample: usize,
        /// Output file.
        #[arg(long, default_value = "csi.pgm")]
        out: PathBuf,
        /// Put subcarriers on rows instead of antennas.
        #[arg(long)]
        transpose: bool,
        /// Also render this checkpoint's prediction next to the original.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Scale the prediction with the original's magnitude range.
        #[arg(long)]
        shared_scale: bool,
    },
    /// Print parameter and FLOP counts of a checkpoint.
    Info { checkpoint: PathBuf },
}

fn parse_known(s: &str) -> std::result::Result<(usize, usize), String> {
    let (t, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected ANTENNASxSUBCARRIERS, got '{s}'"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("'{v}': {e}"));
    Ok((parse(t)?, parse(c)?))
}

/// Parse `argv` (program name first), run the command and return the exit
/// code: 0 on success, 2 for usage errors, 3 for invalid input or
/// configuration, 1 for failures while running.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.category());
            if e.is_validation() {
                3
            } else {
                1
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Generate {
            config,
            seed,
            samples,
            out,
        } => cmd_generate(config, seed, samples, &out),
        Command::Train(flags) => cmd_train(&flags),
        Command::Eval { checkpoint, flags } => cmd_eval(&checkpoint, &flags),
        Command::AblateCmlp(flags) => cmd_ablate_cmlp(&flags),
        Command::AblateShuffle {
            flags,
            permutations,
        } => cmd_ablate_shuffle(&flags, permutations),
        Command::Viz {
            dataset,
            sample,
            out,
            transpose,
            checkpoint,
            shared_scale,
        } => cmd_viz(
            &dataset,
            sample,
            &out,
            transpose,
            checkpoint.as_deref(),
            shared_scale,
        ),
        Command::Info { checkpoint } => cmd_info(&checkpoint),
    }
}

fn cmd_generate(
    config: Option<PathBuf>,
    seed: Option<u64>,
    samples: Option<usize>,
    out: &Path,
) -> Result<()> {
    let mut scenario: ScenarioConfig = match &config {
        Some(p) => read_json(p)?,
        None => toy_scenario(DEFAULT_SEED),
    };
    if let Some(s) = seed {
        scenario.rng_seed = s;
    }
    let samples = samples.unwrap_or(DEFAULT_SAMPLES);
    scenario.validate()?;
    if samples == 0 {
        return Err(Error::Validation("--samples must be positive".into()));
    }
    let data = generate_dataset(&scenario, samples, worker_threads())?;
    save_dataset(out, &data)?;
    println!(
        "wrote {} samples of {}x{} to {} (rms {:.4e})",
        data.len(),
        data.n_t(),
        data.n_c(),
        out.display(),
        data.metadata().global_scale
    );
    Ok(())
}

/// Base config from `--config` or the toy benchmark, with flag overrides applied.
fn experiment_config(flags: &RunFlags) -> Result<ExperimentConfig> {
    let mut cfg = match &flags.config {
        Some(p) => read_json(p)?,
        None => ExperimentConfig::toy(flags.seed.unwrap_or(DEFAULT_SEED)),
    };
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(e) = flags.epochs {
        cfg.epochs = e;
    }
    if let Some(v) = flags.variant {
        cfg.model.variant = v;
    }
    if let Some(p) = flags.precision {
        cfg.precision = p;
    }
    if let Some((t, c)) = flags.known {
        cfg.model.hyper.n_t0 = t;
        cfg.model.hyper.n_c0 = c;
    }
    if let Some(n) = flags.samples {
        match &mut cfg.dataset {
            DatasetSource::Generate { samples, .. } => *samples = n,
            DatasetSource::File { .. } => {
                return Err(Error::Config(
                    "--samples only applies to generated datasets".into(),
                ))
            }
        }
    }
    if let Some(out) = &flags.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(flags: &RunFlags) -> Result<()> {
    let cfg = experiment_config(flags)?;
    let data = resolve_dataset(&cfg)?;
    let outcome = train(&cfg, &data)?;
    let dir = &cfg.output_dir;
    write_json(&dir.join("config.json"), &cfg)?;
    save_checkpoint(
        &dir.join("checkpoint.cmxw"),
        &outcome.model,
        outcome.report.normalization_scale,
    )?;
    write_json(&dir.join("metrics.json"), &outcome.report)?;
    let r = &outcome.report;
    println!(
        "loss {:.4e} -> {:.4e}",
        r.initial_loss().unwrap_or(f64::NAN),
        r.final_loss().unwrap_or(f64::NAN)
    );
    if let Some(t) = r.test {
        println!("test nmse {:.2} dB, rho {:.4}", t.nmse_db, t.rho);
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_eval(checkpoint: &Path, flags: &RunFlags) -> Result<()> {
    let cfg = experiment_config(flags)?;
    let (model, meta) = load_checkpoint(checkpoint)?;
    let mut cfg = cfg;
    cfg.model = meta.model.clone();
    let data = resolve_dataset(&cfg)?;
    cfg.check_channel_size(data.n_t(), data.n_c())?;
    let hp = &cfg.model.hyper;
    let subset = SubsetSpec::uniform(hp.n_t, hp.n_t0, hp.n_c, hp.n_c0)?;
    let (_, test) = split_dataset(data.len(), cfg.split, cfg.seed)?;
    if test.is_empty() {
        return Err(Error::Config(
            "the configured split has no test samples".into(),
        ));
    }
    let plan = ShufflePlan::from_spec(&cfg.shuffle, data.n_t(), data.n_c());
    let set = PreparedSet::<f32>::new(
        &data,
        &test,
        &subset,
        &plan,
        cfg.shuffle.shuffle_inputs,
        meta.normalization_scale,
    )?;
    let metrics = evaluate(&model, &set)?;
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    if let Some(out) = &flags.out {
        write_json(&out.join("eval.json"), &metrics)?;
    }
    Ok(())
}

fn cmd_ablate_cmlp(flags: &RunFlags) -> Result<()> {
    let cfg = experiment_config(flags)?;
    let data = resolve_dataset(&cfg)?;
    let grid = run_cmlp_ablation(&cfg, &data, worker_threads(), &[])?;
    let dir = cfg.output_dir.join("cmlp");
    for (variant, report) in &grid.cells {
        write_json(&dir.join(format!("{variant}.json")), report)?;
    }
    let csv = rows_to_csv(&grid.rows()?)?;
    write_atomic(&cfg.output_dir.join("cmlp_ablation.csv"), csv.as_bytes())?;
    print!("{csv}");
    Ok(())
}

fn cmd_ablate_shuffle(flags: &RunFlags, permutations: usize) -> Result<()> {
    let cfg = experiment_config(flags)?;
    let data = resolve_dataset(&cfg)?;
    let result = run_shuffle_ablation(&cfg, &data, permutations, worker_threads())?;
    let dir = cfg.output_dir.join("shuffle");
    for (mode, report) in &result.runs {
        write_json(
            &dir.join(format!("{mode}-{}.json", report.config.shuffle.seed)),
            report,
        )?;
    }
    let csv = rows_to_csv(&result.rows()?)?;
    write_atomic(&cfg.output_dir.join("shuffle_ablation.csv"), csv.as_bytes())?;
    let summary: Vec<_> = [
        ShuffleMode::Origin,
        ShuffleMode::Interlaced,
        ShuffleMode::NonInterlaced,
    ]
    .iter()
    .filter_map(|m| result.summary(*m))
    .collect();
    write_json(&cfg.output_dir.join("shuffle_summary.json"), &summary)?;
    for s in &summary {
        println!(
            "{:<15} {:>8.2} +- {:.2} dB ({} runs)",
            s.mode, s.mean_db, s.std_db, s.runs
        );
    }
    Ok(())
}

fn cmd_viz(
    dataset: &Path,
    sample: usize,
    out: &Path,
    transpose: bool,
    checkpoint: Option<&Path>,
    shared_scale: bool,
) -> Result<()> {
    let data = load_dataset(dataset)?;
    if sample >= data.len() {
        return Err(Error::Validation(format!(
            "sample {sample} out of range for {} samples",
            data.len()
        )));
    }
    let model = checkpoint.map(load_checkpoint).transpose()?;
    let h = data.sample(sample);
    export_grayscale(&h, out, transpose)?;
    println!("wrote {}", out.display());
    if let Some((model, meta)) = model {
        let hp = model.hyper().clone();
        if (hp.n_t, hp.n_c) != (h.n_t(), h.n_c()) {
            return Err(Error::Config(
                "checkpoint and dataset channel sizes differ".into(),
            ));
        }
        let subset = SubsetSpec::uniform(hp.n_t, hp.n_t0, hp.n_c, hp.n_c0)?;
        let known = extract_known(&h, &subset)?;
        let mut x = Vec::with_capacity(2 * hp.n_t0 * hp.n_c0);
        for n in 0..known.n_c() {
            for m in 0..known.n_t() {
                let z = known.get(m, n) / meta.normalization_scale;
                x.extend([z.re as f32, z.im as f32]);
            }
        }
        let y = model.predict(&Tensor::new(vec![1, hp.n_c0, hp.n_t0, 2], x)?)?;
        let pred = crate::harness::model_layout_to_csi(y.data(), hp.n_t, hp.n_c)?
            .scaled(num_complex::Complex64::new(meta.normalization_scale, 0.0));
        let range = shared_scale.then(|| magnitude_range(&h));
        let img = csi_to_grayscale(&pred, transpose, range)?;
        let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("csi");
        let pred_path = out.with_file_name(format!("{stem}_pred.pgm"));
        write_atomic(&pred_path, &encode_pgm(&img)?)?;
        println!("wrote {}", pred_path.display());
    }
    Ok(())
}

fn cmd_info(checkpoint: &Path) -> Result<()> {
    let (model, _) = load_checkpoint(checkpoint)?;
    let p = model.count_params();
    let convention = FlopConvention::default();
    let f = model.count_flops(convention);
    println!("variant: {}", model.descriptor().variant);
    println!("params: {}", p.total);
    println!(
        "params by stage: embeddings {}, mixer stack {}, heads {}, baseline {}",
        p.embeddings, p.mixer_stack, p.heads, p.baseline
    );
    println!("flops: {}", f.total);
    println!(
        "flops by stage: embeddings {}, mixer stack {}, heads {}, baseline {}",
        f.embeddings, f.mixer_stack, f.heads, f.baseline
    );
    println!("flop convention: {}", convention.describe());
    Ok(())
}
