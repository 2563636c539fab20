use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use hsc_core::data;
use hsc_core::evaluation;
use hsc_core::model::Checkpoint;
use hsc_core::pipeline::{self, RunConfig};
use hsc_core::training::Scheme;
use hsc_core::Taxonomy;

/// Hierarchical species classifier: synthetic data, training, threshold search and evaluation.
#[derive(Debug, Parser)]
#[command(name = "hsc", version)]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. They override values from `--config`.
#[derive(Debug, Args)]
struct Flags {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Top-level seed; every stage seed is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Training scheme: baseline, scheme1, scheme2 or scheme3 (repeatable for `ablation`).
    #[arg(long, global = true)]
    scheme: Vec<Scheme>,
    /// Frame JSONL dataset.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Taxonomy JSON (defaults to the built-in 6-group / 31-species tree).
    #[arg(long, global = true)]
    taxonomy: Option<PathBuf>,
    /// Model checkpoint.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Confidence threshold for falling back to the group level.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Training epochs (overrides the config).
    #[arg(long, global = true)]
    epochs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic long-tail dataset (`dataset.jsonl`).
    Gen,
    /// Split a dataset by track into `train.jsonl` and `eval.jsonl`.
    Split,
    /// Train one scheme; writes `model.json` and `loss.csv`.
    Train,
    /// Search the fallback threshold on a dataset; prints it and writes `threshold.json`.
    SearchThreshold,
    /// Evaluate a model; writes `report.json`, `table.csv` and per-class CSVs.
    Eval,
    /// Per-track predictions (`predictions.jsonl`).
    Infer,
    /// Train, tune and evaluate every configured scheme on one split; writes `table1.csv`.
    Ablation,
}

#[derive(Debug, Serialize, Deserialize)]
struct ThresholdFile {
    scheme: Scheme,
    tau: f64,
}

fn resolve(flags: &Flags) -> Result<RunConfig> {
    let mut config = match &flags.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("reading config {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = flags.seed {
        config.seed = seed;
    }
    if !flags.scheme.is_empty() {
        config.schemes = flags.scheme.clone();
        config.train.scheme = flags.scheme[0];
    }
    if let Some(epochs) = flags.epochs {
        config.train.epochs = epochs;
    }
    macro_rules! override_path {
        ($($field:ident),*) => {$(
            if let Some(v) = &flags.$field {
                config.$field = Some(v.clone());
            }
        )*};
    }
    override_path!(data, taxonomy, model, out);
    if let Some(t) = flags.threshold {
        config.threshold = Some(t);
    }
    Ok(config)
}

fn out_dir(config: &RunConfig) -> Result<PathBuf> {
    let dir = config.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    match value {
        Some(p) => Ok(p),
        None => bail!("missing --{flag}"),
    }
}

fn load_data(config: &RunConfig, taxonomy: &Taxonomy) -> Result<data::Dataset> {
    let path = required(&config.data, "data")?;
    data::load_jsonl(path, taxonomy).with_context(|| format!("loading {}", path.display()))
}

fn load_model(config: &RunConfig, taxonomy: &Taxonomy) -> Result<Checkpoint> {
    let path = required(&config.model, "model")?;
    let ck = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    ck.check_taxonomy(taxonomy)?;
    Ok(ck)
}

fn run(cli: Cli) -> Result<()> {
    let config = resolve(&cli.flags)?;
    let taxonomy = config.taxonomy().context("loading taxonomy")?;
    match cli.command {
        Command::Gen => {
            let dataset = data::generate(&config.gen_config(), &taxonomy)?;
            let path = out_dir(&config)?.join("dataset.jsonl");
            data::save_jsonl(&dataset, &taxonomy, &path)?;
            println!(
                "wrote {} tracks, {} frames to {}",
                dataset.num_tracks(),
                dataset.num_frames(),
                path.display()
            );
        }
        Command::Split => {
            let dataset = load_data(&config, &taxonomy)?;
            let (train, eval) = pipeline::split(&config, &dataset, &taxonomy)?;
            let dir = out_dir(&config)?;
            data::save_jsonl(&train, &taxonomy, dir.join("train.jsonl"))?;
            data::save_jsonl(&eval, &taxonomy, dir.join("eval.jsonl"))?;
            println!(
                "train: {} tracks, eval: {} tracks",
                train.num_tracks(),
                eval.num_tracks()
            );
        }
        Command::Train => {
            let dataset = load_data(&config, &taxonomy)?;
            let scheme = config.train.scheme;
            let trained = pipeline::train_scheme(&config.train_config(scheme), &dataset, &taxonomy)?;
            let dir = out_dir(&config)?;
            Checkpoint::new(&taxonomy, scheme, trained.params).save(dir.join("model.json"))?;
            pipeline::save_loss_csv(&trained.history, &dir.join("loss.csv"))?;
            if let Some(last) = trained.history.last() {
                println!("{scheme}: final mean loss {last:.6}");
            }
        }
        Command::SearchThreshold => {
            let ck = load_model(&config, &taxonomy)?;
            let dataset = load_data(&config, &taxonomy)?;
            let tau = pipeline::search_threshold(&ck.params, ck.scheme, &dataset, &taxonomy)?;
            let path = out_dir(&config)?.join("threshold.json");
            let file = ThresholdFile { scheme: ck.scheme, tau };
            fs::write(&path, serde_json::to_string_pretty(&file)? + "\n")?;
            println!("{tau}");
        }
        Command::Eval => {
            let ck = load_model(&config, &taxonomy)?;
            let dataset = load_data(&config, &taxonomy)?;
            let report = match config.threshold {
                Some(tau) => evaluation::evaluate(&ck.params, ck.scheme, &dataset, &taxonomy, tau)?,
                None => pipeline::evaluate_with_search(&ck.params, ck.scheme, &dataset, &taxonomy)?,
            };
            let files = evaluation::write_report(&report, &out_dir(&config)?)?;
            print!("{}", fs::read_to_string(&files.table)?);
        }
        Command::Infer => {
            let ck = load_model(&config, &taxonomy)?;
            let dataset = load_data(&config, &taxonomy)?;
            let tau = config.threshold.unwrap_or(0.0);
            let records = pipeline::predict_tracks(&ck, &dataset, &taxonomy, tau)?;
            let path = out_dir(&config)?.join("predictions.jsonl");
            let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            pipeline::write_predictions(&records, BufWriter::new(file))?;
            println!("wrote {} predictions to {}", records.len(), path.display());
        }
        Command::Ablation => {
            let dir = out_dir(&config)?;
            let run = pipeline::run_ablation(&config, &taxonomy)?;
            pipeline::write_ablation(&run, &dir)?;
            print!("{}", fs::read_to_string(dir.join("table1.csv"))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
