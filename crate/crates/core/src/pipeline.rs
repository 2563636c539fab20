//! End-to-end experiment workflow: generate → split → train → search τ →
//! evaluate → report. Shared by the command-line front end and the test suites.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{self, Dataset, GenConfig};
use crate::error::{Error, Result};
use crate::evaluation::{self, EvalReport};
use crate::inference::{self, Level, Unit};
use crate::model::{Checkpoint, ModelParams};
use crate::seed;
use crate::taxonomy::Taxonomy;
use crate::training::{self, Scheme, TrainConfig, TrainOutput};

/// Experiment configuration, loadable from JSON. Stage seeds inside `gen` and
/// `train` are replaced by values derived from the top-level `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub split_ratio: f64,
    pub schemes: Vec<Scheme>,
    pub gen: GenConfig,
    pub train: TrainConfig,
    pub taxonomy: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub threshold: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 2021,
            split_ratio: 0.8,
            schemes: Scheme::ALL.to_vec(),
            gen: GenConfig::default(),
            train: TrainConfig::default(),
            taxonomy: None,
            data: None,
            model: None,
            out: None,
            threshold: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            seed: seed::derive(self.seed, "gen"),
            ..self.gen.clone()
        }
    }

    pub fn split_seed(&self) -> u64 {
        seed::derive(self.seed, "split")
    }

    /// Training config for a scheme. Every scheme shares the same initialization
    /// and shuffling seed so that schemes differ only in their loss.
    pub fn train_config(&self, scheme: Scheme) -> TrainConfig {
        TrainConfig {
            scheme,
            seed: seed::derive(self.seed, "train"),
            ..self.train.clone()
        }
    }

    pub fn taxonomy(&self) -> Result<Taxonomy> {
        match &self.taxonomy {
            Some(path) => Taxonomy::load(path),
            None => Ok(Taxonomy::default_6x31()),
        }
    }
}

/// The dataset named by the config, or a freshly generated one.
pub fn dataset(config: &RunConfig, taxonomy: &Taxonomy) -> Result<Dataset> {
    match &config.data {
        Some(path) => data::load_jsonl(path, taxonomy),
        None => data::generate(&config.gen_config(), taxonomy),
    }
}

pub fn split(config: &RunConfig, dataset: &Dataset, taxonomy: &Taxonomy) -> Result<(Dataset, Dataset)> {
    data::split_by_track(dataset, taxonomy, config.split_ratio, config.split_seed())
}

pub fn train_scheme(config: &TrainConfig, train: &Dataset, taxonomy: &Taxonomy) -> Result<TrainOutput> {
    train.validate(taxonomy)?;
    training::train(config, &train.examples(), taxonomy)
}

/// Searches τ on `eval` (averaged-track unit).
pub fn search_threshold(params: &ModelParams, scheme: Scheme, eval: &Dataset, taxonomy: &Taxonomy) -> Result<f64> {
    let features: Vec<_> = eval.tracks.iter().map(|t| (t.features(), t.label.fine)).collect();
    let search = inference::search_threshold(
        params,
        features.iter().map(|(f, s)| (f.as_slice(), *s)),
        taxonomy,
        scheme,
    )?;
    Ok(search.tau)
}

/// Searches τ on `eval` and evaluates with it.
pub fn evaluate_with_search(
    params: &ModelParams,
    scheme: Scheme,
    eval: &Dataset,
    taxonomy: &Taxonomy,
) -> Result<EvalReport> {
    let tau = search_threshold(params, scheme, eval, taxonomy)?;
    let mut report = evaluation::evaluate(params, scheme, eval, taxonomy, tau)?;
    report.tau_searched_on_eval = scheme.is_hierarchical();
    Ok(report)
}

pub fn write_loss_csv(history: &[f64], writer: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "mean_loss"])?;
    for (epoch, loss) in history.iter().enumerate() {
        w.write_record([(epoch + 1).to_string(), loss.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_loss_csv(history: &[f64], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_loss_csv(history, file).map_err(|e| Error::io(path, std::io::Error::other(e)))
}

/// One line of the per-track prediction output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub track_id: String,
    pub unit: Unit,
    pub level: Level,
    pub label: usize,
    pub name: String,
    pub confidence: f64,
}

/// Level-2C predictions for both track units of every track.
pub fn predict_tracks(
    checkpoint: &Checkpoint,
    dataset: &Dataset,
    taxonomy: &Taxonomy,
    tau: f64,
) -> Result<Vec<PredictionRecord>> {
    checkpoint.check_taxonomy(taxonomy)?;
    let params = &checkpoint.params;
    let mut out = Vec::new();
    for track in &dataset.tracks {
        let features = track.features();
        for unit in [Unit::VideoAvg, Unit::VideoVote] {
            let prediction = if checkpoint.scheme.is_hierarchical() {
                let scores = inference::score_track(params, &features)?;
                let sel = inference::select_unit(&scores, unit)?[0];
                inference::decide_selection(&sel, tau, unit)?
            } else {
                let flat = inference::score_track_flat(params, &features)?;
                let choice = inference::select_unit_flat(&flat, unit)?[0];
                inference::Prediction {
                    level: Level::Fine,
                    label: choice.index,
                    confidence: choice.confidence,
                    unit,
                }
            };
            let name = match prediction.level {
                Level::Coarse => taxonomy.group_name(prediction.label),
                Level::Fine => taxonomy.species_name(prediction.label),
            };
            out.push(PredictionRecord {
                track_id: track.track_id.clone(),
                unit,
                level: prediction.level,
                label: prediction.label,
                name: name.to_string(),
                confidence: prediction.confidence,
            });
        }
    }
    Ok(out)
}

pub fn write_predictions(records: &[PredictionRecord], mut writer: impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// Everything one ablation run produced.
#[derive(Debug, Clone)]
pub struct AblationRun {
    pub reports: Vec<EvalReport>,
    pub histories: Vec<(Scheme, Vec<f64>)>,
    pub train_tracks: usize,
    pub eval_tracks: usize,
}

/// Trains and evaluates each configured scheme on one shared split. Each
/// hierarchical scheme gets its own searched threshold.
pub fn run_ablation(config: &RunConfig, taxonomy: &Taxonomy) -> Result<AblationRun> {
    if config.schemes.is_empty() {
        return Err(Error::InvalidConfig("no schemes configured".into()));
    }
    let full = dataset(config, taxonomy)?;
    let (train, eval) = split(config, &full, taxonomy)?;
    let mut reports = Vec::new();
    let mut histories = Vec::new();
    for &scheme in &config.schemes {
        let trained = train_scheme(&config.train_config(scheme), &train, taxonomy)?;
        reports.push(evaluate_with_search(&trained.params, scheme, &eval, taxonomy)?);
        histories.push((scheme, trained.history));
    }
    Ok(AblationRun {
        reports,
        histories,
        train_tracks: train.num_tracks(),
        eval_tracks: eval.num_tracks(),
    })
}

/// Writes `table1.csv`, `reports.json` and one directory of per-class reports
/// and loss history per scheme.
pub fn write_ablation(run: &AblationRun, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let table = dir.join("table1.csv");
    let file = std::fs::File::create(&table).map_err(|e| Error::io(&table, e))?;
    evaluation::write_table_csv(&run.reports, file).map_err(|e| Error::io(&table, std::io::Error::other(e)))?;
    let json = dir.join("reports.json");
    let text = serde_json::to_string_pretty(&run.reports).expect("reports serialize");
    std::fs::write(&json, text + "\n").map_err(|e| Error::io(&json, e))?;
    for (report, (scheme, history)) in run.reports.iter().zip(&run.histories) {
        let sub = dir.join(scheme.name());
        evaluation::write_report(report, &sub)?;
        save_loss_csv(history, &sub.join("loss.csv"))?;
    }
    Ok(())
}
