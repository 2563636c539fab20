//! Level-1 / 2A / 2B / 2C metrics per inference unit, and per-class tallies.
//!
//! * Level-1: coarse prediction matches the true group.
//! * Level-2A: best species within the predicted group matches the true species.
//! * Level-2B: best product-score species matches the true species.
//! * Level-2C: Level-2B with fallback; a unit whose selected confidence is below
//!   `τ` is scored on its coarse prediction instead.
//!
//! Accuracies are micro averages in percent. Per-class values are precisions.

mod report;

use serde::{Deserialize, Serialize};

pub use report::{read_report_json, table_name, write_report, write_table_csv, ReportFiles};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inference::{self, decide_selection, Level, Selection, Unit};
use crate::model::ModelParams;
use crate::taxonomy::Taxonomy;
use crate::training::Scheme;

/// Prediction and hit counts per class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTally {
    pub predicted: Vec<usize>,
    pub correct: Vec<usize>,
}

impl ClassTally {
    pub fn new(classes: usize) -> Self {
        Self {
            predicted: vec![0; classes],
            correct: vec![0; classes],
        }
    }

    fn record(&mut self, predicted: usize, truth: usize) {
        self.predicted[predicted] += 1;
        if predicted == truth {
            self.correct[predicted] += 1;
        }
    }

    /// Precision in percent; `None` for classes never predicted.
    pub fn precision(&self) -> Vec<Option<f64>> {
        self.predicted
            .iter()
            .zip(&self.correct)
            .map(|(&p, &c)| (p > 0).then(|| 100.0 * c as f64 / p as f64))
            .collect()
    }
}

/// Level-2C stop counts per true species.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopTally {
    pub units: Vec<usize>,
    pub stopped: Vec<usize>,
}

impl StopTally {
    fn new(classes: usize) -> Self {
        Self {
            units: vec![0; classes],
            stopped: vec![0; classes],
        }
    }

    /// Percentage of each species' units that stopped at the coarse level.
    pub fn fraction(&self) -> Vec<Option<f64>> {
        self.units
            .iter()
            .zip(&self.stopped)
            .map(|(&n, &s)| (n > 0).then(|| 100.0 * s as f64 / n as f64))
            .collect()
    }
}

/// Metrics that only exist for hierarchical models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierMetrics {
    pub level1_acc: f64,
    pub level2a_acc: f64,
    pub level2c_acc: f64,
    pub stops: usize,
    pub proceeds: usize,
    pub level1_groups: ClassTally,
    pub level2a_species: ClassTally,
    pub stop_species: StopTally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitReport {
    pub unit: Unit,
    /// Number of evaluation units (frames for `image`, tracks otherwise).
    pub units: usize,
    pub level2b_acc: f64,
    pub level2b_species: ClassTally,
    /// `None` for the flat baseline.
    pub hier: Option<HierMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scheme: Scheme,
    pub tau: f64,
    /// True when `tau` was searched on the same split it is evaluated on.
    pub tau_searched_on_eval: bool,
    pub groups: Vec<String>,
    pub species: Vec<String>,
    pub units: Vec<UnitReport>,
}

impl EvalReport {
    pub fn unit(&self, unit: Unit) -> Option<&UnitReport> {
        self.units.iter().find(|u| u.unit == unit)
    }
}

fn percent(correct: usize, total: usize) -> f64 {
    100.0 * correct as f64 / total as f64
}

#[derive(Debug)]
struct HierCounter {
    n: usize,
    l1: usize,
    l2a: usize,
    l2b: usize,
    l2c: usize,
    stops: usize,
    groups: ClassTally,
    species_2a: ClassTally,
    species_2b: ClassTally,
    stop: StopTally,
}

impl HierCounter {
    fn new(taxonomy: &Taxonomy) -> Self {
        let s = taxonomy.num_species();
        Self {
            n: 0,
            l1: 0,
            l2a: 0,
            l2b: 0,
            l2c: 0,
            stops: 0,
            groups: ClassTally::new(taxonomy.num_groups()),
            species_2a: ClassTally::new(s),
            species_2b: ClassTally::new(s),
            stop: StopTally::new(s),
        }
    }

    fn record(&mut self, sel: &Selection, species: usize, group: usize, tau: f64, unit: Unit) -> Result<()> {
        self.n += 1;
        self.l1 += usize::from(sel.coarse.index == group);
        self.l2a += usize::from(sel.level2a.index == species);
        self.l2b += usize::from(sel.level2b.index == species);
        self.groups.record(sel.coarse.index, group);
        self.species_2a.record(sel.level2a.index, species);
        self.species_2b.record(sel.level2b.index, species);
        let p = decide_selection(sel, tau, unit)?;
        self.stop.units[species] += 1;
        match p.level {
            Level::Coarse => {
                self.stops += 1;
                self.stop.stopped[species] += 1;
                self.l2c += usize::from(p.label == group);
            }
            Level::Fine => self.l2c += usize::from(p.label == species),
        }
        Ok(())
    }

    fn finish(self, unit: Unit) -> UnitReport {
        UnitReport {
            unit,
            units: self.n,
            level2b_acc: percent(self.l2b, self.n),
            level2b_species: self.species_2b,
            hier: Some(HierMetrics {
                level1_acc: percent(self.l1, self.n),
                level2a_acc: percent(self.l2a, self.n),
                level2c_acc: percent(self.l2c, self.n),
                stops: self.stops,
                proceeds: self.n - self.stops,
                level1_groups: self.groups,
                level2a_species: self.species_2a,
                stop_species: self.stop,
            }),
        }
    }
}

/// Evaluates a model on every inference unit.
pub fn evaluate(
    params: &ModelParams,
    scheme: Scheme,
    eval: &Dataset,
    taxonomy: &Taxonomy,
    tau: f64,
) -> Result<EvalReport> {
    if eval.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    params.check_taxonomy(taxonomy)?;
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::InvalidThreshold(tau));
    }
    let units = if scheme.is_hierarchical() {
        evaluate_hier(params, eval, taxonomy, tau)?
    } else {
        evaluate_flat(params, eval, taxonomy)?
    };
    Ok(EvalReport {
        scheme,
        tau: if scheme.is_hierarchical() { tau } else { 0.0 },
        tau_searched_on_eval: false,
        groups: taxonomy.group_names().to_vec(),
        species: taxonomy.species_names().map(str::to_string).collect(),
        units,
    })
}

fn evaluate_hier(params: &ModelParams, eval: &Dataset, taxonomy: &Taxonomy, tau: f64) -> Result<Vec<UnitReport>> {
    let mut counters: Vec<HierCounter> = Unit::ALL.iter().map(|_| HierCounter::new(taxonomy)).collect();
    for track in &eval.tracks {
        let scores = inference::score_track(params, &track.features())?;
        for (unit, counter) in Unit::ALL.iter().zip(&mut counters) {
            for sel in inference::select_unit(&scores, *unit)? {
                counter.record(&sel, track.label.fine, track.label.coarse, tau, *unit)?;
            }
        }
    }
    Ok(Unit::ALL.iter().zip(counters).map(|(u, c)| c.finish(*u)).collect())
}

fn evaluate_flat(params: &ModelParams, eval: &Dataset, taxonomy: &Taxonomy) -> Result<Vec<UnitReport>> {
    let mut out = Vec::new();
    let scored: Vec<Vec<Vec<f64>>> = eval
        .tracks
        .iter()
        .map(|t| inference::score_track_flat(params, &t.features()))
        .collect::<Result<_>>()?;
    for unit in Unit::ALL {
        let mut tally = ClassTally::new(taxonomy.num_species());
        let (mut n, mut hits) = (0, 0);
        for (track, frames) in eval.tracks.iter().zip(&scored) {
            for choice in inference::select_unit_flat(frames, unit)? {
                n += 1;
                hits += usize::from(choice.index == track.label.fine);
                tally.record(choice.index, track.label.fine);
            }
        }
        out.push(UnitReport {
            unit,
            units: n,
            level2b_acc: percent(hits, n),
            level2b_species: tally,
            hier: None,
        });
    }
    Ok(out)
}
