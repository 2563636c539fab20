//! Losses, gradients and the image-level mini-batch training loop.
//!
//! Four training schemes share one network definition:
//!
//! | scheme     | loss                                                        |
//! |------------|-------------------------------------------------------------|
//! | `baseline` | `-ln flat[y2]` on the flat S-way head                       |
//! | `scheme1`  | `-ln coarse[y1] - ln fine_local[y1][i]` (no product)        |
//! | `scheme2`  | `-ln coarse[y1] - Σ_i y2_i ln joint` over the true group    |
//! | `scheme3`  | `-ln coarse[y1] - Σ_s y2'_s ln joint[s]` over all species   |
//!
//! With one-hot labels scheme2 and scheme3 reduce to the same number,
//! `-ln coarse[y1] - ln joint[y2]`.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dims, Features, HeadOutputs, LogitGrads, Mode, ModelParams};
use crate::seed;
use crate::taxonomy::Taxonomy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Baseline,
    Scheme1,
    Scheme2,
    Scheme3,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Baseline, Scheme::Scheme1, Scheme::Scheme2, Scheme::Scheme3];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Baseline => "baseline",
            Scheme::Scheme1 => "scheme1",
            Scheme::Scheme2 => "scheme2",
            Scheme::Scheme3 => "scheme3",
        }
    }

    /// Whether the scheme produces coarse and fine heads (everything but the baseline).
    pub fn is_hierarchical(self) -> bool {
        self != Scheme::Baseline
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scheme {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub scheme: Scheme,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub mode: Mode,
    pub dims: Dims,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Scheme3,
            learning_rate: 0.05,
            momentum: 0.9,
            epochs: 30,
            batch_size: 32,
            seed: 0,
            mode: Mode::Trunk,
            dims: Dims::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be a positive real");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        let d = self.dims;
        if d.shallow == 0 || d.hidden == 0 || d.deep == 0 || (self.mode == Mode::Trunk && d.d_in == 0) {
            return bad("layer widths must be positive");
        }
        Ok(())
    }
}

/// Coarse and fine ground truth for one input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    /// Group index.
    pub coarse: usize,
    /// Global species index.
    pub fine: usize,
}

impl Label {
    pub fn check(&self, taxonomy: &Taxonomy) -> Result<()> {
        if self.coarse >= taxonomy.num_groups() {
            return Err(Error::LabelOutOfRange(format!("group {}", self.coarse)));
        }
        if self.fine >= taxonomy.num_species() {
            return Err(Error::LabelOutOfRange(format!("species {}", self.fine)));
        }
        if taxonomy.group_of(self.fine) != self.coarse {
            return Err(Error::InconsistentLabels(format!(
                "species {} is not in group {}",
                self.fine, self.coarse
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub features: Features,
    pub label: Label,
}

/// Model output fed to a loss.
#[derive(Debug, Clone, Copy)]
pub enum Outputs<'a> {
    Hier(&'a HeadOutputs),
    Flat(&'a [f64]),
}

/// Per-example loss for a scheme.
pub fn compute_loss(scheme: Scheme, outputs: Outputs<'_>, label: Label, taxonomy: &Taxonomy) -> Result<f64> {
    label.check(taxonomy)?;
    match (scheme, outputs) {
        (Scheme::Baseline, Outputs::Flat(p)) => Ok(flat_terms(p, label, taxonomy)?.0),
        (Scheme::Baseline, Outputs::Hier(_)) => Err(Error::InvalidConfig("baseline loss needs flat outputs".into())),
        (_, Outputs::Hier(out)) => Ok(hier_terms(scheme, out, label, taxonomy)?.0),
        (_, Outputs::Flat(_)) => Err(Error::InvalidConfig(format!(
            "{scheme} loss needs hierarchical outputs"
        ))),
    }
}

fn flat_terms(p: &[f64], label: Label, taxonomy: &Taxonomy) -> Result<(f64, LogitGrads)> {
    if p.len() != taxonomy.num_species() {
        return Err(Error::ShapeMismatch(
            "flat output length differs from species count".into(),
        ));
    }
    let mut dz = p.to_vec();
    dz[label.fine] -= 1.0;
    Ok((
        -p[label.fine].ln(),
        LogitGrads {
            flat: Some(dz),
            ..Default::default()
        },
    ))
}

fn check_hier_shape(out: &HeadOutputs, taxonomy: &Taxonomy) -> Result<()> {
    let ok = out.coarse.len() == taxonomy.num_groups()
        && out.joint.len() == taxonomy.num_species()
        && out.fine_local.len() == taxonomy.num_groups()
        && out
            .fine_local
            .iter()
            .enumerate()
            .all(|(g, f)| f.len() == taxonomy.group_size(g));
    if ok {
        Ok(())
    } else {
        Err(Error::ShapeMismatch("head outputs do not match taxonomy".into()))
    }
}

/// Loss and logit gradients for the hierarchical schemes.
fn hier_terms(scheme: Scheme, out: &HeadOutputs, label: Label, taxonomy: &Taxonomy) -> Result<(f64, LogitGrads)> {
    check_hier_shape(out, taxonomy)?;
    let g_true = label.coarse;
    let (_, local) = taxonomy.to_local(label.fine)?;
    let groups = taxonomy.num_groups();

    // Head-1 cross-entropy against the coarse one-hot.
    let mut loss = -out.coarse[g_true].ln();
    let mut d_coarse = out.coarse.clone();
    d_coarse[g_true] -= 1.0;
    let mut d_fine: Vec<Option<Vec<f64>>> = vec![None; groups];

    match scheme {
        Scheme::Scheme1 => {
            let f = &out.fine_local[g_true];
            loss -= f[local].ln();
            let mut dz = f.clone();
            dz[local] -= 1.0;
            d_fine[g_true] = Some(dz);
        }
        Scheme::Scheme2 | Scheme::Scheme3 => {
            // Fine-level targets as (global species, weight) pairs: scheme2 uses the
            // within-head one-hot of the true group, scheme3 the one-hot over all species.
            let targets: Vec<(usize, f64)> = if scheme == Scheme::Scheme2 {
                taxonomy
                    .group_range(g_true)
                    .enumerate()
                    .map(|(i, s)| (s, if i == local { 1.0 } else { 0.0 }))
                    .collect()
            } else {
                (0..taxonomy.num_species())
                    .map(|s| (s, if s == label.fine { 1.0 } else { 0.0 }))
                    .collect()
            };
            // d/dz_coarse of -Σ t_s ln(c_g f_gi) = (Σ t) c - a, with a_g = Σ_{s∈g} t_s;
            // d/dz_fine_g = a_g f_g - t_g.
            let mut mass = vec![0.0; groups];
            let mut local_targets: Vec<Vec<f64>> = (0..groups).map(|g| vec![0.0; taxonomy.group_size(g)]).collect();
            for &(s, t) in &targets {
                if t == 0.0 {
                    continue;
                }
                loss -= t * out.joint[s].ln();
                let (g, i) = taxonomy.to_local(s)?;
                mass[g] += t;
                local_targets[g][i] += t;
            }
            let total: f64 = mass.iter().sum();
            for (g, d) in d_coarse.iter_mut().enumerate() {
                *d += total * out.coarse[g] - mass[g];
            }
            for g in 0..groups {
                if mass[g] != 0.0 {
                    let dz = out.fine_local[g]
                        .iter()
                        .zip(&local_targets[g])
                        .map(|(f, t)| mass[g] * f - t)
                        .collect();
                    d_fine[g] = Some(dz);
                }
            }
        }
        Scheme::Baseline => unreachable!("handled by flat_terms"),
    }

    Ok((
        loss,
        LogitGrads {
            coarse: Some(d_coarse),
            fine: d_fine,
            flat: None,
        },
    ))
}

/// Gradient of the mean batch loss, plus that mean loss.
pub fn compute_gradients(
    params: &ModelParams,
    batch: &[LabeledExample],
    scheme: Scheme,
    taxonomy: &Taxonomy,
) -> Result<(f64, ModelParams)> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut grads = params.zeros_like();
    let mut total = 0.0;
    for example in batch {
        example.label.check(taxonomy)?;
        let trace = params.trace(&example.features)?;
        let (loss, dlogits) = if scheme.is_hierarchical() {
            let out = params.hier_outputs(&trace)?;
            hier_terms(scheme, &out, example.label, taxonomy)?
        } else {
            let p = params.flat_outputs(&trace)?;
            flat_terms(&p, example.label, taxonomy)?
        };
        total += loss;
        params.backprop(&trace, &dlogits, &mut grads);
    }
    let n = batch.len() as f64;
    grads.scalars_mut().into_iter().for_each(|g| *g /= n);
    Ok((total / n, grads))
}

/// Mean loss of a model over a set of examples.
pub fn mean_loss(
    params: &ModelParams,
    examples: &[LabeledExample],
    scheme: Scheme,
    taxonomy: &Taxonomy,
) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for ex in examples {
        total += if scheme.is_hierarchical() {
            compute_loss(
                scheme,
                Outputs::Hier(&params.forward(&ex.features)?),
                ex.label,
                taxonomy,
            )?
        } else {
            compute_loss(
                scheme,
                Outputs::Flat(&params.forward_flat(&ex.features)?),
                ex.label,
                taxonomy,
            )?
        };
    }
    Ok(total / examples.len() as f64)
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: ModelParams,
    /// Mean training loss of each epoch, accumulated over its mini-batches.
    pub history: Vec<f64>,
}

/// Seeded initial parameters for a config.
pub fn initial_params(config: &TrainConfig, taxonomy: &Taxonomy) -> ModelParams {
    let mut rng = seed::rng(config.seed, "init");
    ModelParams::init(config.mode, config.dims, taxonomy, &mut rng)
}

/// SGD with momentum over shuffled mini-batches.
pub fn train(config: &TrainConfig, examples: &[LabeledExample], taxonomy: &Taxonomy) -> Result<TrainOutput> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut params = initial_params(config, taxonomy);
    if let Some(bad) = examples.iter().find(|e| e.features.mode() != config.mode) {
        return Err(Error::InvalidConfig(format!(
            "example features are {:?} but config mode is {:?}",
            bad.features.mode(),
            config.mode
        )));
    }
    let mut velocity = params.flatten();
    velocity.iter_mut().for_each(|v| *v = 0.0);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut batch = Vec::with_capacity(config.batch_size);

    for epoch in 0..config.epochs {
        let mut rng = seed::rng(config.seed, &format!("shuffle/{epoch}"));
        order.sort_unstable();
        order.shuffle(&mut rng);

        let mut epoch_total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| examples[i].clone()));
            let (loss, grads) = compute_gradients(&params, &batch, config.scheme, taxonomy).map_err(|e| match e {
                Error::NonFiniteActivation(_) => Error::DivergedTraining { epoch },
                other => other,
            })?;
            if !loss.is_finite() {
                return Err(Error::DivergedTraining { epoch });
            }
            epoch_total += loss * chunk.len() as f64;
            for ((p, v), g) in params
                .scalars_mut()
                .into_iter()
                .zip(velocity.iter_mut())
                .zip(grads.flatten())
            {
                *v = config.momentum * *v + g;
                *p -= config.learning_rate * *v;
            }
        }
        if !params.is_finite() {
            return Err(Error::DivergedTraining { epoch });
        }
        history.push(epoch_total / examples.len() as f64);
    }
    Ok(TrainOutput { params, history })
}
