//! The multi-head network.
//!
//! Topology (trunk mode):
//!
//! ```text
//! raw ──dense+relu──▶ shallow ──dense+relu──▶ deep
//!                        │                     ├──dense──▶ softmax  (fine head, group 0)
//!                        │                     ├── ...
//!                        │                     ├──dense──▶ softmax  (fine head, group G-1)
//!                        │                     └──dense+relu──dense──▶ softmax (flat baseline, S-way)
//!                        └──dense+relu──dense──▶ softmax (coarse head, G-way)
//! ```
//!
//! In precomputed mode the trunk is absent and `(shallow, deep)` arrive as input.

mod checkpoint;
mod layers;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::Checkpoint;
pub use layers::{argmax, stable_softmax, Dense};

use crate::error::{Error, Result};
use crate::taxonomy::Taxonomy;
use layers::relu_in_place;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Raw feature vectors pass through the two trunk layers.
    Trunk,
    /// Inputs are already `(shallow, deep)` feature pairs.
    Precomputed,
}

/// Layer widths. `d_in` is ignored in precomputed mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub d_in: usize,
    pub shallow: usize,
    pub hidden: usize,
    pub deep: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Self {
            d_in: 32,
            shallow: 24,
            hidden: 24,
            deep: 16,
        }
    }
}

/// One frame's input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Features {
    Raw(Vec<f64>),
    Split { shallow: Vec<f64>, deep: Vec<f64> },
}

impl Features {
    pub fn mode(&self) -> Mode {
        match self {
            Features::Raw(_) => Mode::Trunk,
            Features::Split { .. } => Mode::Precomputed,
        }
    }

    /// Widths as `(raw, shallow, deep)`; unused entries are zero.
    pub fn widths(&self) -> (usize, usize, usize) {
        match self {
            Features::Raw(x) => (x.len(), 0, 0),
            Features::Split { shallow, deep } => (0, shallow.len(), deep.len()),
        }
    }
}

/// All head outputs for one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadOutputs {
    /// Group probabilities, length G.
    pub coarse: Vec<f64>,
    /// Within-group species probabilities, one vector per group.
    pub fine_local: Vec<Vec<f64>>,
    /// `coarse[g] * fine_local[g][i]` in global species order, length S.
    pub joint: Vec<f64>,
}

impl HeadOutputs {
    /// Builds outputs from coarse and per-group fine simplices.
    pub fn from_parts(coarse: Vec<f64>, fine_local: Vec<Vec<f64>>) -> Result<Self> {
        let joint = joint_scores(&coarse, &fine_local)?;
        Ok(Self {
            coarse,
            fine_local,
            joint,
        })
    }
}

/// Species scores as the product of group and within-group probabilities.
pub fn joint_scores(coarse: &[f64], fine_local: &[Vec<f64>]) -> Result<Vec<f64>> {
    if coarse.len() != fine_local.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} coarse scores for {} fine heads",
            coarse.len(),
            fine_local.len()
        )));
    }
    Ok(coarse
        .iter()
        .zip(fine_local)
        .flat_map(|(&c, fine)| fine.iter().map(move |&f| c * f))
        .collect())
}

/// [`joint_scores`] with the head shapes checked against a taxonomy.
pub fn joint_scores_for(taxonomy: &Taxonomy, coarse: &[f64], fine_local: &[Vec<f64>]) -> Result<Vec<f64>> {
    let sizes_match = fine_local.len() == taxonomy.num_groups()
        && fine_local
            .iter()
            .enumerate()
            .all(|(g, f)| f.len() == taxonomy.group_size(g));
    if !sizes_match {
        return Err(Error::ShapeMismatch("fine heads do not match taxonomy".into()));
    }
    joint_scores(coarse, fine_local)
}

/// Network parameters for both the hierarchical heads and the flat baseline head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mode: Mode,
    pub dims: Dims,
    pub group_sizes: Vec<usize>,
    pub trunk: Option<[Dense; 2]>,
    pub coarse: [Dense; 2],
    pub fine: Vec<Dense>,
    pub flat: [Dense; 2],
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct Trace {
    pub raw: Option<Vec<f64>>,
    pub shallow: Vec<f64>,
    pub deep: Vec<f64>,
    pub coarse_hidden: Vec<f64>,
    pub flat_hidden: Vec<f64>,
}

/// Gradients with respect to the logits of each head.
#[derive(Debug, Clone, Default)]
pub(crate) struct LogitGrads {
    pub coarse: Option<Vec<f64>>,
    /// `None` for heads that receive no gradient.
    pub fine: Vec<Option<Vec<f64>>>,
    pub flat: Option<Vec<f64>>,
}

impl ModelParams {
    fn build(mode: Mode, dims: Dims, group_sizes: &[usize], mut layer: impl FnMut(usize, usize) -> Dense) -> Self {
        let g = group_sizes.len();
        let s = group_sizes.iter().sum();
        let trunk = match mode {
            Mode::Trunk => Some([layer(dims.d_in, dims.shallow), layer(dims.shallow, dims.deep)]),
            Mode::Precomputed => None,
        };
        let coarse = [layer(dims.shallow, dims.hidden), layer(dims.hidden, g)];
        let fine = group_sizes.iter().map(|&n| layer(dims.deep, n)).collect();
        let flat = [layer(dims.deep, dims.hidden), layer(dims.hidden, s)];
        Self {
            mode,
            dims,
            group_sizes: group_sizes.to_vec(),
            trunk,
            coarse,
            fine,
            flat,
        }
    }

    pub fn zeros(mode: Mode, dims: Dims, taxonomy: &Taxonomy) -> Self {
        Self::build(mode, dims, &taxonomy.group_sizes(), Dense::zeros)
    }

    /// Glorot-uniform initialization from the given generator.
    pub fn init<R: Rng + ?Sized>(mode: Mode, dims: Dims, taxonomy: &Taxonomy, rng: &mut R) -> Self {
        Self::build(mode, dims, &taxonomy.group_sizes(), |i, o| Dense::glorot(i, o, rng))
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            mode: self.mode,
            dims: self.dims,
            group_sizes: self.group_sizes.clone(),
            trunk: self.trunk.as_ref().map(|[a, b]| [a.zeros_like(), b.zeros_like()]),
            coarse: [self.coarse[0].zeros_like(), self.coarse[1].zeros_like()],
            fine: self.fine.iter().map(Dense::zeros_like).collect(),
            flat: [self.flat[0].zeros_like(), self.flat[1].zeros_like()],
        }
    }

    /// The same heads with the trunk removed, for `(shallow, deep)` inputs.
    pub fn without_trunk(&self) -> Self {
        let mut out = self.clone();
        out.mode = Mode::Precomputed;
        out.trunk = None;
        out
    }

    pub fn num_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn num_species(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    pub(crate) fn layers(&self) -> Vec<&Dense> {
        let mut out: Vec<&Dense> = Vec::with_capacity(6 + self.fine.len());
        if let Some(trunk) = &self.trunk {
            out.extend(trunk.iter());
        }
        out.extend(self.coarse.iter());
        out.extend(self.fine.iter());
        out.extend(self.flat.iter());
        out
    }

    pub(crate) fn layers_mut(&mut self) -> Vec<&mut Dense> {
        let mut out: Vec<&mut Dense> = Vec::with_capacity(6 + self.fine.len());
        if let Some(trunk) = &mut self.trunk {
            out.extend(trunk.iter_mut());
        }
        out.extend(self.coarse.iter_mut());
        out.extend(self.fine.iter_mut());
        out.extend(self.flat.iter_mut());
        out
    }

    /// Every scalar parameter, in a fixed order.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers()
            .into_iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    /// Mutable references to every scalar parameter, in [`flatten`](Self::flatten) order.
    pub fn scalars_mut(&mut self) -> Vec<&mut f64> {
        self.layers_mut()
            .into_iter()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers().iter().all(|l| l.is_finite())
    }

    /// Checks internal shape consistency.
    pub fn validate(&self) -> Result<()> {
        let expected = Self::build(self.mode, self.dims, &self.group_sizes, Dense::zeros);
        let ok = !self.group_sizes.is_empty()
            && self.group_sizes.iter().all(|&n| n > 0)
            && self.trunk.is_some() == (self.mode == Mode::Trunk)
            && expected
                .layers()
                .iter()
                .zip(self.layers())
                .all(|(a, b)| a.same_shape(b))
            && expected.layers().len() == self.layers().len();
        if !ok {
            return Err(Error::ShapeMismatch("model parameters have inconsistent shapes".into()));
        }
        if !self.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        Ok(())
    }

    /// Checks that the fine heads line up with the taxonomy's groups.
    pub fn check_taxonomy(&self, taxonomy: &Taxonomy) -> Result<()> {
        if self.group_sizes != taxonomy.group_sizes() {
            return Err(Error::TaxonomyMismatch);
        }
        Ok(())
    }

    fn check_input(&self, features: &Features) -> Result<()> {
        match (self.mode, features) {
            (Mode::Trunk, Features::Raw(x)) if x.len() == self.dims.d_in => Ok(()),
            (Mode::Trunk, Features::Raw(x)) => Err(Error::DimensionMismatch {
                expected: self.dims.d_in,
                actual: x.len(),
                context: "raw features",
            }),
            (Mode::Precomputed, Features::Split { shallow, deep }) => {
                if shallow.len() != self.dims.shallow {
                    Err(Error::DimensionMismatch {
                        expected: self.dims.shallow,
                        actual: shallow.len(),
                        context: "shallow features",
                    })
                } else if deep.len() != self.dims.deep {
                    Err(Error::DimensionMismatch {
                        expected: self.dims.deep,
                        actual: deep.len(),
                        context: "deep features",
                    })
                } else {
                    Ok(())
                }
            }
            (Mode::Trunk, Features::Split { .. }) => Err(Error::DimensionMismatch {
                expected: self.dims.d_in,
                actual: 0,
                context: "trunk model given (shallow, deep) features",
            }),
            (Mode::Precomputed, Features::Raw(x)) => Err(Error::DimensionMismatch {
                expected: 0,
                actual: x.len(),
                context: "precomputed model given raw features",
            }),
        }
    }

    /// Shallow and deep feature vectors for an input.
    pub fn features(&self, input: &Features) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_input(input)?;
        Ok(match (input, &self.trunk) {
            (Features::Raw(x), Some([t1, t2])) => {
                let mut shallow = t1.forward(x);
                relu_in_place(&mut shallow);
                let mut deep = t2.forward(&shallow);
                relu_in_place(&mut deep);
                (shallow, deep)
            }
            (Features::Split { shallow, deep }, _) => (shallow.clone(), deep.clone()),
            (Features::Raw(_), None) => unreachable!("checked by check_input"),
        })
    }

    pub(crate) fn trace(&self, input: &Features) -> Result<Trace> {
        let (shallow, deep) = self.features(input)?;
        let mut coarse_hidden = self.coarse[0].forward(&shallow);
        relu_in_place(&mut coarse_hidden);
        let mut flat_hidden = self.flat[0].forward(&deep);
        relu_in_place(&mut flat_hidden);
        let raw = match input {
            Features::Raw(x) => Some(x.clone()),
            Features::Split { .. } => None,
        };
        Ok(Trace {
            raw,
            shallow,
            deep,
            coarse_hidden,
            flat_hidden,
        })
    }

    pub(crate) fn hier_outputs(&self, trace: &Trace) -> Result<HeadOutputs> {
        let coarse = softmax_checked(&self.coarse[1].forward(&trace.coarse_hidden), "coarse head")?;
        let fine_local = self
            .fine
            .iter()
            .map(|head| softmax_checked(&head.forward(&trace.deep), "fine head"))
            .collect::<Result<Vec<_>>>()?;
        HeadOutputs::from_parts(coarse, fine_local)
    }

    pub(crate) fn flat_outputs(&self, trace: &Trace) -> Result<Vec<f64>> {
        softmax_checked(&self.flat[1].forward(&trace.flat_hidden), "flat head")
    }

    /// Hierarchical forward pass.
    pub fn forward(&self, input: &Features) -> Result<HeadOutputs> {
        let (shallow, deep) = self.features(input)?;
        let mut hidden = self.coarse[0].forward(&shallow);
        relu_in_place(&mut hidden);
        let coarse = softmax_checked(&self.coarse[1].forward(&hidden), "coarse head")?;
        let fine_local = self
            .fine
            .iter()
            .map(|head| softmax_checked(&head.forward(&deep), "fine head"))
            .collect::<Result<Vec<_>>>()?;
        HeadOutputs::from_parts(coarse, fine_local)
    }

    /// Flat baseline forward pass: one S-way distribution from the deep features.
    pub fn forward_flat(&self, input: &Features) -> Result<Vec<f64>> {
        let (_, deep) = self.features(input)?;
        let mut hidden = self.flat[0].forward(&deep);
        relu_in_place(&mut hidden);
        softmax_checked(&self.flat[1].forward(&hidden), "flat head")
    }

    /// Backpropagates head-logit gradients into `grads`.
    pub(crate) fn backprop(&self, trace: &Trace, dlogits: &LogitGrads, grads: &mut ModelParams) {
        let mut d_shallow = vec![0.0; trace.shallow.len()];
        let mut d_deep = vec![0.0; trace.deep.len()];

        if let Some(dz) = &dlogits.coarse {
            let mut dh = self.coarse[1].backward(&trace.coarse_hidden, dz, &mut grads.coarse[1]);
            relu_backward(&mut dh, &trace.coarse_hidden);
            let ds = self.coarse[0].backward(&trace.shallow, &dh, &mut grads.coarse[0]);
            add_assign(&mut d_shallow, &ds);
        }
        for ((head, grad), dz) in self.fine.iter().zip(&mut grads.fine).zip(&dlogits.fine) {
            if let Some(dz) = dz {
                let dd = head.backward(&trace.deep, dz, grad);
                add_assign(&mut d_deep, &dd);
            }
        }
        if let Some(dz) = &dlogits.flat {
            let mut dh = self.flat[1].backward(&trace.flat_hidden, dz, &mut grads.flat[1]);
            relu_backward(&mut dh, &trace.flat_hidden);
            let dd = self.flat[0].backward(&trace.deep, &dh, &mut grads.flat[0]);
            add_assign(&mut d_deep, &dd);
        }

        if let (Some([t1, t2]), Some(raw), Some(gt)) = (&self.trunk, &trace.raw, &mut grads.trunk) {
            relu_backward(&mut d_deep, &trace.deep);
            let ds = t2.backward(&trace.shallow, &d_deep, &mut gt[1]);
            add_assign(&mut d_shallow, &ds);
            relu_backward(&mut d_shallow, &trace.shallow);
            t1.backward(raw, &d_shallow, &mut gt[0]);
        }
    }
}

fn softmax_checked(logits: &[f64], head: &'static str) -> Result<Vec<f64>> {
    stable_softmax(logits).map_err(|e| match e {
        Error::NonFiniteInput => Error::NonFiniteActivation(head),
        other => other,
    })
}

/// Zeroes gradient entries whose ReLU output was clamped.
fn relu_backward(grad: &mut [f64], activated: &[f64]) {
    for (g, &a) in grad.iter_mut().zip(activated) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

fn add_assign(acc: &mut [f64], other: &[f64]) {
    acc.iter_mut().zip(other).for_each(|(a, b)| *a += b);
}
