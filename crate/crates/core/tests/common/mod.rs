#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hsc_core::data::{Dataset, Frame, Track};
use hsc_core::model::{Dims, Features, Mode, ModelParams};
use hsc_core::taxonomy::{GroupDoc, TaxonomyDoc};
use hsc_core::training::Label;
use hsc_core::Taxonomy;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Taxonomy with groups `g0, g1, ...` of the given sizes.
pub fn taxonomy(sizes: &[usize]) -> Taxonomy {
    let groups = sizes
        .iter()
        .enumerate()
        .map(|(g, &n)| GroupDoc {
            name: format!("g{g}"),
            species: (0..n).map(|i| format!("g{g}s{i}")).collect(),
        })
        .collect();
    Taxonomy::from_doc(TaxonomyDoc { groups }).unwrap()
}

pub fn random_sizes(rng: &mut impl Rng, max_groups: usize, max_species: usize) -> Vec<usize> {
    loop {
        let g = rng.random_range(1..=max_groups);
        let sizes: Vec<usize> = (0..g).map(|_| rng.random_range(1..=max_species)).collect();
        if sizes.iter().sum::<usize>() <= max_species {
            return sizes;
        }
    }
}

/// Every scalar (weights and biases) drawn uniformly from `[-scale, scale]`.
pub fn random_params(mode: Mode, dims: Dims, taxonomy: &Taxonomy, scale: f64, rng: &mut impl Rng) -> ModelParams {
    let mut params = ModelParams::zeros(mode, dims, taxonomy);
    for p in params.scalars_mut() {
        *p = rng.random_range(-scale..=scale);
    }
    params
}

pub fn random_vec(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..=scale)).collect()
}

pub fn random_features(mode: Mode, dims: Dims, rng: &mut impl Rng, scale: f64) -> Features {
    match mode {
        Mode::Trunk => Features::Raw(random_vec(rng, dims.d_in, scale)),
        Mode::Precomputed => Features::Split {
            shallow: random_vec(rng, dims.shallow, scale),
            deep: random_vec(rng, dims.deep, scale),
        },
    }
}

pub fn random_label(taxonomy: &Taxonomy, rng: &mut impl Rng) -> Label {
    let fine = rng.random_range(0..taxonomy.num_species());
    Label {
        coarse: taxonomy.group_of(fine),
        fine,
    }
}

/// Tracks of uniformly random features and labels, lengths in `lengths`.
pub fn random_dataset(
    taxonomy: &Taxonomy,
    dims: Dims,
    tracks: usize,
    lengths: std::ops::RangeInclusive<usize>,
    rng: &mut impl Rng,
) -> Dataset {
    let tracks = (0..tracks)
        .map(|k| {
            let len = rng.random_range(lengths.clone());
            Track {
                track_id: format!("t{k}"),
                label: random_label(taxonomy, rng),
                frames: (0..len)
                    .map(|t| Frame {
                        frame_index: t as u64,
                        features: random_features(Mode::Trunk, dims, rng, 2.0),
                    })
                    .collect(),
            }
        })
        .collect();
    Dataset::new(tracks)
}

pub fn small_dims(rng: &mut impl Rng, max_in: usize) -> Dims {
    Dims {
        d_in: rng.random_range(1..=max_in),
        shallow: rng.random_range(2..=5),
        hidden: rng.random_range(2..=5),
        deep: rng.random_range(2..=5),
    }
}
