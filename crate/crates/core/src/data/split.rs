use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed;
use crate::taxonomy::Taxonomy;

/// Training tracks for a species with `n` tracks: `⌈ratio·n⌉`, capped so that at
/// least one track is left for evaluation.
pub fn train_count(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64).ceil() as usize).min(n - 1)
}

/// Track-level split stratified by species. Every frame of a track lands on the
/// same side; both outputs keep the input track order.
pub fn split_by_track(dataset: &Dataset, taxonomy: &Taxonomy, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidConfig(format!("split ratio {ratio} must lie in (0, 1)")));
    }
    let mut per_species: Vec<Vec<usize>> = vec![Vec::new(); taxonomy.num_species()];
    for (i, t) in dataset.tracks.iter().enumerate() {
        t.label.check(taxonomy)?;
        per_species[t.label.fine].push(i);
    }
    let mut in_train = vec![false; dataset.tracks.len()];
    let mut rng = seed::rng(seed, "split");
    for (s, members) in per_species.iter_mut().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::SpeciesTooSmall(taxonomy.species_name(s).to_string()));
        }
        members.shuffle(&mut rng);
        for &i in &members[..train_count(members.len(), ratio)] {
            in_train[i] = true;
        }
    }
    let (mut train, mut eval) = (Dataset::default(), Dataset::default());
    for (t, keep) in dataset.tracks.iter().zip(in_train) {
        if keep {
            train.tracks.push(t.clone());
        } else {
            eval.tracks.push(t.clone());
        }
    }
    Ok((train, eval))
}
