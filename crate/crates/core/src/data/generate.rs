use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Frame, Track};
use crate::error::{Error, Result};
use crate::model::{Dims, Features, Mode};
use crate::seed;
use crate::taxonomy::Taxonomy;
use crate::training::Label;

/// Synthetic long-tail track generator settings.
///
/// Features are a sum of four Gaussian components whose norms are roughly the
/// configured scales: a per-group mean, a per-species offset, a per-track jitter
/// shared by all frames of the track, and per-frame noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub zipf_exponent: f64,
    pub tracks_total: usize,
    pub frames_min: usize,
    pub frames_max: usize,
    pub sigma_group: f64,
    pub sigma_species: f64,
    pub sigma_track: f64,
    pub sigma_frame: f64,
    pub mode: Mode,
    /// `d_in` is used in trunk mode, `shallow` and `deep` in precomputed mode.
    pub dims: Dims,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            zipf_exponent: 1.2,
            tracks_total: 600,
            frames_min: 8,
            frames_max: 24,
            sigma_group: 4.0,
            sigma_species: 2.0,
            sigma_track: 3.0,
            sigma_frame: 2.0,
            mode: Mode::Trunk,
            dims: Dims::default(),
            seed: 0,
        }
    }
}

impl GenConfig {
    fn validate(&self, taxonomy: &Taxonomy) -> Result<()> {
        let s = taxonomy.num_species();
        if self.tracks_total < 2 * s {
            return Err(Error::InfeasibleConfig(format!(
                "{} tracks cannot give each of {s} species at least 2",
                self.tracks_total
            )));
        }
        if self.frames_min == 0 || self.frames_min > self.frames_max {
            return Err(Error::InfeasibleConfig("need 1 <= frames_min <= frames_max".into()));
        }
        if !(self.zipf_exponent.is_finite() && self.zipf_exponent >= 0.0) {
            return Err(Error::InfeasibleConfig("zipf_exponent must be finite and >= 0".into()));
        }
        let sigmas = [self.sigma_group, self.sigma_species, self.sigma_track, self.sigma_frame];
        if sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InfeasibleConfig("all scales must be positive".into()));
        }
        let widths_ok = match self.mode {
            Mode::Trunk => self.dims.d_in > 0,
            Mode::Precomputed => self.dims.shallow > 0 && self.dims.deep > 0,
        };
        if !widths_ok {
            return Err(Error::InfeasibleConfig("feature widths must be positive".into()));
        }
        Ok(())
    }
}

/// Tracks per popularity rank: 2 each, plus the remainder split ∝ rank^-exponent
/// by largest remainder (ties to the better rank). Non-increasing in rank.
pub fn allocate_track_counts(species: usize, total: usize, exponent: f64) -> Vec<usize> {
    let base = 2 * species;
    assert!(total >= base, "need at least two tracks per species");
    let spare = total - base;
    let weights: Vec<f64> = (1..=species).map(|r| (r as f64).powf(-exponent)).collect();
    let wsum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| spare as f64 * w / wsum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = spare - counts.iter().sum::<usize>();
    let mut by_remainder: Vec<usize> = (0..species).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &r in &by_remainder {
        if left == 0 {
            break;
        }
        counts[r] += 1;
        left -= 1;
    }
    counts.iter().map(|c| c + 2).collect()
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, dim: usize, norm: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, norm / (dim as f64).sqrt()).expect("positive scale");
    (0..dim).map(|_| normal.sample(rng)).collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Per-class centres in one feature space.
struct Centres {
    species: Vec<Vec<f64>>,
}

impl Centres {
    fn draw<R: Rng + ?Sized>(rng: &mut R, taxonomy: &Taxonomy, dim: usize, config: &GenConfig) -> Self {
        let mut species = Vec::with_capacity(taxonomy.num_species());
        for g in 0..taxonomy.num_groups() {
            let mean = gaussian_vec(rng, dim, config.sigma_group);
            for _ in taxonomy.group_range(g) {
                species.push(add(&mean, &gaussian_vec(rng, dim, config.sigma_species)));
            }
        }
        Self { species }
    }
}

/// Generates a synthetic dataset with long-tailed species frequencies.
pub fn generate(config: &GenConfig, taxonomy: &Taxonomy) -> Result<Dataset> {
    config.validate(taxonomy)?;
    let s = taxonomy.num_species();

    // Which species is most common is itself drawn from the seed.
    let mut rank_rng = seed::rng(config.seed, "gen/ranks");
    let mut by_rank: Vec<usize> = (0..s).collect();
    by_rank.shuffle(&mut rank_rng);
    let per_rank = allocate_track_counts(s, config.tracks_total, config.zipf_exponent);

    let mut centre_rng = seed::rng(config.seed, "gen/centres");
    let spaces: Vec<(usize, Centres)> = match config.mode {
        Mode::Trunk => vec![(
            config.dims.d_in,
            Centres::draw(&mut centre_rng, taxonomy, config.dims.d_in, config),
        )],
        Mode::Precomputed => vec![
            (
                config.dims.shallow,
                Centres::draw(&mut centre_rng, taxonomy, config.dims.shallow, config),
            ),
            (
                config.dims.deep,
                Centres::draw(&mut centre_rng, taxonomy, config.dims.deep, config),
            ),
        ],
    };

    let mut labels: Vec<usize> = Vec::with_capacity(config.tracks_total);
    for (rank, &species) in by_rank.iter().enumerate() {
        labels.extend(std::iter::repeat_n(species, per_rank[rank]));
    }
    let mut order_rng = seed::rng(config.seed, "gen/order");
    labels.shuffle(&mut order_rng);

    let mut rng = seed::rng(config.seed, "gen/tracks");
    let tracks = labels
        .into_iter()
        .enumerate()
        .map(|(k, species)| {
            let frames = rng.random_range(config.frames_min..=config.frames_max);
            let jitters: Vec<Vec<f64>> = spaces
                .iter()
                .map(|(dim, _)| gaussian_vec(&mut rng, *dim, config.sigma_track))
                .collect();
            let frames = (0..frames)
                .map(|t| {
                    let mut parts = spaces.iter().zip(&jitters).map(|((dim, centres), jitter)| {
                        let noise = gaussian_vec(&mut rng, *dim, config.sigma_frame);
                        add(&add(&centres.species[species], jitter), &noise)
                    });
                    let features = match config.mode {
                        Mode::Trunk => Features::Raw(parts.next().expect("one space")),
                        Mode::Precomputed => {
                            let shallow = parts.next().expect("shallow space");
                            let deep = parts.next().expect("deep space");
                            Features::Split { shallow, deep }
                        }
                    };
                    Frame {
                        frame_index: t as u64,
                        features,
                    }
                })
                .collect();
            Track {
                track_id: format!("t{k:04}"),
                label: Label {
                    coarse: taxonomy.group_of(species),
                    fine: species,
                },
                frames,
            }
        })
        .collect();
    Ok(Dataset { tracks })
}
