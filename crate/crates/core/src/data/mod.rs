//! Frames, tracks and datasets, plus JSONL I/O, the synthetic generator and the
//! track-level train/eval split.

mod generate;
mod jsonl;
mod split;

pub use generate::{allocate_track_counts, generate, GenConfig};
pub use jsonl::{load_jsonl, read_jsonl, save_jsonl, write_jsonl, FrameRecord};
pub use split::{split_by_track, train_count};

use crate::error::{Error, Result};
use crate::model::Features;
use crate::taxonomy::Taxonomy;
use crate::training::{Label, LabeledExample};

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub frame_index: u64,
    pub features: Features,
}

/// One individual fish: an ordered run of frames sharing a single label.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub track_id: String,
    pub label: Label,
    pub frames: Vec<Frame>,
}

impl Track {
    pub fn features(&self) -> Vec<Features> {
        self.frames.iter().map(|f| f.features.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub tracks: Vec<Track>,
}

impl Dataset {
    pub fn new(tracks: Vec<Track>) -> Self {
        Self { tracks }
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn num_tracks(&self) -> usize {
        self.tracks.len()
    }

    pub fn num_frames(&self) -> usize {
        self.tracks.iter().map(|t| t.frames.len()).sum()
    }

    /// Every frame as a training example.
    pub fn examples(&self) -> Vec<LabeledExample> {
        self.tracks
            .iter()
            .flat_map(|t| {
                t.frames.iter().map(move |f| LabeledExample {
                    features: f.features.clone(),
                    label: t.label,
                })
            })
            .collect()
    }

    /// Tracks per global species index.
    pub fn species_track_counts(&self, taxonomy: &Taxonomy) -> Vec<usize> {
        let mut counts = vec![0; taxonomy.num_species()];
        for t in &self.tracks {
            counts[t.label.fine] += 1;
        }
        counts
    }

    /// Frames per global species index.
    pub fn species_frame_counts(&self, taxonomy: &Taxonomy) -> Vec<usize> {
        let mut counts = vec![0; taxonomy.num_species()];
        for t in &self.tracks {
            counts[t.label.fine] += t.frames.len();
        }
        counts
    }

    /// Checks labels, non-empty tracks and uniform feature widths.
    pub fn validate(&self, taxonomy: &Taxonomy) -> Result<()> {
        let mut widths = None;
        for t in &self.tracks {
            t.label.check(taxonomy)?;
            if t.frames.is_empty() {
                return Err(Error::EmptyTrack);
            }
            for f in &t.frames {
                let w = (f.features.mode(), f.features.widths());
                match widths {
                    None => widths = Some(w),
                    Some(prev) if prev != w => {
                        return Err(Error::ShapeMismatch(format!(
                            "track {} has features of a different shape",
                            t.track_id
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}
