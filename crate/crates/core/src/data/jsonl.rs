use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Frame, Track};
use crate::error::{Error, Result};
use crate::model::Features;
use crate::taxonomy::Taxonomy;
use crate::training::Label;

/// One line of a frame JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub track_id: String,
    pub frame_index: u64,
    pub group: String,
    pub species: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shallow: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deep: Option<Vec<f64>>,
}

impl FrameRecord {
    fn into_features(self, line: usize) -> Result<Features> {
        match (self.features, self.shallow, self.deep) {
            (Some(x), None, None) => Ok(Features::Raw(x)),
            (None, Some(shallow), Some(deep)) => Ok(Features::Split { shallow, deep }),
            _ => Err(Error::MalformedRecord {
                line,
                reason: "expected either \"features\" or both \"shallow\" and \"deep\"".into(),
            }),
        }
    }
}

/// Parses frame records, regrouping frames into tracks by `track_id` (in order of
/// first appearance) and ordering each track's frames by `frame_index`.
pub fn read_jsonl(reader: impl Read, taxonomy: &Taxonomy) -> Result<Dataset> {
    let mut tracks: Vec<Track> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    let mut shape = None;

    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|e| Error::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        let record: FrameRecord = serde_json::from_str(&text).map_err(|e| Error::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        let coarse = taxonomy
            .group_index(&record.group)
            .ok_or_else(|| Error::MalformedRecord {
                line: line_no,
                reason: format!("unknown group {:?}", record.group),
            })?;
        let fine = taxonomy
            .species_index(&record.species)
            .ok_or_else(|| Error::MalformedRecord {
                line: line_no,
                reason: format!("unknown species {:?}", record.species),
            })?;
        if taxonomy.group_of(fine) != coarse {
            return Err(Error::MalformedRecord {
                line: line_no,
                reason: format!("species {:?} is not in group {:?}", record.species, record.group),
            });
        }
        let label = Label { coarse, fine };
        let track_id = record.track_id.clone();
        let frame_index = record.frame_index;
        let features = record.into_features(line_no)?;

        let this_shape = (features.mode(), features.widths());
        match shape {
            None => shape = Some(this_shape),
            Some(s) if s != this_shape => return Err(Error::RecordDimensionMismatch { line: line_no }),
            _ => {}
        }

        let slot = *by_id.entry(track_id.clone()).or_insert_with(|| {
            tracks.push(Track {
                track_id: track_id.clone(),
                label,
                frames: Vec::new(),
            });
            tracks.len() - 1
        });
        let track = &mut tracks[slot];
        if track.label != label {
            return Err(Error::InconsistentTrackLabels {
                line: line_no,
                track_id,
            });
        }
        track.frames.push(Frame { frame_index, features });
    }

    for track in &mut tracks {
        track.frames.sort_by_key(|f| f.frame_index);
        if track.frames.windows(2).any(|w| w[0].frame_index == w[1].frame_index) {
            return Err(Error::MalformedRecord {
                line: 0,
                reason: format!("duplicate frame_index in track {:?}", track.track_id),
            });
        }
    }
    Ok(Dataset { tracks })
}

pub fn load_jsonl(path: impl AsRef<Path>, taxonomy: &Taxonomy) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl(file, taxonomy)
}

pub fn write_jsonl(dataset: &Dataset, taxonomy: &Taxonomy, mut writer: impl Write) -> std::io::Result<()> {
    for track in &dataset.tracks {
        let group = taxonomy.group_name(track.label.coarse);
        let species = taxonomy.species_name(track.label.fine);
        for frame in &track.frames {
            let (features, shallow, deep) = match &frame.features {
                Features::Raw(x) => (Some(x.clone()), None, None),
                Features::Split { shallow, deep } => (None, Some(shallow.clone()), Some(deep.clone())),
            };
            let record = FrameRecord {
                track_id: track.track_id.clone(),
                frame_index: frame.frame_index,
                group: group.to_string(),
                species: species.to_string(),
                features,
                shallow,
                deep,
            };
            serde_json::to_writer(&mut writer, &record)?;
            writer.write_all(b"\n")?;
        }
    }
    writer.flush()
}

pub fn save_jsonl(dataset: &Dataset, taxonomy: &Taxonomy, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_jsonl(dataset, taxonomy, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}
