//! Image- and track-level prediction.
//!
//! Three inference units are supported:
//!
//! * `image`: each frame on its own.
//! * `video_avg`: per-frame scores averaged over the track, then argmax.
//! * `video_vote`: per-frame argmax, majority vote over the track; the reported
//!   confidence is the mean score of the winning label over the frames that voted
//!   for it.
//!
//! A prediction whose species confidence falls below a threshold `τ` is demoted to
//! its coarse (group) prediction.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{argmax, Features, HeadOutputs, ModelParams};
use crate::taxonomy::Taxonomy;
use crate::training::Scheme;

/// Confidence margin of the "stop everything" threshold candidate above 1.
pub const STOP_ALL_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Image,
    VideoAvg,
    VideoVote,
}

impl Unit {
    pub const ALL: [Unit; 3] = [Unit::Image, Unit::VideoVote, Unit::VideoAvg];

    pub fn name(self) -> &'static str {
        match self {
            Unit::Image => "image",
            Unit::VideoAvg => "video_avg",
            Unit::VideoVote => "video_vote",
        }
    }

    /// Short label used in results tables: `img`, `video*` (vote), `video` (average).
    pub fn table_label(self) -> &'static str {
        match self {
            Unit::Image => "img",
            Unit::VideoVote => "video*",
            Unit::VideoAvg => "video",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Coarse,
    Fine,
}

/// A selected label with its confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    pub index: usize,
    pub confidence: f64,
}

impl Choice {
    fn argmax_of(scores: &[f64]) -> Self {
        let index = argmax(scores);
        Self {
            index,
            confidence: scores[index],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub level: Level,
    /// Group index for coarse predictions, global species index for fine ones.
    pub label: usize,
    pub confidence: f64,
    pub unit: Unit,
}

/// Selections made from one set of head outputs (an image, or an aggregated track).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Coarse argmax.
    pub coarse: Choice,
    /// Best species of the coarse-argmax group, confidence = within-group score.
    pub level2a: Choice,
    /// Best species by product score, confidence = product score.
    pub level2b: Choice,
}

/// Per-frame head outputs of one track, in frame order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackScores {
    frames: Vec<HeadOutputs>,
}

impl TrackScores {
    pub fn new(frames: Vec<HeadOutputs>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptyTrack);
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[HeadOutputs] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Runs the hierarchical heads over every frame of a track.
pub fn score_track(params: &ModelParams, frames: &[Features]) -> Result<TrackScores> {
    TrackScores::new(frames.iter().map(|f| params.forward(f)).collect::<Result<_>>()?)
}

/// Runs the flat head over every frame of a track.
pub fn score_track_flat(params: &ModelParams, frames: &[Features]) -> Result<Vec<Vec<f64>>> {
    if frames.is_empty() {
        return Err(Error::EmptyTrack);
    }
    frames.iter().map(|f| params.forward_flat(f)).collect()
}

/// Image-level selections.
pub fn select_image(outputs: &HeadOutputs) -> Selection {
    let coarse = Choice::argmax_of(&outputs.coarse);
    let local = Choice::argmax_of(&outputs.fine_local[coarse.index]);
    let offset: usize = outputs.fine_local[..coarse.index].iter().map(Vec::len).sum();
    Selection {
        coarse,
        level2a: Choice {
            index: offset + local.index,
            confidence: local.confidence,
        },
        level2b: Choice::argmax_of(&outputs.joint),
    }
}

/// Element-wise mean of equally long score vectors.
pub fn mean_scores<'a>(vectors: impl IntoIterator<Item = &'a [f64]>) -> Result<Vec<f64>> {
    let mut iter = vectors.into_iter();
    let first = iter.next().ok_or(Error::EmptyTrack)?;
    let mut sum = first.to_vec();
    let mut count = 1usize;
    for v in iter {
        if v.len() != sum.len() {
            return Err(Error::ShapeMismatch("score vectors differ in length".into()));
        }
        sum.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        count += 1;
    }
    let t = count as f64;
    sum.iter_mut().for_each(|a| *a /= t);
    Ok(sum)
}

/// Majority vote over per-frame `(label, confidence)` ballots.
///
/// Ties on vote count go to the label with the higher mean confidence over its
/// own ballots, then to the lowest label. The returned confidence is that mean.
pub fn majority_vote(ballots: &[(usize, f64)]) -> Result<Choice> {
    if ballots.is_empty() {
        return Err(Error::EmptyTrack);
    }
    let labels = ballots.iter().map(|b| b.0).max().unwrap_or(0) + 1;
    let mut counts = vec![0usize; labels];
    let mut sums = vec![0.0f64; labels];
    for &(label, conf) in ballots {
        counts[label] += 1;
        sums[label] += conf;
    }
    let mut best: Option<(usize, usize, f64)> = None;
    for label in 0..labels {
        if counts[label] == 0 {
            continue;
        }
        let mean = sums[label] / counts[label] as f64;
        let better = match best {
            None => true,
            Some((_, n, m)) => counts[label] > n || (counts[label] == n && mean > m),
        };
        if better {
            best = Some((label, counts[label], mean));
        }
    }
    let (index, _, confidence) = best.expect("at least one ballot");
    Ok(Choice { index, confidence })
}

/// Track-level averages and the selections made from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvgAggregate {
    /// Mean coarse scores.
    pub p1: Vec<f64>,
    /// Mean product scores.
    pub p2: Vec<f64>,
    pub selection: Selection,
}

/// Averages per-frame scores over a track.
///
/// Level-2B takes the argmax of the averaged product scores. Level-2A takes the
/// averaged-coarse argmax group, then the argmax of that group's averaged
/// within-group scores.
pub fn aggregate_avg(track: &TrackScores) -> Result<AvgAggregate> {
    let frames = track.frames();
    let p1 = mean_scores(frames.iter().map(|f| f.coarse.as_slice()))?;
    let p2 = mean_scores(frames.iter().map(|f| f.joint.as_slice()))?;
    let coarse = Choice::argmax_of(&p1);
    let fine_avg = mean_scores(frames.iter().map(|f| f.fine_local[coarse.index].as_slice()))?;
    let local = Choice::argmax_of(&fine_avg);
    let offset: usize = frames[0].fine_local[..coarse.index].iter().map(Vec::len).sum();
    let selection = Selection {
        coarse,
        level2a: Choice {
            index: offset + local.index,
            confidence: local.confidence,
        },
        level2b: Choice::argmax_of(&p2),
    };
    Ok(AvgAggregate { p1, p2, selection })
}

/// Majority-vote selections over a track.
///
/// Level-2B votes on per-frame product-score argmaxes; Level-1 votes on per-frame
/// coarse argmaxes; Level-2A votes, within the coarse-vote winner's group, on
/// per-frame argmaxes of that group's within-group scores.
pub fn aggregate_vote(track: &TrackScores) -> Result<Selection> {
    let frames = track.frames();
    let ballots = |scores: &dyn Fn(&HeadOutputs) -> &[f64]| -> Vec<(usize, f64)> {
        frames
            .iter()
            .map(|f| {
                let c = Choice::argmax_of(scores(f));
                (c.index, c.confidence)
            })
            .collect()
    };
    let level2b = majority_vote(&ballots(&|f| &f.joint))?;
    let coarse = majority_vote(&ballots(&|f| &f.coarse))?;
    let g = coarse.index;
    let local = majority_vote(&ballots(&|f| &f.fine_local[g]))?;
    let offset: usize = frames[0].fine_local[..g].iter().map(Vec::len).sum();
    Ok(Selection {
        coarse,
        level2a: Choice {
            index: offset + local.index,
            confidence: local.confidence,
        },
        level2b,
    })
}

/// Selections for one unit from a track's per-frame scores; for `Image` the
/// result holds one selection per frame.
pub fn select_unit(track: &TrackScores, unit: Unit) -> Result<Vec<Selection>> {
    Ok(match unit {
        Unit::Image => track.frames().iter().map(select_image).collect(),
        Unit::VideoAvg => vec![aggregate_avg(track)?.selection],
        Unit::VideoVote => vec![aggregate_vote(track)?],
    })
}

/// Flat-baseline species choices for one unit.
pub fn select_unit_flat(frames: &[Vec<f64>], unit: Unit) -> Result<Vec<Choice>> {
    if frames.is_empty() {
        return Err(Error::EmptyTrack);
    }
    Ok(match unit {
        Unit::Image => frames.iter().map(|f| Choice::argmax_of(f)).collect(),
        Unit::VideoAvg => vec![Choice::argmax_of(&mean_scores(frames.iter().map(Vec::as_slice))?)],
        Unit::VideoVote => {
            let ballots: Vec<(usize, f64)> = frames
                .iter()
                .map(|f| {
                    let c = Choice::argmax_of(f);
                    (c.index, c.confidence)
                })
                .collect();
            vec![majority_vote(&ballots)?]
        }
    })
}

fn check_threshold(tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::InvalidThreshold(tau));
    }
    Ok(())
}

/// Fine prediction if its confidence reaches `tau`, otherwise the coarse one.
pub fn decide(fine: Choice, coarse: Choice, tau: f64, unit: Unit) -> Result<Prediction> {
    check_threshold(tau)?;
    if !(0.0..=1.0).contains(&fine.confidence) {
        return Err(Error::InvalidConfig(format!(
            "confidence {} outside [0, 1]",
            fine.confidence
        )));
    }
    Ok(if fine.confidence < tau {
        Prediction {
            level: Level::Coarse,
            label: coarse.index,
            confidence: coarse.confidence,
            unit,
        }
    } else {
        Prediction {
            level: Level::Fine,
            label: fine.index,
            confidence: fine.confidence,
            unit,
        }
    })
}

/// Level-2C prediction from a selection.
pub fn decide_selection(selection: &Selection, tau: f64, unit: Unit) -> Result<Prediction> {
    decide(selection.level2b, selection.coarse, tau, unit)
}

/// One evaluation unit's inputs to the threshold search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub confidence: f64,
    pub fine_correct: bool,
    pub coarse_correct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSearch {
    pub tau: f64,
    pub correct: usize,
    pub stops: usize,
    pub proceeds: usize,
}

/// Greedy scan over candidate thresholds.
///
/// Candidates are 0, every unit's confidence, and `1 + ε`. Returns the smallest
/// candidate maximizing the number of correct Level-2C decisions, which is also
/// the maximizer sending the most units to the fine level.
pub fn search_threshold_rows(rows: &[ThresholdRow]) -> Result<ThresholdSearch> {
    if rows.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    let mut candidates: Vec<f64> = rows.iter().map(|r| r.confidence).collect();
    candidates.push(0.0);
    candidates.push(1.0 + STOP_ALL_EPSILON);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    // Sweep candidates in ascending order with units sorted by confidence: units
    // with confidence < tau stop at the coarse level.
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[a].confidence.total_cmp(&rows[b].confidence));
    let mut correct = rows.iter().filter(|r| r.fine_correct).count();
    let mut stopped = 0;
    let mut best = ThresholdSearch {
        tau: 0.0,
        correct: 0,
        stops: 0,
        proceeds: 0,
    };
    let mut have_best = false;
    for &tau in &candidates {
        while stopped < order.len() && rows[order[stopped]].confidence < tau {
            let r = rows[order[stopped]];
            correct = correct + usize::from(r.coarse_correct) - usize::from(r.fine_correct);
            stopped += 1;
        }
        if !have_best || correct > best.correct {
            best = ThresholdSearch {
                tau,
                correct,
                stops: stopped,
                proceeds: rows.len() - stopped,
            };
            have_best = true;
        }
    }
    Ok(best)
}

/// Threshold rows for the averaged-track unit.
pub fn threshold_rows(tracks: &[(TrackScores, usize)], taxonomy: &Taxonomy) -> Result<Vec<ThresholdRow>> {
    tracks
        .iter()
        .map(|(scores, species)| {
            let sel = aggregate_avg(scores)?.selection;
            Ok(ThresholdRow {
                confidence: sel.level2b.confidence,
                fine_correct: sel.level2b.index == *species,
                coarse_correct: sel.coarse.index == taxonomy.group_of(*species),
            })
        })
        .collect()
}

/// Searches one threshold for a trained model on a set of labelled tracks,
/// using the averaged-track unit. The flat baseline has no coarse level and
/// always gets `τ = 0`.
pub fn search_threshold<'a>(
    params: &ModelParams,
    tracks: impl IntoIterator<Item = (&'a [Features], usize)>,
    taxonomy: &Taxonomy,
    scheme: Scheme,
) -> Result<ThresholdSearch> {
    params.check_taxonomy(taxonomy)?;
    let scored: Vec<(TrackScores, usize)> = tracks
        .into_iter()
        .map(|(frames, species)| Ok((score_track(params, frames)?, species)))
        .collect::<Result<_>>()?;
    if scored.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    if !scheme.is_hierarchical() {
        return Ok(ThresholdSearch {
            tau: 0.0,
            correct: 0,
            stops: 0,
            proceeds: scored.len(),
        });
    }
    search_threshold_rows(&threshold_rows(&scored, taxonomy)?)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn outputs(coarse: &[f64], fine: &[&[f64]]) -> HeadOutputs {
        HeadOutputs::from_parts(coarse.to_vec(), fine.iter().map(|f| f.to_vec()).collect()).unwrap()
    }

    fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0f64).powi(3) + 1e-6).collect();
        let z: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / z).collect()
    }

    fn random_outputs(rng: &mut ChaCha8Rng, sizes: &[usize]) -> HeadOutputs {
        let coarse = random_simplex(rng, sizes.len());
        let fine = sizes.iter().map(|&n| random_simplex(rng, n)).collect();
        HeadOutputs::from_parts(coarse, fine).unwrap()
    }

    #[test]
    fn level2a_and_level2b_can_diverge() {
        let out = outputs(&[0.4, 0.6], &[&[1.0], &[0.5, 0.5]]);
        assert_eq!(out.joint, vec![0.4, 0.3, 0.3]);
        let sel = select_image(&out);
        assert_eq!(sel.coarse.index, 1);
        assert_eq!(sel.level2a.index, 1);
        assert_eq!(sel.level2b.index, 0);
    }

    #[test]
    fn confident_one_hot() {
        let out = outputs(&[1.0, 0.0], &[&[0.0, 1.0], &[1.0]]);
        let sel = select_image(&out);
        assert_eq!(sel.level2a.index, 1);
        assert_eq!(sel.level2b.index, 1);
        assert_eq!(sel.level2b.confidence, 1.0);
    }

    #[test]
    fn uniform_ties_pick_index_zero() {
        let out = outputs(&[0.5, 0.5], &[&[0.5, 0.5], &[0.5, 0.5]]);
        let sel = select_image(&out);
        assert_eq!((sel.coarse.index, sel.level2a.index, sel.level2b.index), (0, 0, 0));
    }

    #[test]
    fn average_of_two_frames() {
        let a = outputs(&[1.0], &[&[0.6, 0.4]]);
        let b = outputs(&[1.0], &[&[0.2, 0.8]]);
        let agg = aggregate_avg(&TrackScores::new(vec![a, b]).unwrap()).unwrap();
        assert!((agg.p2[0] - 0.4).abs() < 1e-15 && (agg.p2[1] - 0.6).abs() < 1e-15);
        assert_eq!(agg.selection.level2b.index, 1);
    }

    #[test]
    fn average_matches_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sizes = [2, 3, 4];
        let frames: Vec<HeadOutputs> = (0..10).map(|_| random_outputs(&mut rng, &sizes)).collect();
        let agg = aggregate_avg(&TrackScores::new(frames.clone()).unwrap()).unwrap();
        for s in 0..9 {
            let mut acc = 0.0;
            for f in &frames {
                acc += f.joint[s];
            }
            assert!((agg.p2[s] - acc / 10.0).abs() <= 1e-12);
        }
        for g in 0..3 {
            let acc: f64 = frames.iter().map(|f| f.coarse[g]).sum();
            assert!((agg.p1[g] - acc / 10.0).abs() <= 1e-12);
        }
        assert!((agg.p1.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert!((agg.p2.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn vote_example() {
        // argmaxes A, A, B with joint[A] = 0.9 and 0.7 on the A frames
        let f1 = outputs(&[1.0], &[&[0.9, 0.1]]);
        let f2 = outputs(&[1.0], &[&[0.7, 0.3]]);
        let f3 = outputs(&[1.0], &[&[0.2, 0.8]]);
        let sel = aggregate_vote(&TrackScores::new(vec![f1, f2, f3]).unwrap()).unwrap();
        assert_eq!(sel.level2b.index, 0);
        assert!((sel.level2b.confidence - 0.8).abs() < 1e-15);
    }

    #[test]
    fn vote_tie_breaks() {
        // one vote each: higher mean confidence wins
        assert_eq!(majority_vote(&[(0, 0.5), (1, 0.6)]).unwrap().index, 1);
        // equal confidence: lowest index
        assert_eq!(majority_vote(&[(2, 0.5), (1, 0.5)]).unwrap().index, 1);
        // count beats confidence
        assert_eq!(majority_vote(&[(0, 0.4), (0, 0.4), (1, 0.99)]).unwrap().index, 0);
        assert!(matches!(majority_vote(&[]), Err(Error::EmptyTrack)));
    }

    #[test]
    fn unanimous_vote_matches_average_restricted() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base = random_outputs(&mut rng, &[3, 2]);
        let winner = argmax(&base.joint);
        // perturb slightly so every frame keeps the same argmax
        let frames: Vec<HeadOutputs> = (0..5)
            .map(|k| {
                let mut c = base.coarse.clone();
                c[0] += 1e-4 * k as f64;
                let z: f64 = c.iter().sum();
                c.iter_mut().for_each(|v| *v /= z);
                HeadOutputs::from_parts(c, base.fine_local.clone()).unwrap()
            })
            .collect();
        assert!(frames.iter().all(|f| argmax(&f.joint) == winner));
        let track = TrackScores::new(frames).unwrap();
        let vote = aggregate_vote(&track).unwrap();
        let avg = aggregate_avg(&track).unwrap();
        assert_eq!(vote.level2b.index, winner);
        assert!((vote.level2b.confidence - avg.p2[winner]).abs() <= 1e-15);
    }

    #[test]
    fn empty_tracks_rejected() {
        assert!(matches!(TrackScores::new(vec![]), Err(Error::EmptyTrack)));
        assert!(matches!(select_unit_flat(&[], Unit::Image), Err(Error::EmptyTrack)));
    }

    #[test]
    fn decide_rule() {
        let coarse = Choice {
            index: 2,
            confidence: 0.9,
        };
        let fine = Choice {
            index: 7,
            confidence: 0.3,
        };
        let p = decide(fine, coarse, 0.5, Unit::Image).unwrap();
        assert_eq!((p.level, p.label, p.confidence), (Level::Coarse, 2, 0.9));
        let p = decide(fine, coarse, 0.0, Unit::Image).unwrap();
        assert_eq!((p.level, p.label), (Level::Fine, 7));
        let p = decide(fine, coarse, 0.3, Unit::Image).unwrap();
        assert_eq!(p.level, Level::Fine);
        let certain = Choice {
            index: 7,
            confidence: 1.0,
        };
        let p = decide(certain, coarse, 1.0 + STOP_ALL_EPSILON, Unit::VideoAvg).unwrap();
        assert_eq!(p.level, Level::Coarse);
        assert!(matches!(
            decide(fine, coarse, -0.1, Unit::Image),
            Err(Error::InvalidThreshold(_))
        ));
        assert!(matches!(
            decide(fine, coarse, f64::NAN, Unit::Image),
            Err(Error::InvalidThreshold(_))
        ));
    }

    fn row(confidence: f64, fine_correct: bool, coarse_correct: bool) -> ThresholdRow {
        ThresholdRow {
            confidence,
            fine_correct,
            coarse_correct,
        }
    }

    #[test]
    fn search_all_fine_correct_gives_zero() {
        let rows = vec![row(0.3, true, true), row(0.9, true, true), row(0.5, true, false)];
        let s = search_threshold_rows(&rows).unwrap();
        assert_eq!(s.tau, 0.0);
        assert_eq!((s.correct, s.stops, s.proceeds), (3, 0, 3));
    }

    #[test]
    fn search_all_fine_wrong_stops_everything() {
        let rows = vec![row(0.3, false, true), row(1.0, false, true), row(0.5, false, true)];
        let s = search_threshold_rows(&rows).unwrap();
        assert_eq!(s.tau, 1.0 + STOP_ALL_EPSILON);
        assert_eq!((s.correct, s.stops, s.proceeds), (3, 3, 0));
        assert!(matches!(search_threshold_rows(&[]), Err(Error::EmptyEvalSet)));
    }

    /// Exhaustive scan: evaluates every candidate directly.
    fn scan_oracle(rows: &[ThresholdRow]) -> (f64, usize, usize) {
        let mut cands = vec![0.0, 1.0 + STOP_ALL_EPSILON];
        cands.extend(rows.iter().map(|r| r.confidence));
        let mut best: Option<(f64, usize, usize)> = None;
        for &tau in &cands {
            let mut correct = 0;
            let mut proceeds = 0;
            for r in rows {
                if r.confidence < tau {
                    correct += r.coarse_correct as usize;
                } else {
                    correct += r.fine_correct as usize;
                    proceeds += 1;
                }
            }
            best = match best {
                Some((bt, bc, bp)) if bc > correct || (bc == correct && bt <= tau) => Some((bt, bc, bp)),
                _ => Some((tau, correct, proceeds)),
            };
        }
        best.unwrap()
    }

    #[test]
    fn search_matches_exhaustive_scan_on_seeded_toys() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..200 {
            let rows: Vec<ThresholdRow> = (0..20)
                .map(|_| {
                    let confidence = (rng.random_range(0..20) as f64) / 19.0;
                    let coarse_correct = rng.random_bool(0.8);
                    let fine_correct = coarse_correct && rng.random_bool(confidence.max(0.05));
                    row(confidence, fine_correct, coarse_correct)
                })
                .collect();
            let s = search_threshold_rows(&rows).unwrap();
            let (tau, correct, proceeds) = scan_oracle(&rows);
            assert_eq!(s.tau, tau);
            assert_eq!(s.correct, correct);
            assert_eq!(s.proceeds, proceeds);
            let baseline = rows.iter().filter(|r| r.fine_correct).count();
            assert!(s.correct >= baseline);
        }
    }

    proptest! {
        #[test]
        fn single_frame_units_coincide(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = random_outputs(&mut rng, &[2, 1, 3]);
            let track = TrackScores::new(vec![out.clone()]).unwrap();
            let img = select_image(&out);
            let avg = aggregate_avg(&track).unwrap();
            let vote = aggregate_vote(&track).unwrap();
            prop_assert_eq!(avg.selection, img);
            prop_assert_eq!(vote, img);
            prop_assert_eq!(&avg.p1, &out.coarse);
            prop_assert_eq!(&avg.p2, &out.joint);
        }

        #[test]
        fn vote_ignores_frame_order(seed in any::<u64>(), t in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut frames: Vec<HeadOutputs> = (0..t).map(|_| random_outputs(&mut rng, &[2, 3])).collect();
            let a = aggregate_vote(&TrackScores::new(frames.clone()).unwrap()).unwrap();
            frames.reverse();
            frames.rotate_left(t / 2);
            let b = aggregate_vote(&TrackScores::new(frames).unwrap()).unwrap();
            prop_assert_eq!(a.level2b.index, b.level2b.index);
            prop_assert_eq!(a.coarse.index, b.coarse.index);
            prop_assert_eq!(a.level2a.index, b.level2a.index);
            prop_assert!((a.level2b.confidence - b.level2b.confidence).abs() <= 1e-12);
        }

        #[test]
        fn decide_extremes(c in 0.0f64..=1.0, tau_hi in 1.0f64..2.0) {
            let fine = Choice { index: 1, confidence: c };
            let coarse = Choice { index: 0, confidence: 0.5 };
            prop_assert_eq!(decide(fine, coarse, 0.0, Unit::Image).unwrap().level, Level::Fine);
            let tau = tau_hi + STOP_ALL_EPSILON;
            prop_assert_eq!(decide(fine, coarse, tau, Unit::Image).unwrap().level, Level::Coarse);
        }
    }
}
