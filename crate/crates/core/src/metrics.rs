//! Ground-plane detection metrics (MODA, MODP, precision, recall) and
//! tracking metrics (MOTA, MOTP, IDF1, MT, ML, IDSW).
//!
//! Everything matches by Euclidean distance on the ground plane with a closed
//! threshold: a pair at distance `d <= r` may be a true positive.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assoc::{hungarian, CostMatrix};

pub const DEFAULT_DET_RADIUS: f64 = 0.5;
pub const DEFAULT_TRACK_RADIUS: f64 = 1.0;
pub const MOSTLY_TRACKED: f64 = 0.8;
pub const MOSTLY_LOST: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("matching radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("frame {frame}: identity {id} appears more than once")]
    DuplicateId { frame: u32, id: u64 },
}

fn check_radius(r: f64) -> Result<(), MetricsError> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(MetricsError::InvalidRadius(r))
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Optimal one-frame correspondence between ground truth and predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatching {
    /// `(gt index, prediction index, distance)`
    pub pairs: Vec<(usize, usize, f64)>,
    pub fn_count: usize,
    pub fp_count: usize,
}

/// Maximum-cardinality, minimum-total-distance matching with pairs farther
/// than `r` forbidden.
pub fn match_frame(gt: &[[f64; 2]], pred: &[[f64; 2]], r: f64) -> Result<FrameMatching, MetricsError> {
    check_radius(r)?;
    let cost = CostMatrix::from_fn(gt.len(), pred.len(), |i, j| {
        let d = dist(gt[i], pred[j]);
        if d <= r {
            d
        } else {
            f64::INFINITY
        }
    });
    let a = hungarian(&cost);
    Ok(FrameMatching {
        pairs: a.matches.iter().map(|&(i, j)| (i, j, cost.get(i, j))).collect(),
        fn_count: a.unmatched_rows.len(),
        fp_count: a.unmatched_cols.len(),
    })
}

/// How MODP turns true-positive distances into a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModpMode {
    /// Mean of `1 - d/r` over true positives.
    #[default]
    Normalized,
    /// Mean true-positive distance in meters.
    MeanDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub moda: f64,
    pub modp: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub gt: usize,
}

/// Detection metrics over a sequence of `(ground truth, predictions)` frames.
pub fn detection_metrics(
    frames: &[(Vec<[f64; 2]>, Vec<[f64; 2]>)],
    r: f64,
    modp_mode: ModpMode,
) -> Result<DetectionMetrics, MetricsError> {
    check_radius(r)?;
    let (mut tp, mut fp, mut fn_, mut gt) = (0usize, 0usize, 0usize, 0usize);
    let mut modp_sum = 0.0;
    for (g, p) in frames {
        let m = match_frame(g, p, r)?;
        tp += m.pairs.len();
        fp += m.fp_count;
        fn_ += m.fn_count;
        gt += g.len();
        modp_sum += m
            .pairs
            .iter()
            .map(|&(_, _, d)| match modp_mode {
                ModpMode::Normalized => 1.0 - d / r,
                ModpMode::MeanDistance => d,
            })
            .sum::<f64>();
    }
    if gt == 0 {
        return Err(MetricsError::UndefinedMetric("sequence contains no ground-truth points".into()));
    }
    Ok(DetectionMetrics {
        moda: (gt as i64 - (fn_ + fp) as i64) as f64 / gt as f64,
        modp: if tp > 0 { modp_sum / tp as f64 } else { 0.0 },
        precision: if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 },
        recall: tp as f64 / gt as f64,
        tp,
        fp,
        fn_,
        gt,
    })
}

/// Identified ground-plane points per frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackSet {
    frames: BTreeMap<u32, Vec<(u64, [f64; 2])>>,
}

impl TrackSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, frame: u32, id: u64, pos: [f64; 2]) {
        self.frames.entry(frame).or_default().push((id, pos));
    }

    /// Registers a frame even if it has no points.
    pub fn touch(&mut self, frame: u32) {
        self.frames.entry(frame).or_default();
    }

    pub fn frame(&self, frame: u32) -> &[(u64, [f64; 2])] {
        self.frames.get(&frame).map_or(&[], Vec::as_slice)
    }

    pub fn frames(&self) -> impl Iterator<Item = u32> + '_ {
        self.frames.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> BTreeSet<u64> {
        self.frames.values().flatten().map(|(id, _)| *id).collect()
    }

    /// Same points with every id passed through `f`.
    pub fn relabeled(&self, mut f: impl FnMut(u64) -> u64) -> Self {
        Self {
            frames: self
                .frames
                .iter()
                .map(|(&k, v)| (k, v.iter().map(|&(id, p)| (f(id), p)).collect()))
                .collect(),
        }
    }

    /// Positions only, ids dropped.
    pub fn points(&self, frame: u32) -> Vec<[f64; 2]> {
        self.frame(frame).iter().map(|(_, p)| *p).collect()
    }

    fn check_unique(&self) -> Result<(), MetricsError> {
        for (&frame, pts) in &self.frames {
            let mut seen = BTreeSet::new();
            for (id, _) in pts {
                if !seen.insert(*id) {
                    return Err(MetricsError::DuplicateId { frame, id: *id });
                }
            }
        }
        Ok(())
    }
}

fn all_frames(a: &TrackSet, b: &TrackSet) -> BTreeSet<u32> {
    a.frames().chain(b.frames()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClearMot {
    pub mota: f64,
    pub motp: f64,
    pub idsw: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub gt: usize,
    /// Fraction of GT identities matched in at least 80% of their frames.
    pub mt: f64,
    /// Fraction of GT identities matched in at most 20% of their frames.
    pub ml: f64,
    pub gt_ids: usize,
}

/// CLEAR-MOT with correspondence persistence: last known `(gt, track)` pairs
/// are kept while still within `r`, the rest is matched optimally, and an
/// identity switch is counted whenever a GT identity's track changes.
pub fn clear_mot(gt: &TrackSet, pred: &TrackSet, r: f64) -> Result<ClearMot, MetricsError> {
    check_radius(r)?;
    gt.check_unique()?;
    pred.check_unique()?;
    let mut last: HashMap<u64, u64> = HashMap::new();
    let mut present: BTreeMap<u64, usize> = BTreeMap::new();
    let mut matched: BTreeMap<u64, usize> = BTreeMap::new();
    let (mut tp, mut fp, mut fn_, mut idsw, mut n_gt) = (0usize, 0usize, 0usize, 0usize, 0usize);
    let mut dist_sum = 0.0;

    for f in all_frames(gt, pred) {
        let g = gt.frame(f);
        let p = pred.frame(f);
        n_gt += g.len();
        let mut g_match: Vec<Option<usize>> = vec![None; g.len()];
        let mut p_used = vec![false; p.len()];

        for (gi, (gid, gpos)) in g.iter().enumerate() {
            *present.entry(*gid).or_default() += 1;
            let Some(&tid) = last.get(gid) else { continue };
            if let Some(pi) = p.iter().position(|(pid, _)| *pid == tid) {
                if !p_used[pi] && dist(*gpos, p[pi].1) <= r {
                    g_match[gi] = Some(pi);
                    p_used[pi] = true;
                }
            }
        }

        let free_g: Vec<usize> = (0..g.len()).filter(|&i| g_match[i].is_none()).collect();
        let free_p: Vec<usize> = (0..p.len()).filter(|&j| !p_used[j]).collect();
        let pos_g: Vec<[f64; 2]> = free_g.iter().map(|&i| g[i].1).collect();
        let pos_p: Vec<[f64; 2]> = free_p.iter().map(|&j| p[j].1).collect();
        for (i, j, _) in match_frame(&pos_g, &pos_p, r)?.pairs {
            let (gi, pi) = (free_g[i], free_p[j]);
            if last.get(&g[gi].0).is_some_and(|&prev| prev != p[pi].0) {
                idsw += 1;
            }
            g_match[gi] = Some(pi);
            p_used[pi] = true;
        }

        for (gi, m) in g_match.iter().enumerate() {
            match m {
                Some(pi) => {
                    tp += 1;
                    dist_sum += dist(g[gi].1, p[*pi].1);
                    last.insert(g[gi].0, p[*pi].0);
                    *matched.entry(g[gi].0).or_default() += 1;
                }
                None => fn_ += 1,
            }
        }
        fp += p_used.iter().filter(|u| !**u).count();
    }

    if n_gt == 0 {
        return Err(MetricsError::UndefinedMetric("sequence contains no ground-truth points".into()));
    }
    let ids = present.len();
    let ratio = |id: &u64, n: &usize| matched.get(id).copied().unwrap_or(0) as f64 / *n as f64;
    let mt = present.iter().filter(|(id, n)| ratio(id, n) >= MOSTLY_TRACKED).count();
    let ml = present.iter().filter(|(id, n)| ratio(id, n) <= MOSTLY_LOST).count();
    Ok(ClearMot {
        mota: (n_gt as i64 - (fn_ + fp + idsw) as i64) as f64 / n_gt as f64,
        motp: if tp > 0 { 1.0 - dist_sum / (tp as f64 * r) } else { 0.0 },
        idsw,
        tp,
        fp,
        fn_,
        gt: n_gt,
        mt: mt as f64 / ids as f64,
        ml: ml as f64 / ids as f64,
        gt_ids: ids,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Idf1 {
    pub idf1: f64,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

/// Per `(gt id, pred id)`: number of frames where both exist within `r`.
pub fn identity_overlap(gt: &TrackSet, pred: &TrackSet, r: f64) -> (Vec<u64>, Vec<u64>, Vec<Vec<usize>>) {
    let gt_ids: Vec<u64> = gt.ids().into_iter().collect();
    let pred_ids: Vec<u64> = pred.ids().into_iter().collect();
    let gi: HashMap<u64, usize> = gt_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let pi: HashMap<u64, usize> = pred_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut overlap = vec![vec![0usize; pred_ids.len()]; gt_ids.len()];
    for f in all_frames(gt, pred) {
        for (g, gp) in gt.frame(f) {
            for (p, pp) in pred.frame(f) {
                if dist(*gp, *pp) <= r {
                    overlap[gi[g]][pi[p]] += 1;
                }
            }
        }
    }
    (gt_ids, pred_ids, overlap)
}

/// Identity F1 under the globally optimal one-to-one identity pairing.
pub fn idf1(gt: &TrackSet, pred: &TrackSet, r: f64) -> Result<Idf1, MetricsError> {
    check_radius(r)?;
    gt.check_unique()?;
    pred.check_unique()?;
    let n_gt = gt.len();
    if n_gt == 0 {
        return Err(MetricsError::UndefinedMetric("sequence contains no ground-truth points".into()));
    }
    let n_pred = pred.len();
    let (g_ids, p_ids, overlap) = identity_overlap(gt, pred, r);
    let cost = CostMatrix::from_fn(g_ids.len(), p_ids.len(), |i, j| -(overlap[i][j] as f64));
    let idtp: usize = hungarian(&cost).matches.iter().map(|&(i, j)| overlap[i][j]).sum();
    Ok(Idf1 {
        idf1: 2.0 * idtp as f64 / (n_gt + n_pred) as f64,
        idtp,
        idfp: n_pred - idtp,
        idfn: n_gt - idtp,
    })
}

/// Everything reported for one evaluated run. Ratios are fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub moda: f64,
    pub modp: f64,
    pub precision: f64,
    pub recall: f64,
    pub mota: f64,
    pub motp: f64,
    pub idf1: f64,
    pub idsw: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub gt_count: usize,
    pub mt: f64,
    pub ml: f64,
    pub det_r: f64,
    pub track_r: f64,
}

impl MetricsReport {
    pub const TSV_HEADER: &'static str = "MODA\tMODP\tPrec\tRecall\tMOTA\tMOTP\tIDF1\tMT\tML\tIDSW";

    /// One line of percentages with one decimal, counts as integers.
    pub fn to_tsv(&self) -> String {
        let pct = |v: f64| format!("{:.1}", 100.0 * v);
        [
            pct(self.moda),
            pct(self.modp),
            pct(self.precision),
            pct(self.recall),
            pct(self.mota),
            pct(self.motp),
            pct(self.idf1),
            pct(self.mt),
            pct(self.ml),
            self.idsw.to_string(),
        ]
        .join("\t")
    }
}

/// Full evaluation. `detections` are the per-frame points scored with the
/// detection metrics; when absent the track positions are used.
pub fn evaluate(
    gt: &TrackSet,
    tracks: &TrackSet,
    detections: Option<&BTreeMap<u32, Vec<[f64; 2]>>>,
    det_r: f64,
    track_r: f64,
    modp_mode: ModpMode,
) -> Result<MetricsReport, MetricsError> {
    let mut frames: BTreeSet<u32> = all_frames(gt, tracks);
    if let Some(d) = detections {
        frames.extend(d.keys().copied());
    }
    let det_frames: Vec<(Vec<[f64; 2]>, Vec<[f64; 2]>)> = frames
        .iter()
        .map(|&f| {
            let pred = match detections {
                Some(d) => d.get(&f).cloned().unwrap_or_default(),
                None => tracks.points(f),
            };
            (gt.points(f), pred)
        })
        .collect();
    let det = detection_metrics(&det_frames, det_r, modp_mode)?;
    let mot = clear_mot(gt, tracks, track_r)?;
    let id = idf1(gt, tracks, track_r)?;
    Ok(MetricsReport {
        moda: det.moda,
        modp: det.modp,
        precision: det.precision,
        recall: det.recall,
        mota: mot.mota,
        motp: mot.motp,
        idf1: id.idf1,
        idsw: mot.idsw,
        fp: mot.fp,
        fn_: mot.fn_,
        gt_count: mot.gt,
        mt: mot.mt,
        ml: mot.ml,
        det_r,
        track_r,
    })
}
