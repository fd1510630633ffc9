use super::{associate_frame, norm_of, KalmanFilter, KalmanState, TrackError, TrackerConfig};
use crate::sim::DetectionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Active,
    Removed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    pub track_id: u64,
    pub state: KalmanState,
    /// EMA-smoothed unit embedding.
    pub embedding: Vec<f64>,
    pub time_since_update: u32,
    pub hits: u32,
    pub status: TrackStatus,
}

/// One output line: a tracklet's posterior position at a frame where it matched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRow {
    pub frame: u32,
    pub track_id: u64,
    pub x: f64,
    pub y: f64,
    pub score: f64,
}

/// Sequential online tracker. Feed frames in strictly increasing order.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    kf: KalmanFilter,
    active: Vec<Tracklet>,
    removed: Vec<Tracklet>,
    next_id: u64,
    last_frame: Option<u32>,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self, TrackError> {
        config.validate()?;
        Ok(Self {
            kf: KalmanFilter::new(config.kalman),
            config,
            active: Vec::new(),
            removed: Vec::new(),
            next_id: 1,
            last_frame: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn tracklets(&self) -> &[Tracklet] {
        &self.active
    }

    pub fn removed(&self) -> &[Tracklet] {
        &self.removed
    }

    /// Processes one frame. Frames skipped since the previous call are
    /// treated as frames without detections.
    pub fn step(&mut self, frame: u32, detections: &[DetectionRecord]) -> Result<Vec<TrackRow>, TrackError> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(TrackError::Sequencing { frame, last });
            }
            for _ in last + 1..frame {
                self.advance(&[])?;
            }
        }
        if let Some(d) = detections.iter().find(|d| d.frame != frame) {
            return Err(TrackError::Sequencing { frame: d.frame, last: frame });
        }
        self.last_frame = Some(frame);
        let kept: Vec<&DetectionRecord> = detections.iter().filter(|d| d.score > self.config.det_threshold).collect();
        let matched = self.advance(&kept)?;
        Ok(matched
            .into_iter()
            .map(|(ti, score)| {
                let t = &self.active[ti];
                let [x, y] = t.state.position();
                TrackRow {
                    frame,
                    track_id: t.track_id,
                    x,
                    y,
                    score,
                }
            })
            .collect())
    }

    /// Predict, associate, update. Returns `(active index, detection score)`
    /// for every tracklet to report this frame, in active order.
    fn advance(&mut self, detections: &[&DetectionRecord]) -> Result<Vec<(usize, f64)>, TrackError> {
        for t in &mut self.active {
            t.state = self.kf.predict(&t.state);
        }
        let owned: Vec<DetectionRecord> = detections.iter().map(|d| (*d).clone()).collect();
        let (stage1, stage2) = associate_frame(&self.active, &owned, &self.config)?;

        let mut matched_score = vec![None; self.active.len()];
        for &(ti, di) in stage1.matches.iter().chain(&stage2.matches) {
            let det = &owned[di];
            let alpha = self.config.ema_alpha;
            let t = &mut self.active[ti];
            t.state = self.kf.update(&t.state, [det.x, det.y])?;
            t.embedding = ema(&t.embedding, &det.embedding, alpha)?;
            t.time_since_update = 0;
            t.hits += 1;
            matched_score[ti] = Some(det.score);
        }
        for &ti in &stage2.unmatched_rows {
            self.active[ti].time_since_update += 1;
        }

        let mut report: Vec<(usize, f64)> = Vec::new();
        let mut survivors = Vec::with_capacity(self.active.len() + stage2.unmatched_cols.len());
        for (t, score) in std::mem::take(&mut self.active).into_iter().zip(matched_score) {
            if t.time_since_update > self.config.max_age {
                self.removed.push(Tracklet {
                    status: TrackStatus::Removed,
                    ..t
                });
                continue;
            }
            if let Some(score) = score {
                if t.hits >= self.config.min_hits {
                    report.push((survivors.len(), score));
                }
            }
            survivors.push(t);
        }
        for &di in &stage2.unmatched_cols {
            let det = &owned[di];
            let n = norm_of(&det.embedding);
            if !(n > 0.0 && n.is_finite()) {
                return Err(TrackError::InvalidEmbedding("zero or non-finite detection embedding".into()));
            }
            let t = Tracklet {
                track_id: self.next_id,
                state: self.kf.initiate([det.x, det.y]),
                embedding: det.embedding.iter().map(|v| v / n).collect(),
                time_since_update: 0,
                hits: 1,
                status: TrackStatus::Active,
            };
            self.next_id += 1;
            if t.hits >= self.config.min_hits {
                report.push((survivors.len(), det.score));
            }
            survivors.push(t);
        }
        self.active = survivors;
        Ok(report)
    }
}

/// `normalize(α·e + (1-α)·f)`
fn ema(current: &[f64], observed: &[f64], alpha: f64) -> Result<Vec<f64>, TrackError> {
    let mixed: Vec<f64> = current
        .iter()
        .zip(observed)
        .map(|(e, f)| alpha * e + (1.0 - alpha) * f)
        .collect();
    let n = norm_of(&mixed);
    if !(n > 0.0 && n.is_finite()) {
        return Err(TrackError::InvalidEmbedding("embedding average collapsed to zero".into()));
    }
    Ok(mixed.into_iter().map(|v| v / n).collect())
}
