//! Online association: Kalman prediction, Mahalanobis gating, cosine ReID
//! distance, fused cost and two-stage Hungarian matching.

mod hungarian;
mod kalman;
mod tracker;

pub use hungarian::{hungarian, Assignment, CostMatrix};
pub use kalman::{mahalanobis_sq, KalmanFilter, KalmanNoise, KalmanState};
pub use tracker::{TrackRow, TrackStatus, Tracker, Tracklet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::DetectionRecord;

/// 95% quantile of the chi-square distribution with 2 degrees of freedom.
pub const CHI2_95_2DOF: f64 = 5.9915;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("frame {frame} presented after frame {last}; frames must strictly increase")]
    Sequencing { frame: u32, last: u32 },
    #[error("invalid tracker config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Weight of the appearance term in the fused cost.
    pub lambda: f64,
    /// Stage-1 threshold on the fused cost.
    pub tau1: f64,
    /// Stage-2 threshold on center distance, meters.
    pub tau2: f64,
    /// Frames an unmatched tracklet survives.
    pub max_age: u32,
    /// Detections scoring at or below this are dropped.
    pub det_threshold: f64,
    /// Squared-Mahalanobis gate.
    pub gate_threshold: f64,
    /// Embedding momentum.
    pub ema_alpha: f64,
    /// Matched frames before a tracklet is reported.
    pub min_hits: u32,
    pub kalman: KalmanNoise,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            lambda: 0.98,
            tau1: 0.4,
            tau2: 2.5,
            max_age: 10,
            det_threshold: 0.4,
            gate_threshold: CHI2_95_2DOF,
            ema_alpha: 0.9,
            min_hits: 1,
            kalman: KalmanNoise::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackError> {
        let bad = |m: String| Err(TrackError::Config(m));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must be in [0, 1], got {}", self.lambda));
        }
        for (name, v) in [("tau1", self.tau1), ("tau2", self.tau2), ("gate_threshold", self.gate_threshold)] {
            if !(v > 0.0) || v.is_nan() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.det_threshold) {
            return bad(format!("det_threshold must be in [0, 1], got {}", self.det_threshold));
        }
        if !(0.0..=1.0).contains(&self.ema_alpha) {
            return bad(format!("ema_alpha must be in [0, 1], got {}", self.ema_alpha));
        }
        self.kalman.validate().map_err(TrackError::Config)
    }
}

/// `1 - a·b / (‖a‖‖b‖)`, in `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64, TrackError> {
    if a.len() != b.len() {
        return Err(TrackError::InvalidEmbedding(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let na = norm_of(a);
    let nb = norm_of(b);
    if !(na > 0.0 && nb > 0.0) || !na.is_finite() || !nb.is_finite() {
        return Err(TrackError::InvalidEmbedding("zero or non-finite vector".into()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((1.0 - dot / (na * nb)).clamp(0.0, 2.0))
}

pub(crate) fn norm_of(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `λ·d_r + (1-λ)·d_m²`, or `+∞` when `d_m²` exceeds the gate.
pub fn fused_cost(d_r: f64, d_m_sq: f64, config: &TrackerConfig) -> f64 {
    if d_m_sq > config.gate_threshold {
        return f64::INFINITY;
    }
    if config.lambda == 1.0 {
        return d_r;
    }
    config.lambda * d_r + (1.0 - config.lambda) * d_m_sq
}

/// Runs Hungarian on `cost` and demotes matches with cost above `threshold`.
fn thresholded(cost: &CostMatrix, threshold: f64) -> Assignment {
    let mut a = hungarian(cost);
    let (keep, drop): (Vec<_>, Vec<_>) = a.matches.into_iter().partition(|&(r, c)| cost.get(r, c) <= threshold);
    a.matches = keep;
    for (r, c) in drop {
        a.unmatched_rows.push(r);
        a.unmatched_cols.push(c);
    }
    a.unmatched_rows.sort_unstable();
    a.unmatched_cols.sort_unstable();
    a
}

/// Two-stage association of predicted tracklets with detections.
///
/// Both assignments index into the original `tracklets` and `detections`
/// slices: rows are tracklets, columns are detections. Stage 2 only sees the
/// stage-1 leftovers, and its unmatched lists are the final leftovers.
pub fn associate_frame(
    tracklets: &[Tracklet],
    detections: &[DetectionRecord],
    config: &TrackerConfig,
) -> Result<(Assignment, Assignment), TrackError> {
    let kf = KalmanFilter::new(config.kalman);
    let mut fused = Vec::with_capacity(tracklets.len() * detections.len());
    for t in tracklets {
        for d in detections {
            let d_m_sq = kf.mahalanobis_sq(&t.state, [d.x, d.y])?;
            let d_r = cosine_distance(&t.embedding, &d.embedding)?;
            fused.push(fused_cost(d_r, d_m_sq, config));
        }
    }
    let stage1 = thresholded(&CostMatrix::new(tracklets.len(), detections.len(), fused), config.tau1);

    let rows = &stage1.unmatched_rows;
    let cols = &stage1.unmatched_cols;
    let distance = CostMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        let [tx, ty] = tracklets[rows[i]].state.position();
        let d = &detections[cols[j]];
        (tx - d.x).hypot(ty - d.y)
    });
    let local = thresholded(&distance, config.tau2);
    let stage2 = Assignment {
        matches: local.matches.iter().map(|&(i, j)| (rows[i], cols[j])).collect(),
        unmatched_rows: local.unmatched_rows.iter().map(|&i| rows[i]).collect(),
        unmatched_cols: local.unmatched_cols.iter().map(|&j| cols[j]).collect(),
    };
    Ok((stage1, stage2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_cases() {
        let a = [1.0, 0.0, 0.0];
        assert_eq!(cosine_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(cosine_distance(&a, &[0.0, 1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_distance(&a, &[-1.0, 0.0, 0.0]).unwrap(), 2.0);
        assert!((cosine_distance(&[2.0, 0.0], &[3.0, 3.0]).unwrap() - (1.0 - 0.5f64.sqrt())).abs() < 1e-12);
        assert!(matches!(cosine_distance(&a, &[0.0; 3]), Err(TrackError::InvalidEmbedding(_))));
        assert!(cosine_distance(&a, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn fused_cost_cases() {
        let cfg = TrackerConfig::default();
        assert_eq!(fused_cost(0.5, 6.5, &cfg), f64::INFINITY);
        assert!((fused_cost(0.5, 1.0, &cfg) - 0.51).abs() < 1e-12);
        let pure = TrackerConfig { lambda: 1.0, ..cfg };
        assert_eq!(fused_cost(0.37, 2.0, &pure), 0.37);
        // the gate value itself is accepted
        assert!(fused_cost(0.0, CHI2_95_2DOF, &cfg).is_finite());
    }

    #[test]
    fn config_validation() {
        assert!(TrackerConfig::default().validate().is_ok());
        let c = TrackerConfig { lambda: 1.5, ..Default::default() };
        assert!(c.validate().is_err());
        let c = TrackerConfig { tau2: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
        let json = r#"{"lambda": 0.5, "bogus": 1}"#;
        assert!(serde_json::from_str::<TrackerConfig>(json).is_err());
        let c: TrackerConfig = serde_json::from_str(r#"{"lambda": 0.5, "kalman": {"measurement_std": 0.2}}"#).unwrap();
        assert_eq!(c.lambda, 0.5);
        assert_eq!(c.kalman.measurement_std, 0.2);
        assert_eq!(c.tau1, 0.4);
    }

    #[test]
    fn thresholding_demotes_strictly_greater() {
        let cost = CostMatrix::from_rows(&[vec![0.4, 9.0], vec![9.0, 0.41]]);
        let a = thresholded(&cost, 0.4);
        assert_eq!(a.matches, vec![(0, 0)]);
        assert_eq!(a.unmatched_rows, vec![1]);
        assert_eq!(a.unmatched_cols, vec![1]);
    }
}
