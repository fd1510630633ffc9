//! End-to-end orchestration: simulate, track, evaluate and record a manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::assoc::{TrackError, TrackRow, Tracker, TrackerConfig};
use crate::geometry::{GeometryError, GroundGrid};
use crate::io::{self, DetFrame, FormatError};
use crate::metrics::{evaluate, MetricsError, MetricsReport, ModpMode, DEFAULT_DET_RADIUS, DEFAULT_TRACK_RADIUS};
use crate::rng::substream;
use crate::sim::{default_rig, generate_scenario, observe_all, MotionParams, NoiseModel, Preset, Scenario};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const GT_FILE: &str = "gt.jsonl";
pub const DETECTIONS_FILE: &str = "detections.jsonl";
pub const CALIBRATION_FILE: &str = "calibration.json";
pub const TRACKS_FILE: &str = "tracks.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl PipelineError {
    /// 2 for configuration and validation problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Track(TrackError::Config(_)) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub preset: Preset,
    pub n_pedestrians: usize,
    pub duration: u32,
    /// Ground cell edge, meters.
    pub cell_size: f64,
    pub motion: MotionParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            preset: Preset::WildtrackLike,
            n_pedestrians: 20,
            duration: 400,
            cell_size: 0.1,
            motion: MotionParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub det_r: f64,
    pub track_r: f64,
    pub modp: ModpMode,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            det_r: DEFAULT_DET_RADIUS,
            track_r: DEFAULT_TRACK_RADIUS,
            modp: ModpMode::Normalized,
        }
    }
}

/// Everything a run depends on. `seed` has no default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            scenario: ScenarioConfig::default(),
            noise: NoiseModel::default(),
            tracker: TrackerConfig::default(),
            metrics: MetricsConfig::default(),
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text).map_err(|e| match e {
            PipelineError::Config(m) => PipelineError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let s = &self.scenario;
        if s.duration == 0 {
            return Err(PipelineError::Config("scenario.duration must be at least 1".into()));
        }
        if !(s.cell_size > 0.0 && s.cell_size.is_finite()) {
            return Err(PipelineError::Config(format!(
                "scenario.cell_size must be positive, got {}",
                s.cell_size
            )));
        }
        s.motion
            .validate()
            .map_err(|m| PipelineError::Config(format!("scenario.motion: {m}")))?;
        self.noise.validate().map_err(PipelineError::Config)?;
        self.tracker
            .validate()
            .map_err(|e| PipelineError::Config(format!("tracker: {e}")))?;
        for (name, v) in [("metrics.det_r", self.metrics.det_r), ("metrics.track_r", self.metrics.track_r)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PipelineError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// SHA-256 of the compact JSON form of the parsed config.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Accepts either a bare tracker config or a full pipeline config.
pub fn load_tracker_config(path: &Path) -> Result<TrackerConfig, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    let is_pipeline = value.get("seed").is_some() || value.get("tracker").is_some();
    let cfg = if is_pipeline {
        PipelineConfig::load(path)?.tracker
    } else {
        serde_json::from_value::<TrackerConfig>(value)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?
    };
    cfg.validate()
        .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    Ok(cfg)
}

pub fn build_scenario(config: &PipelineConfig) -> Result<Scenario, PipelineError> {
    let rig = default_rig(config.scenario.preset);
    let grid = GroundGrid::covering(rig.area_x, rig.area_y, config.scenario.cell_size)?;
    let mut rng = substream(config.seed, "scenario", 0);
    Ok(generate_scenario(
        &rig,
        grid,
        config.scenario.n_pedestrians,
        config.scenario.duration,
        &config.scenario.motion,
        &mut rng,
    ))
}

/// Ground truth, detections and calibration of a configured scenario.
pub struct Simulation {
    pub scenario: Scenario,
    pub detections: Vec<DetFrame>,
}

pub fn simulate(config: &PipelineConfig) -> Result<Simulation, PipelineError> {
    config.validate()?;
    let scenario = build_scenario(config)?;
    let detections = observe_all(&scenario, &config.noise, config.seed)
        .iter()
        .enumerate()
        .map(|(f, recs)| DetFrame::from_records(f as u32, recs))
        .collect();
    Ok(Simulation { scenario, detections })
}

pub fn write_simulation(sim: &Simulation, dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    io::write_jsonl(&dir.join(GT_FILE), &io::gt_frames(&sim.scenario))?;
    io::write_jsonl(&dir.join(DETECTIONS_FILE), &sim.detections)?;
    io::write_calibration(&dir.join(CALIBRATION_FILE), &sim.scenario.rig.cameras)?;
    Ok(())
}

/// Runs the tracker over frames in file order; frames must strictly increase.
pub fn track_frames(frames: &[DetFrame], config: &TrackerConfig) -> Result<Vec<TrackRow>, PipelineError> {
    let mut tracker = Tracker::new(*config).map_err(|e| PipelineError::Config(e.to_string()))?;
    let mut rows = Vec::new();
    for f in frames {
        rows.extend(tracker.step(f.frame, &f.records())?);
    }
    Ok(rows)
}

pub fn write_metrics(path: &Path, report: &MetricsReport) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_sha256: String,
    pub seed: u64,
    /// File name to SHA-256 of its contents.
    pub files: BTreeMap<String, String>,
    pub duration_secs: f64,
}

impl RunManifest {
    /// Names of files whose current digest differs from the recorded one.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>, PipelineError> {
        let mut bad = Vec::new();
        for (name, digest) in &self.files {
            if &sha256_file(&dir.join(name))? != digest {
                bad.push(name.clone());
            }
        }
        Ok(bad)
    }
}

/// Simulate, track and evaluate into `dir`. Metrics are computed from the
/// files as written, so they agree with a later standalone evaluation.
pub fn run_pipeline(config: &PipelineConfig, dir: &Path) -> Result<MetricsReport, PipelineError> {
    let start = Instant::now();
    let sim = simulate(config)?;
    write_simulation(&sim, dir)?;

    let det_frames = io::read_detections(&dir.join(DETECTIONS_FILE))?;
    let rows = track_frames(&det_frames, &config.tracker)?;
    let tracks_path = dir.join(TRACKS_FILE);
    io::write_tracks(&tracks_path, &rows)?;

    let gt = io::read_gt(&dir.join(GT_FILE))?;
    let tracks = io::tracks_to_set(&io::read_tracks(&tracks_path)?);
    let det_points = io::detection_points(&det_frames);
    let report = evaluate(
        &gt,
        &tracks,
        Some(&det_points),
        config.metrics.det_r,
        config.metrics.track_r,
        config.metrics.modp,
    )?;
    write_metrics(&dir.join(METRICS_FILE), &report)?;

    let mut files = BTreeMap::new();
    for name in [GT_FILE, DETECTIONS_FILE, CALIBRATION_FILE, TRACKS_FILE, METRICS_FILE] {
        files.insert(name.to_string(), sha256_file(&dir.join(name))?);
    }
    let manifest = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        config_sha256: config.digest(),
        seed: config.seed,
        files,
        duration_secs: start.elapsed().as_secs_f64(),
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> PipelineConfig {
        let mut c = PipelineConfig::new(seed);
        c.scenario.n_pedestrians = 4;
        c.scenario.duration = 20;
        c
    }

    #[test]
    fn seed_is_required() {
        assert!(matches!(PipelineConfig::from_json("{}"), Err(PipelineError::Config(_))));
        let c = PipelineConfig::from_json(r#"{"seed": 3}"#).unwrap();
        assert_eq!(c, PipelineConfig::new(3));
    }

    #[test]
    fn validation_is_field_level() {
        let e = PipelineConfig::from_json(r#"{"seed": 1, "noise": {"fp_rate": -1}}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("fp_rate"), "{e}");
        let e = PipelineConfig::from_json(r#"{"seed": 1, "scenario": {"colour": 1}}"#).unwrap_err();
        assert!(e.to_string().contains("colour"), "{e}");
        let e = PipelineConfig::from_json(r#"{"seed": 1, "tracker": {"lambda": 2}}"#).unwrap_err();
        assert!(e.to_string().contains("lambda"), "{e}");
    }

    #[test]
    fn manifest_digests_verify() {
        let dir = tempfile::tempdir().unwrap();
        run_pipeline(&small(5), dir.path()).unwrap();
        let m: RunManifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(m.files.len(), 5);
        assert!(m.verify(dir.path()).unwrap().is_empty());
        fs::write(dir.path().join(TRACKS_FILE), "frame,track_id,x,y,score\n").unwrap();
        assert_eq!(m.verify(dir.path()).unwrap(), vec![TRACKS_FILE.to_string()]);
    }

    #[test]
    fn config_digest_tracks_content() {
        assert_eq!(small(1).digest(), small(1).digest());
        assert_ne!(small(1).digest(), small(2).digest());
    }
}
