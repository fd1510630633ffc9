use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{CameraExtrinsics, CameraIntrinsics, CameraModel, GroundGrid};

pub const PRESET_CAMERA_HEIGHT: f64 = 5.0;
pub const PRESET_HFOV_DEG: f64 = 60.0;
pub const PRESET_IMAGE_WIDTH: u32 = 1920;
pub const PRESET_IMAGE_HEIGHT: u32 = 1080;
pub const PRESET_FPS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Seven cameras around a 12 m × 36 m area.
    WildtrackLike,
    /// Six cameras around a 16 m × 25 m area.
    MultiviewxLike,
    /// One camera set back from an 8 m × 8 m area it sees completely.
    SingleCamera,
}

impl Preset {
    pub fn area(self) -> (f64, f64) {
        match self {
            Preset::WildtrackLike => (12.0, 36.0),
            Preset::MultiviewxLike => (16.0, 25.0),
            Preset::SingleCamera => (8.0, 8.0),
        }
    }

    /// Ground positions of the cameras. The multi-camera presets sit on the
    /// perimeter: corners and midpoints of both short edges, plus one on a
    /// long edge for the seven-camera rig.
    fn camera_positions(self) -> Vec<(f64, f64)> {
        let (ax, ay) = self.area();
        match self {
            Preset::WildtrackLike => vec![
                (0.0, 0.0),
                (ax / 2.0, 0.0),
                (ax, 0.0),
                (ax, ay / 2.0),
                (ax, ay),
                (ax / 2.0, ay),
                (0.0, ay),
            ],
            Preset::MultiviewxLike => vec![
                (0.0, 0.0),
                (ax / 2.0, 0.0),
                (ax, 0.0),
                (ax, ay),
                (ax / 2.0, ay),
                (0.0, ay),
            ],
            Preset::SingleCamera => vec![(-5.0, ay / 2.0)],
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| format!("unknown preset `{s}` (expected wildtrack-like, multiviewx-like or single-camera)"))
    }
}

/// Synchronized calibrated cameras observing `[0, area_x] × [0, area_y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    pub cameras: Vec<CameraModel>,
    pub area_x: f64,
    pub area_y: f64,
    pub fps: f64,
}

impl CameraRig {
    /// Rig restricted to its first `n` cameras.
    pub fn with_first_cameras(&self, n: usize) -> CameraRig {
        CameraRig {
            cameras: self.cameras.iter().take(n.max(1)).cloned().collect(),
            ..self.clone()
        }
    }

    /// Number of cameras whose image contains the ground point.
    pub fn coverage_at(&self, x: f64, y: f64) -> usize {
        self.cameras.iter().filter(|c| c.sees_ground_point(x, y)).count()
    }

    pub fn coverage(&self, grid: &GroundGrid) -> CoverageStats {
        let mut min = usize::MAX;
        let mut max = 0;
        let mut total = 0usize;
        for r in 0..grid.rows {
            for c in 0..grid.cols {
                let [x, y] = grid.cell_center(r, c);
                let k = self.coverage_at(x, y);
                min = min.min(k);
                max = max.max(k);
                total += k;
            }
        }
        CoverageStats {
            min,
            max,
            mean: total as f64 / grid.len() as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageStats {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

/// Builds a preset rig: 5 m high cameras aimed at the area centroid with
/// 1920×1080 sensors and a 60° horizontal field of view.
pub fn default_rig(preset: Preset) -> CameraRig {
    let (area_x, area_y) = preset.area();
    let target = Vector3::new(area_x / 2.0, area_y / 2.0, 0.0);
    let intrinsics = CameraIntrinsics::from_hfov(PRESET_IMAGE_WIDTH, PRESET_IMAGE_HEIGHT, PRESET_HFOV_DEG);
    let cameras = preset
        .camera_positions()
        .into_iter()
        .map(|(x, y)| {
            let extrinsics = CameraExtrinsics::look_at(Vector3::new(x, y, PRESET_CAMERA_HEIGHT), target)
                .expect("preset cameras are never vertical");
            CameraModel::compose(intrinsics, extrinsics).expect("preset calibration is valid")
        })
        .collect();
    CameraRig {
        cameras,
        area_x,
        area_y,
        fps: PRESET_FPS,
    }
}
