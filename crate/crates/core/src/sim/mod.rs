//! Deterministic multi-camera pedestrian scenarios and a parametric
//! detection oracle standing in for a learned BEV detector.
//!
//! The oracle's knobs map onto the error modes the metrics count: per-camera
//! misses and occlusion (false negatives), Poisson clutter (false positives),
//! Gaussian localization noise (distance) and embedding noise (identity
//! confusion).

mod rig;

pub use rig::{default_rig, CameraRig, CoverageStats, Preset};

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::GroundGrid;
use crate::rng::{substream, SimRng};

/// Identity embedding dimensionality.
pub const EMBEDDING_DIM: usize = 64;
/// Pixel radius within which a nearer pedestrian counts as an occluder.
pub const OCCLUSION_RADIUS_PX: f64 = 40.0;

/// Waypoint-walk speed range, meters per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionParams {
    pub min_speed: f64,
    pub max_speed: f64,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self {
            min_speed: 0.5,
            max_speed: 1.8,
        }
    }
}

impl MotionParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.min_speed > 0.0 && self.min_speed <= self.max_speed && self.max_speed.is_finite()) {
            return Err(format!(
                "motion speeds must satisfy 0 < min_speed <= max_speed (got {} and {})",
                self.min_speed, self.max_speed
            ));
        }
        Ok(())
    }
}

/// Detector error model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// Per-camera, per-frame probability of missing a visible pedestrian.
    pub p_miss_cam: f64,
    /// Extra miss probability per nearer pedestrian within the occlusion radius.
    pub occlusion_gain: f64,
    /// Expected false positives per frame.
    pub fp_rate: f64,
    /// Localization noise std, meters.
    pub sigma_loc: f64,
    /// Per-dimension embedding noise std.
    pub sigma_emb: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            p_miss_cam: 0.1,
            occlusion_gain: 0.1,
            fp_rate: 0.5,
            sigma_loc: 0.1,
            sigma_emb: 0.05,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            p_miss_cam: 0.0,
            occlusion_gain: 0.0,
            fp_rate: 0.0,
            sigma_loc: 0.0,
            sigma_emb: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("p_miss_cam", self.p_miss_cam), ("occlusion_gain", self.occlusion_gain)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("noise.{name} must be in [0, 1], got {v}"));
            }
        }
        for (name, v) in [
            ("fp_rate", self.fp_rate),
            ("sigma_loc", self.sigma_loc),
            ("sigma_emb", self.sigma_emb),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("noise.{name} must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub positions: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pedestrian {
    pub id: u64,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub rig: CameraRig,
    pub grid: GroundGrid,
    pub duration: u32,
    pub pedestrians: Vec<Pedestrian>,
    /// Seed of the ground-truth identity embeddings.
    pub embedding_seed: u64,
}

impl Scenario {
    /// Ground-truth `(id, x, y)` at a frame.
    pub fn ground_truth(&self, frame: u32) -> Vec<(u64, [f64; 2])> {
        self.pedestrians
            .iter()
            .map(|p| (p.id, p.trajectory.positions[frame as usize]))
            .collect()
    }
}

/// A BEV detection with its identity embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub frame: u32,
    pub x: f64,
    pub y: f64,
    pub score: f64,
    pub embedding: Vec<f64>,
}

fn uniform_point<R: Rng + ?Sized>(rng: &mut R, area_x: f64, area_y: f64) -> [f64; 2] {
    [rng.random::<f64>() * area_x, rng.random::<f64>() * area_y]
}

/// Waypoint walks: each pedestrian heads to a uniform random waypoint at a
/// speed drawn from the motion range and re-samples both on arrival.
pub fn generate_scenario<R: Rng + ?Sized>(
    rig: &CameraRig,
    grid: GroundGrid,
    n_pedestrians: usize,
    duration: u32,
    motion: &MotionParams,
    rng: &mut R,
) -> Scenario {
    assert!(duration >= 1, "duration must be at least one frame");
    let (ax, ay) = (rig.area_x, rig.area_y);
    let embedding_seed: u64 = rng.random();
    let speed = |rng: &mut R| motion.min_speed + rng.random::<f64>() * (motion.max_speed - motion.min_speed);
    let mut pedestrians = Vec::with_capacity(n_pedestrians);
    for i in 0..n_pedestrians {
        let mut pos = uniform_point(rng, ax, ay);
        let mut waypoint = uniform_point(rng, ax, ay);
        let mut step = speed(rng) / rig.fps;
        let mut positions = Vec::with_capacity(duration as usize);
        positions.push(pos);
        for _ in 1..duration {
            let (dx, dy) = (waypoint[0] - pos[0], waypoint[1] - pos[1]);
            let dist = dx.hypot(dy);
            if dist <= step {
                pos = waypoint;
                waypoint = uniform_point(rng, ax, ay);
                step = speed(rng) / rig.fps;
            } else {
                pos = [pos[0] + dx / dist * step, pos[1] + dy / dist * step];
            }
            pos = [pos[0].clamp(0.0, ax), pos[1].clamp(0.0, ay)];
            positions.push(pos);
        }
        pedestrians.push(Pedestrian {
            id: i as u64 + 1,
            trajectory: Trajectory { positions },
        });
    }
    Scenario {
        rig: rig.clone(),
        grid,
        duration,
        pedestrians,
        embedding_seed,
    }
}

/// Two pedestrians walking toward each other's start along the long axis,
/// passing 0.3 m apart at the middle frame.
pub fn crossing_scenario(rig: &CameraRig, grid: GroundGrid, duration: u32, speed: f64, embedding_seed: u64) -> Scenario {
    assert!(duration >= 2, "crossing needs at least two frames");
    let (cx, cy) = (rig.area_x / 2.0, rig.area_y / 2.0);
    let step = speed / rig.fps;
    let half = (duration - 1) as f64 / 2.0;
    let walk = |x: f64, dir: f64| Trajectory {
        positions: (0..duration)
            .map(|f| {
                let y = cy + dir * (f as f64 - half) * step;
                [x, y.clamp(0.0, rig.area_y)]
            })
            .collect(),
    };
    Scenario {
        rig: rig.clone(),
        grid,
        duration,
        pedestrians: vec![
            Pedestrian {
                id: 1,
                trajectory: walk(cx + 0.15, 1.0),
            },
            Pedestrian {
                id: 2,
                trajectory: walk(cx - 0.15, -1.0),
            },
        ],
        embedding_seed,
    }
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = crate::assoc::norm_of(&v);
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Ground-truth appearance of an identity: a normalized iid standard normal
/// vector, a pure function of `(seed, identity)`.
pub fn identity_embedding(identity: u64, dim: usize, seed: u64) -> Vec<f64> {
    assert!(dim >= 2, "embedding dimension must be at least 2");
    random_unit(&mut substream(seed, "identity", identity), dim)
}

/// RNG for one frame's observations, independent of every other frame.
pub fn frame_rng(seed: u64, frame: u32) -> SimRng {
    substream(seed, "observe", frame as u64)
}

/// Samples the detections of one frame.
pub fn observe_frame<R: Rng + ?Sized>(
    scenario: &Scenario,
    frame: u32,
    noise: &NoiseModel,
    rng: &mut R,
) -> Vec<DetectionRecord> {
    assert!(frame < scenario.duration, "frame {frame} beyond scenario duration");
    let truth = scenario.ground_truth(frame);
    let loc = Normal::new(0.0, noise.sigma_loc).expect("validated sigma_loc");
    let emb = Normal::new(0.0, noise.sigma_emb).expect("validated sigma_emb");

    // per camera: projection of every pedestrian (None when not in front)
    let projections: Vec<Vec<Option<(f64, f64, f64)>>> = scenario
        .rig
        .cameras
        .iter()
        .map(|cam| {
            truth
                .iter()
                .map(|(_, [x, y])| cam.project_world_to_image([*x, *y, 0.0]).ok().map(|p| (p.u, p.v, p.depth)))
                .collect()
        })
        .collect();

    let mut out = Vec::new();
    for (i, (id, [x, y])) in truth.iter().enumerate() {
        let mut seen = false;
        for (cam, proj) in scenario.rig.cameras.iter().zip(&projections) {
            let Some((u, v, depth)) = proj[i] else { continue };
            if !cam.intrinsics.contains(u, v) {
                continue;
            }
            let occluders = proj
                .iter()
                .enumerate()
                .filter(|&(j, p)| {
                    j != i
                        && p.is_some_and(|(uj, vj, dj)| dj < depth && (uj - u).hypot(vj - v) <= OCCLUSION_RADIUS_PX)
                })
                .count();
            let p_miss = (noise.p_miss_cam + noise.occlusion_gain * occluders as f64).min(1.0);
            if rng.random::<f64>() >= p_miss {
                seen = true;
            }
        }
        if !seen {
            continue;
        }
        let dx: f64 = loc.sample(rng);
        let dy: f64 = loc.sample(rng);
        let score = 1.0 - 0.2 * rng.random::<f64>();
        let base = identity_embedding(*id, EMBEDDING_DIM, scenario.embedding_seed);
        let embedding = if noise.sigma_emb == 0.0 {
            base
        } else {
            let noisy: Vec<f64> = base.iter().map(|b| b + emb.sample(rng)).collect();
            let n = crate::assoc::norm_of(&noisy);
            noisy.into_iter().map(|v| v / n).collect()
        };
        out.push(DetectionRecord {
            frame,
            x: x + dx,
            y: y + dy,
            score,
            embedding,
        });
    }

    if noise.fp_rate > 0.0 {
        let count: f64 = Poisson::new(noise.fp_rate).expect("validated fp_rate").sample(rng);
        for _ in 0..count as usize {
            let [x, y] = uniform_point(rng, scenario.rig.area_x, scenario.rig.area_y);
            let score = 0.4 + 0.3 * rng.random::<f64>();
            out.push(DetectionRecord {
                frame,
                x,
                y,
                score,
                embedding: random_unit(rng, EMBEDDING_DIM),
            });
        }
    }
    out
}

/// Observes every frame, each from its own `(seed, frame)` substream.
pub fn observe_all(scenario: &Scenario, noise: &NoiseModel, seed: u64) -> Vec<Vec<DetectionRecord>> {
    (0..scenario.duration)
        .map(|f| observe_frame(scenario, f, noise, &mut frame_rng(seed, f)))
        .collect()
}
