//! Multi-view bird's-eye-view pedestrian tracking toolkit.
//!
//! Calibrated pinhole cameras map image points onto a quantized ground grid,
//! a seeded simulator produces noisy BEV detections with identity embeddings,
//! an online tracker links them with a Kalman filter and two-stage Hungarian
//! association, and the metrics module scores the result with the usual
//! detection and CLEAR-MOT/IDF1 measures.

pub mod assoc;
pub mod bev;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod plot;
pub mod rng;
pub mod sim;
