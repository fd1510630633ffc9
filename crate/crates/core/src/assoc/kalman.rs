//! Constant-velocity Kalman filter on ground-plane centers.
//!
//! State is `(x, y, vx, vy)` in meters and meters/frame; one predict step
//! advances one frame.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use super::TrackError;

/// Noise standard deviations of the motion and measurement models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KalmanNoise {
    pub init_pos_std: f64,
    pub init_vel_std: f64,
    pub process_pos_std: f64,
    pub process_vel_std: f64,
    pub measurement_std: f64,
}

impl Default for KalmanNoise {
    fn default() -> Self {
        Self {
            init_pos_std: 0.5,
            init_vel_std: 0.5,
            process_pos_std: 0.05,
            process_vel_std: 0.5,
            measurement_std: 0.1,
        }
    }
}

impl KalmanNoise {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            init_pos_std: self.init_pos_std * factor,
            init_vel_std: self.init_vel_std * factor,
            process_pos_std: self.process_pos_std * factor,
            process_vel_std: self.process_vel_std * factor,
            measurement_std: self.measurement_std * factor,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("init_pos_std", self.init_pos_std),
            ("init_vel_std", self.init_vel_std),
            ("process_pos_std", self.process_pos_std),
            ("process_vel_std", self.process_vel_std),
            ("measurement_std", self.measurement_std),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("kalman.{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub mean: Vector4<f64>,
    pub covariance: Matrix4<f64>,
}

impl KalmanState {
    pub fn position(&self) -> [f64; 2] {
        [self.mean[0], self.mean[1]]
    }

    /// Cholesky succeeds and the matrix is symmetric within `1e-9`.
    pub fn is_spd(&self) -> bool {
        let c = &self.covariance;
        (c - c.transpose()).abs().max() <= 1e-9 && c.cholesky().is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanFilter {
    noise: KalmanNoise,
    transition: Matrix4<f64>,
    observation: Matrix2x4<f64>,
}

impl Default for KalmanFilter {
    fn default() -> Self {
        Self::new(KalmanNoise::default())
    }
}

impl KalmanFilter {
    pub fn new(noise: KalmanNoise) -> Self {
        #[rustfmt::skip]
        let transition = Matrix4::new(
            1.0, 0.0, 1.0, 0.0,
            0.0, 1.0, 0.0, 1.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        #[rustfmt::skip]
        let observation = Matrix2x4::new(
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
        );
        Self {
            noise,
            transition,
            observation,
        }
    }

    pub fn noise(&self) -> &KalmanNoise {
        &self.noise
    }

    fn process_noise(&self) -> Matrix4<f64> {
        let p = self.noise.process_pos_std.powi(2);
        let v = self.noise.process_vel_std.powi(2);
        Matrix4::from_diagonal(&Vector4::new(p, p, v, v))
    }

    fn measurement_noise(&self) -> Matrix2<f64> {
        Matrix2::from_diagonal_element(self.noise.measurement_std.powi(2))
    }

    pub fn initiate(&self, measurement: [f64; 2]) -> KalmanState {
        let p = self.noise.init_pos_std.powi(2);
        let v = self.noise.init_vel_std.powi(2);
        KalmanState {
            mean: Vector4::new(measurement[0], measurement[1], 0.0, 0.0),
            covariance: Matrix4::from_diagonal(&Vector4::new(p, p, v, v)),
        }
    }

    pub fn predict(&self, state: &KalmanState) -> KalmanState {
        let f = &self.transition;
        let covariance = f * state.covariance * f.transpose() + self.process_noise();
        KalmanState {
            mean: f * state.mean,
            covariance: symmetrize(covariance),
        }
    }

    /// Innovation `z - Hμ` and its covariance `H P Hᵀ + R`.
    pub fn innovation(&self, state: &KalmanState, measurement: [f64; 2]) -> (Vector2<f64>, Matrix2<f64>) {
        let h = &self.observation;
        let residual = Vector2::new(measurement[0], measurement[1]) - h * state.mean;
        let s = h * state.covariance * h.transpose() + self.measurement_noise();
        (residual, s)
    }

    pub fn update(&self, state: &KalmanState, measurement: [f64; 2]) -> Result<KalmanState, TrackError> {
        let (residual, s) = self.innovation(state, measurement);
        let chol = s
            .cholesky()
            .ok_or_else(|| TrackError::Numerical("innovation covariance is not positive definite".into()))?;
        let pht = state.covariance * self.observation.transpose();
        // K = P Hᵀ S⁻¹, solved as S Kᵀ = H P
        let gain = chol.solve(&pht.transpose()).transpose();
        let mean = state.mean + gain * residual;
        let covariance = symmetrize(state.covariance - gain * s * gain.transpose());
        Ok(KalmanState { mean, covariance })
    }

    /// Squared Mahalanobis distance between the predicted and measured center.
    pub fn mahalanobis_sq(&self, state: &KalmanState, measurement: [f64; 2]) -> Result<f64, TrackError> {
        let (residual, s) = self.innovation(state, measurement);
        mahalanobis_sq(&residual, &s)
    }
}

/// `rᵀ S⁻¹ r` for a symmetric positive-definite `S`.
pub fn mahalanobis_sq(residual: &Vector2<f64>, s: &Matrix2<f64>) -> Result<f64, TrackError> {
    let chol = s
        .cholesky()
        .ok_or_else(|| TrackError::Numerical("innovation covariance is not positive definite".into()))?;
    let z = chol.l().solve_lower_triangular(residual).expect("cholesky factor is invertible");
    Ok(z.norm_squared())
}

fn symmetrize(m: Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}
