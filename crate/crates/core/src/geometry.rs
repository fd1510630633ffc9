//! Pinhole camera model, ground-plane homography and BEV grid quantization.
//!
//! World coordinates are metric with `z` up and the walkable ground at
//! `z = 0`. World `x` maps to grid rows and world `y` to grid columns; the
//! grid origin is the corner of cell `(0, 0)`.

use nalgebra::{Matrix3, Matrix3x4, Vector3, Vector4};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Smallest homogeneous scale accepted when dehomogenizing.
pub const DEHOMOGENIZE_EPS: f64 = 1e-9;
/// Tolerance for `RᵀR = I` and `det R = 1`.
pub const ROTATION_TOL: f64 = 1e-9;
/// Homographies with a larger 1-norm condition number are rejected.
pub const MAX_HOMOGRAPHY_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("calibration error: {0}")]
    Calibration(String),
    #[error("point is behind the camera (depth {depth})")]
    BehindCamera { depth: f64 },
    #[error("ground homography is singular or ill-conditioned (condition {condition:e})")]
    DegenerateHomography { condition: f64 },
    #[error("pixel ray does not intersect the ground plane (scale {scale})")]
    Horizon { scale: f64 },
    #[error("cell ({row}, {col}) is outside the {rows}x{cols} grid")]
    OutOfBounds {
        row: i64,
        col: i64,
        rows: usize,
        cols: usize,
    },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub image_width: u32,
    pub image_height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        image_width: u32,
        image_height: u32,
    ) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            image_width,
            image_height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Intrinsics for a centered principal point and a given horizontal field of view.
    pub fn from_hfov(image_width: u32, image_height: u32, hfov_deg: f64) -> Self {
        let f = 0.5 * image_width as f64 / (0.5 * hfov_deg.to_radians()).tan();
        Self {
            fx: f,
            fy: f,
            cx: 0.5 * image_width as f64,
            cy: 0.5 * image_height as f64,
            image_width,
            image_height,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(GeometryError::Calibration(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if !(0.0..=self.image_width as f64).contains(&self.cx)
            || !(0.0..=self.image_height as f64).contains(&self.cy)
        {
            return Err(GeometryError::Calibration(format!(
                "principal point ({}, {}) outside the {}x{} image",
                self.cx, self.cy, self.image_width, self.image_height
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, 0.0, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }

    /// True when the pixel lies inside the sensor.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.image_width as f64 && v < self.image_height as f64
    }
}

/// World-to-camera pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraExtrinsics {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl CameraExtrinsics {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        check_rotation(&rotation)?;
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Like [`CameraExtrinsics::new`] but first snaps `rotation` to the nearest
    /// proper rotation (polar decomposition). Calibration files carry rounding.
    pub fn new_reorthonormalized(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        Self::new(nearest_rotation(&rotation)?, translation)
    }

    /// Camera placed at `center` looking at `target`, with world `z` as up.
    pub fn look_at(center: Vector3<f64>, target: Vector3<f64>) -> Result<Self, GeometryError> {
        let forward = (target - center)
            .try_normalize(1e-12)
            .ok_or_else(|| GeometryError::Calibration("camera center equals target".into()))?;
        let right = forward
            .cross(&Vector3::z())
            .try_normalize(1e-12)
            .ok_or_else(|| GeometryError::Calibration("optical axis is vertical".into()))?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * center);
        Self::new(rotation, translation)
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }
}

fn check_rotation(r: &Matrix3<f64>) -> Result<(), GeometryError> {
    if r.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::Calibration("rotation has non-finite entries".into()));
    }
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    let det = r.determinant();
    if ortho > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
        return Err(GeometryError::Calibration(format!(
            "rotation is not orthonormal (|RᵀR - I| = {ortho:e}, det = {det})"
        )));
    }
    Ok(())
}

/// Nearest proper rotation in the Frobenius sense.
pub fn nearest_rotation(m: &Matrix3<f64>) -> Result<Matrix3<f64>, GeometryError> {
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(GeometryError::Calibration("SVD of rotation failed".into())),
    };
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    Ok(u * d * v_t)
}

/// `P = K [R | t]`.
pub fn projection_matrix(intrinsics: &CameraIntrinsics, extrinsics: &CameraExtrinsics) -> Matrix3x4<f64> {
    let mut rt = Matrix3x4::zeros();
    rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&extrinsics.rotation);
    rt.set_column(3, &extrinsics.translation);
    intrinsics.matrix() * rt
}

/// Ground-plane homography: `P` with its `z` column removed.
///
/// The result may be singular; [`invert_homography`] checks that.
pub fn ground_homography(p: &Matrix3x4<f64>) -> Matrix3<f64> {
    Matrix3::from_columns(&[p.column(0).into_owned(), p.column(1).into_owned(), p.column(3).into_owned()])
}

fn norm1(m: &Matrix3<f64>) -> f64 {
    (0..3)
        .map(|c| m.column(c).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Adjugate inverse with a 1-norm condition check.
pub fn invert_homography(h: &Matrix3<f64>) -> Result<Matrix3<f64>, GeometryError> {
    let det = h.determinant();
    if det == 0.0 || !det.is_finite() {
        return Err(GeometryError::DegenerateHomography {
            condition: f64::INFINITY,
        });
    }
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| h[(r0, c0)] * h[(r1, c1)] - h[(r0, c1)] * h[(r1, c0)];
    // adj(H) = transpose of the cofactor matrix
    let adj = Matrix3::new(
        cof(1, 2, 1, 2),
        -cof(0, 2, 1, 2),
        cof(0, 1, 1, 2),
        -cof(1, 2, 0, 2),
        cof(0, 2, 0, 2),
        -cof(0, 1, 0, 2),
        cof(1, 2, 0, 1),
        -cof(0, 2, 0, 1),
        cof(0, 1, 0, 1),
    );
    let inv = adj / det;
    let condition = norm1(h) * norm1(&inv);
    if !condition.is_finite() || condition > MAX_HOMOGRAPHY_CONDITION {
        return Err(GeometryError::DegenerateHomography { condition });
    }
    Ok(inv)
}

/// A calibrated pinhole camera with its derived projection and ground homography.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: CameraExtrinsics,
    pub projection: Matrix3x4<f64>,
    pub ground_homography: Matrix3<f64>,
    ground_inverse: Option<Matrix3<f64>>,
}

/// Result of a forward projection: pixel plus the homogeneous scale (depth).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImagePoint {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

impl CameraModel {
    pub fn compose(intrinsics: CameraIntrinsics, extrinsics: CameraExtrinsics) -> Result<Self, GeometryError> {
        intrinsics.validate()?;
        check_rotation(&extrinsics.rotation)?;
        let projection = projection_matrix(&intrinsics, &extrinsics);
        let ground_homography = ground_homography(&projection);
        let ground_inverse = invert_homography(&ground_homography).ok();
        Ok(Self {
            intrinsics,
            extrinsics,
            projection,
            ground_homography,
            ground_inverse,
        })
    }

    pub fn project_world_to_image(&self, world: [f64; 3]) -> Result<ImagePoint, GeometryError> {
        let h = self.projection * Vector4::new(world[0], world[1], world[2], 1.0);
        let depth = h[2];
        if !(depth > DEHOMOGENIZE_EPS) {
            return Err(GeometryError::BehindCamera { depth });
        }
        Ok(ImagePoint {
            u: h[0] / depth,
            v: h[1] / depth,
            depth,
        })
    }

    pub fn project_image_to_ground(&self, u: f64, v: f64) -> Result<[f64; 2], GeometryError> {
        let inv = match &self.ground_inverse {
            Some(inv) => inv,
            None => {
                return Err(invert_homography(&self.ground_homography)
                    .err()
                    .unwrap_or(GeometryError::DegenerateHomography {
                        condition: f64::INFINITY,
                    }))
            }
        };
        let g = inv * Vector3::new(u, v, 1.0);
        let scale = g[2];
        if !(scale.abs() > DEHOMOGENIZE_EPS) {
            return Err(GeometryError::Horizon { scale });
        }
        Ok([g[0] / scale, g[1] / scale])
    }

    /// True when the ground-plane point projects inside the image in front of the camera.
    pub fn sees_ground_point(&self, x: f64, y: f64) -> bool {
        self.project_world_to_image([x, y, 0.0])
            .map(|p| self.intrinsics.contains(p.u, p.v))
            .unwrap_or(false)
    }
}

/// Adds iid `N(0, sigma²)` noise to each translation component.
pub fn perturb_translation<R: Rng + ?Sized>(
    extrinsics: &CameraExtrinsics,
    sigma: f64,
    rng: &mut R,
) -> CameraExtrinsics {
    assert!(sigma >= 0.0 && sigma.is_finite(), "sigma must be finite and non-negative");
    let normal = Normal::new(0.0, sigma).expect("valid normal");
    let mut out = *extrinsics;
    for i in 0..3 {
        out.translation[i] += normal.sample(rng);
    }
    out
}

/// Discretization of the ground plane into square cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundGrid {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub rows: usize,
    pub cols: usize,
}

/// Integer cell plus fractional position within it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCoord {
    pub row: usize,
    pub col: usize,
    pub offset_x: f64,
    pub offset_y: f64,
}

impl GroundGrid {
    pub fn new(origin_x: f64, origin_y: f64, cell_size: f64, rows: usize, cols: usize) -> Result<Self, GeometryError> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(GeometryError::InvalidGrid(format!("cell_size must be positive, got {cell_size}")));
        }
        if rows == 0 || cols == 0 {
            return Err(GeometryError::InvalidGrid(format!("grid must be non-empty, got {rows}x{cols}")));
        }
        Ok(Self {
            origin_x,
            origin_y,
            cell_size,
            rows,
            cols,
        })
    }

    /// Grid covering `[0, area_x] × [0, area_y]`.
    pub fn covering(area_x: f64, area_y: f64, cell_size: f64) -> Result<Self, GeometryError> {
        if !(area_x > 0.0 && area_y > 0.0) {
            return Err(GeometryError::InvalidGrid(format!("area must be positive, got {area_x}x{area_y}")));
        }
        // round first so 12.0 / 0.1 gives 120 cells, not 121
        let n = |a: f64| ((a / cell_size - 1e-9).ceil()).max(1.0) as usize;
        Self::new(0.0, 0.0, cell_size, n(area_x), n(area_y))
    }

    pub fn world_to_grid(&self, x: f64, y: f64) -> Result<GridCoord, GeometryError> {
        let qx = (x - self.origin_x) / self.cell_size;
        let qy = (y - self.origin_y) / self.cell_size;
        let (fx, fy) = (qx.floor(), qy.floor());
        let (row, col) = (fx as i64, fy as i64);
        if !qx.is_finite() || !qy.is_finite() || row < 0 || col < 0 || row as usize >= self.rows || col as usize >= self.cols {
            return Err(GeometryError::OutOfBounds {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(GridCoord {
            row: row as usize,
            col: col as usize,
            offset_x: qx - fx,
            offset_y: qy - fy,
        })
    }

    pub fn grid_to_world(&self, coord: GridCoord) -> Result<[f64; 2], GeometryError> {
        if coord.row >= self.rows || coord.col >= self.cols {
            return Err(GeometryError::OutOfBounds {
                row: coord.row as i64,
                col: coord.col as i64,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok([
            self.origin_x + (coord.row as f64 + coord.offset_x) * self.cell_size,
            self.origin_y + (coord.col as f64 + coord.offset_y) * self.cell_size,
        ])
    }

    /// Continuous grid coordinates (cell units) of a world point, unbounded.
    pub fn to_cell_units(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.origin_x) / self.cell_size, (y - self.origin_y) / self.cell_size)
    }

    pub fn cell_center(&self, row: usize, col: usize) -> [f64; 2] {
        [
            self.origin_x + (row as f64 + 0.5) * self.cell_size,
            self.origin_y + (col as f64 + 0.5) * self.cell_size,
        ]
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
