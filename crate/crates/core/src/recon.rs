//! Rectified pinhole triangulation and PLY export.
//!
//! `Z = f·b/d`, `X = (x − cx)·Z/f`, `Y = (y − cy)·Z/f` with the principal
//! point at the image center `((W−1)/2, (H−1)/2)`.

use std::path::Path;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use thiserror::Error;

use crate::imgcore::{self, ensure_same_dims, quantize_u8, ColoredPoint, DisparityMap, ImageError, RgbImage};
use crate::simulator::RigSpec;

pub const DEFAULT_MIN_DISP: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ReconError {
    #[error("min_disp must be > 0, got {0}")]
    MinDisp(f64),
    #[error("focal and baseline must be positive and finite")]
    Rig,
    #[error("plane fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error(transparent)]
    Image(#[from] ImageError),
}

pub type Result<T> = std::result::Result<T, ReconError>;

#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    /// Row-major in pixel order; coordinates in the baseline's unit.
    pub points: Vec<ColoredPoint>,
    pub principal_point: (f64, f64),
    pub focal: f64,
    pub baseline: f64,
}

pub fn depth(focal: f64, baseline: f64, d: f64) -> f64 {
    focal * baseline / d
}

/// One point per pixel with a valid disparity `d ≥ min_disp`.
pub fn triangulate(disp: &DisparityMap, rig: &RigSpec, color: &RgbImage, min_disp: f64) -> Result<PointCloud> {
    if min_disp.is_nan() || min_disp <= 0.0 {
        return Err(ReconError::MinDisp(min_disp));
    }
    if !(rig.focal > 0.0 && rig.focal.is_finite() && rig.baseline > 0.0 && rig.baseline.is_finite()) {
        return Err(ReconError::Rig);
    }
    ensure_same_dims(disp.dims(), color.dims())?;
    let (w, h) = disp.dims();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let mut points = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let d = f64::from(disp.get(x, y));
            if d.is_nan() || d < min_disp {
                continue;
            }
            let z = depth(rig.focal, rig.baseline, d);
            let [r, g, b] = color.pixel(x, y);
            points.push(ColoredPoint {
                x: (x as f64 - cx) * z / rig.focal,
                y: (y as f64 - cy) * z / rig.focal,
                z,
                rgb: [quantize_u8(r), quantize_u8(g), quantize_u8(b)],
            });
        }
    }
    Ok(PointCloud {
        points,
        principal_point: (cx, cy),
        focal: rig.focal,
        baseline: rig.baseline,
    })
}

impl PointCloud {
    pub fn mean_depth(&self) -> f64 {
        self.points.iter().map(|p| p.z).sum::<f64>() / self.points.len() as f64
    }

    pub fn write_ply(&self, path: impl AsRef<Path>) -> Result<()> {
        let comments = vec![
            format!(
                "principal point cx={} cy={} (image center)",
                self.principal_point.0, self.principal_point.1
            ),
            format!("focal_px={} baseline={}", self.focal, self.baseline),
        ];
        Ok(imgcore::write_ply(&self.points, &comments, path)?)
    }
}

/// RMS orthogonal distance to the least-squares plane.
pub fn plane_fit_rms(points: &[ColoredPoint]) -> Result<f64> {
    if points.len() < 3 {
        return Err(ReconError::TooFewPoints(points.len()));
    }
    let n = points.len() as f64;
    let c = points
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + Vector3::new(p.x, p.y, p.z))
        / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let v = Vector3::new(p.x, p.y, p.z) - c;
        cov += v * v.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let normal = eig.eigenvectors.column(eig.eigenvalues.imin()).into_owned();
    let ss: f64 = points
        .iter()
        .map(|p| (Vector3::new(p.x, p.y, p.z) - c).dot(&normal).powi(2))
        .sum();
    Ok((ss / n).sqrt())
}
