//! Sensor data types and their on-disk formats.
//!
//! Formats:
//!
//! * scans: `#VLP16-SCAN v1` text, one `ring azimuth_deg range_m x y z` per line
//! * calibration: `key=value` text (`fx fy cx cy width height xi`)
//! * poses: one row-major `[R|t]` 3x4 matrix per line
//! * confidence maps: 16-bit grayscale PNG; masks: 8-bit grayscale PNG
//! * sequences: a directory with `frames.txt`, `calib.txt`, `poses.txt` and
//!   per-frame `image_%06d.png`, `scan_%06d.txt`, optional `mask_%06d.png`

mod calib;
mod manifest;
mod poses;
mod raster;
mod scan;

use nalgebra::{Matrix3, Vector3};

pub use calib::{format_calibration, load_calibration, parse_calibration, save_calibration};
pub use manifest::{
    image_name, load_sequence, mask_name, scan_name, Frame, FrameFiles, SequenceManifest,
    CALIB_FILE, FRAMES_FILE, POSES_FILE,
};
pub use poses::{format_poses, load_poses, parse_poses, save_poses};
pub use raster::{
    load_confidence_map, load_gray_image, load_mask, save_confidence_map, save_gray_image,
    save_mask,
};
pub use scan::{format_scan, load_scan, parse_scan, save_scan, SCAN_HEADER};

use crate::error::{Error, Result};
use crate::projection::exp_so3;

/// Pinhole intrinsics of a rectified camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraModel {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let camera = CameraModel {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        camera.validate().map_err(Error::Invalid)?;
        Ok(camera)
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        if !(self.fx.is_finite() && self.fx > 0.0) || !(self.fy.is_finite() && self.fy > 0.0) {
            return Err(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            ));
        }
        if self.width == 0 || self.height == 0 {
            return Err("image size must be non-zero".into());
        }
        if !(0.0..self.width as f64).contains(&self.cx) {
            return Err(format!("cx={} outside [0, {})", self.cx, self.width));
        }
        if !(0.0..self.height as f64).contains(&self.cy) {
            return Err(format!("cy={} outside [0, {})", self.cy, self.height));
        }
        Ok(())
    }

    /// True when the continuous pixel coordinate falls on a pixel of the image.
    ///
    /// Pixel `(i, j)` covers `[i - 0.5, i + 0.5) x [j - 0.5, j + 0.5)`.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= -0.5 && y >= -0.5 && x < self.width as f64 - 0.5 && y < self.height as f64 - 0.5
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Rigid LiDAR-to-camera transform as a 6-vector `(nu, omega)`: translation in
/// meters and axis-angle rotation in radians.
///
/// A LiDAR point `X` maps to the camera frame as `exp(omega) * X + nu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrinsicsSE3 {
    pub nu: Vector3<f64>,
    pub omega: Vector3<f64>,
}

impl ExtrinsicsSE3 {
    pub fn new(nu: Vector3<f64>, omega: Vector3<f64>) -> Result<Self> {
        if !nu.iter().chain(omega.iter()).all(|v| v.is_finite()) {
            return Err(Error::Invalid("extrinsics must be finite".into()));
        }
        if omega.norm() >= std::f64::consts::PI {
            return Err(Error::Invalid(format!(
                "rotation vector norm {} must be below pi",
                omega.norm()
            )));
        }
        Ok(ExtrinsicsSE3 { nu, omega })
    }

    pub fn identity() -> Self {
        ExtrinsicsSE3 {
            nu: Vector3::zeros(),
            omega: Vector3::zeros(),
        }
    }

    /// `[nu_x, nu_y, nu_z, omega_x, omega_y, omega_z]`
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.nu.x,
            self.nu.y,
            self.nu.z,
            self.omega.x,
            self.omega.y,
            self.omega.z,
        ]
    }

    pub fn from_array(v: [f64; 6]) -> Result<Self> {
        Self::new(
            Vector3::new(v[0], v[1], v[2]),
            Vector3::new(v[3], v[4], v[5]),
        )
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        exp_so3(&self.omega)
    }

    pub fn transform(&self, point: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * point + self.nu
    }

    /// Pose of the camera expressed in the LiDAR frame.
    pub fn camera_in_lidar(&self) -> Pose {
        let rotation = self.rotation().transpose();
        Pose {
            rotation,
            translation: -(rotation * self.nu),
            frame_id: 0,
        }
    }
}

/// Sensor pose in the world frame: `world = rotation * sensor + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub frame_id: u32,
}

impl Pose {
    pub const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>, frame_id: u32) -> Result<Self> {
        let residual = (rotation.transpose() * rotation - Matrix3::identity())
            .abs()
            .max();
        if !residual.is_finite() || residual > Self::ORTHONORMAL_TOLERANCE {
            return Err(Error::Invalid(format!(
                "rotation of frame {frame_id} is not orthonormal (residual {residual:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > Self::ORTHONORMAL_TOLERANCE {
            return Err(Error::Invalid(format!(
                "rotation of frame {frame_id} has determinant {det}"
            )));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::Invalid(format!(
                "translation of frame {frame_id} is not finite"
            )));
        }
        Ok(Pose {
            rotation,
            translation,
            frame_id,
        })
    }

    pub fn identity(frame_id: u32) -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            frame_id,
        }
    }

    pub fn transform(&self, point: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * point + self.translation
    }

    pub fn inverse(&self) -> Pose {
        let rotation = self.rotation.transpose();
        Pose {
            rotation,
            translation: -(rotation * self.translation),
            frame_id: self.frame_id,
        }
    }

    /// `self ∘ other`: apply `other` first. Keeps `self.frame_id`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
            frame_id: self.frame_id,
        }
    }
}

/// Labels used in segmentation masks.
pub mod label {
    pub const OFF_ROAD: u8 = 0;
    pub const ROAD: u8 = 1;
    pub const OBSTACLE: u8 = 2;
    pub const CLASS_COUNT: usize = 3;
}

/// Per-pixel 3-class label raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMask {
    width: u32,
    height: u32,
    labels: Vec<u8>,
}

impl SegmentationMask {
    pub fn new(width: u32, height: u32, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width as usize * height as usize {
            return Err(Error::Invalid(format!(
                "mask of {width}x{height} needs {} labels, got {}",
                width as usize * height as usize,
                labels.len()
            )));
        }
        if let Some(pos) = labels.iter().position(|&l| l > label::OBSTACLE) {
            return Err(Error::InvalidLabel {
                path: "<memory>".into(),
                x: (pos % width as usize) as u32,
                y: (pos / width as usize) as u32,
                label: labels[pos],
            });
        }
        Ok(SegmentationMask {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        assert!(value <= label::OBSTACLE, "invalid label {value}");
        self.labels[y as usize * self.width as usize + x as usize] = value;
    }

    /// Label of the pixel containing the continuous coordinate, if inside.
    pub fn label_at(&self, x: f64, y: f64) -> Option<u8> {
        let (px, py) = (x.round(), y.round());
        if px < 0.0 || py < 0.0 || px >= self.width as f64 || py >= self.height as f64 {
            return None;
        }
        Some(self.get(px as u32, py as u32))
    }

    pub fn count(&self, value: u8) -> usize {
        self.labels.iter().filter(|&&l| l == value).count()
    }
}
