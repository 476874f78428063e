//! Synthetic road scenes with exact ground truth.
//!
//! World frame: z up, road plane `z = 0`, the sensor drives along +y. Boxes
//! are axis-aligned. Curbs are vertical faces at a signed lateral offset `x`
//! with a raised sidewalk beyond them. A posed 16-ring LiDAR and a pinhole
//! camera are ray-cast against the scene analytically.

mod lidar;
mod render;
mod scene_file;
mod sequence;

use nalgebra::{Matrix3, Vector3};

pub use lidar::{enumerate_crossings, raycast_scan, Crossing, LidarModel};
pub use render::{gray_image, render_ground_truth, GRAY_LEVELS};
pub use scene_file::{format_scene, load_scene, parse_scene};
pub use sequence::{camera_pose, simulate_sequence};

use crate::error::{Error, Result};
use crate::scene_io::{CameraModel, ExtrinsicsSE3, Pose};

/// Rays start this far past their origin to avoid self-hits.
const RAY_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxObstacle {
    pub center: Vector3<f64>,
    pub size: Vector3<f64>,
}

impl BoxObstacle {
    pub fn new(center: Vector3<f64>, size: Vector3<f64>) -> Result<Self> {
        if !center.iter().all(|v| v.is_finite()) || !size.iter().all(|v| v.is_finite() && *v > 0.0)
        {
            return Err(Error::Invalid(format!(
                "box size must be positive, got {size:?}"
            )));
        }
        Ok(BoxObstacle { center, size })
    }

    /// Box resting on the road with the given footprint center.
    pub fn on_road(x: f64, y: f64, size: Vector3<f64>) -> Result<Self> {
        Self::new(Vector3::new(x, y, size.z / 2.0), size)
    }

    pub fn min(&self) -> Vector3<f64> {
        self.center - self.size / 2.0
    }

    pub fn max(&self) -> Vector3<f64> {
        self.center + self.size / 2.0
    }

    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let (lo, hi) = (self.min(), self.max());
        std::array::from_fn(|i| {
            Vector3::new(
                if i & 1 == 0 { lo.x } else { hi.x },
                if i & 2 == 0 { lo.y } else { hi.y },
                if i & 4 == 0 { lo.z } else { hi.z },
            )
        })
    }

    /// Slab-method entry distance along a ray, if any.
    fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let (lo, hi) = (self.min(), self.max());
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for k in 0..3 {
            if dir[k] == 0.0 {
                if origin[k] < lo[k] || origin[k] > hi[k] {
                    return None;
                }
                continue;
            }
            let a = (lo[k] - origin[k]) / dir[k];
            let b = (hi[k] - origin[k]) / dir[k];
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            t_near = t_near.max(a);
            t_far = t_far.min(b);
        }
        (t_near <= t_far && t_near > RAY_EPSILON).then_some(t_near)
    }
}

/// A vertical curb face at lateral offset `offset`; the sidewalk beyond it
/// (away from `x = 0`) has height `height`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curb {
    pub offset: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Road,
    CurbFace,
    Sidewalk,
    Box(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub distance: f64,
    pub surface: Surface,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub boxes: Vec<BoxObstacle>,
    /// At most one curb with negative and one with positive offset.
    pub curbs: Vec<Curb>,
    /// LiDAR height above the road, meters.
    pub sensor_height: f64,
    pub camera: CameraModel,
    /// LiDAR-to-camera extrinsics.
    pub extrinsics: ExtrinsicsSE3,
    pub lidar: LidarModel,
    /// LiDAR-to-world poses, one per frame.
    pub trajectory: Vec<Pose>,
    /// Gaussian noise on the synthetic gray images (gray levels), 0 = none.
    pub image_noise: f64,
    pub seed: u64,
}

impl SceneSpec {
    /// 960x540 camera, 0.1 m below and 0.2 m ahead of the LiDAR, looking
    /// along the LiDAR +y axis.
    pub fn default_camera() -> (CameraModel, ExtrinsicsSE3) {
        let camera = CameraModel {
            fx: 800.0,
            fy: 800.0,
            cx: 479.5,
            cy: 269.5,
            width: 960,
            height: 540,
        };
        let xi = ExtrinsicsSE3 {
            nu: Vector3::new(0.0, -0.1, -0.2),
            omega: Vector3::new(std::f64::consts::FRAC_PI_2, 0.0, 0.0),
        };
        (camera, xi)
    }

    /// Scene with default sensors and a single frame at the origin.
    pub fn new(boxes: Vec<BoxObstacle>, curbs: Vec<Curb>, sensor_height: f64) -> Result<Self> {
        let (camera, extrinsics) = Self::default_camera();
        let scene = SceneSpec {
            boxes,
            curbs,
            sensor_height,
            camera,
            extrinsics,
            lidar: LidarModel::default(),
            trajectory: straight_trajectory(1, 1.0, sensor_height),
            image_noise: 0.0,
            seed: 0,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sensor_height.is_finite() && self.sensor_height > 0.0) {
            return Err(Error::Invalid("sensor height must be positive".into()));
        }
        for b in &self.boxes {
            if b.size.iter().any(|s| !(*s > 0.0)) {
                return Err(Error::Invalid("box sizes must be positive".into()));
            }
            if b.max().z >= self.sensor_height {
                return Err(Error::Invalid(format!(
                    "box top {} is not below the sensor height {}",
                    b.max().z,
                    self.sensor_height
                )));
            }
        }
        if self.curbs.iter().filter(|c| c.offset < 0.0).count() > 1
            || self.curbs.iter().filter(|c| c.offset > 0.0).count() > 1
        {
            return Err(Error::Invalid("at most one curb per side".into()));
        }
        for c in &self.curbs {
            if c.offset == 0.0
                || !c.offset.is_finite()
                || !(c.height > 0.0)
                || c.height >= self.sensor_height
            {
                return Err(Error::Invalid(format!("invalid curb {c:?}")));
            }
        }
        if self.trajectory.is_empty() {
            return Err(Error::Invalid("trajectory is empty".into()));
        }
        self.lidar.validate()?;
        self.camera.validate().map_err(Error::Invalid)?;
        if !(self.image_noise >= 0.0 && self.image_noise.is_finite()) {
            return Err(Error::Invalid("image noise must be non-negative".into()));
        }
        Ok(())
    }

    fn curb_on(&self, positive: bool) -> Option<&Curb> {
        self.curbs.iter().find(|c| (c.offset > 0.0) == positive)
    }

    /// Nearest surface along a unit-direction world ray within `max_distance`.
    pub fn cast_ray(
        &self,
        origin: &Vector3<f64>,
        dir: &Vector3<f64>,
        max_distance: f64,
    ) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        let mut offer = |distance: f64, surface: Surface| {
            if distance > RAY_EPSILON
                && distance <= max_distance
                && best.is_none_or(|b| distance < b.distance)
            {
                best = Some(Hit { distance, surface });
            }
        };
        let left = self.curb_on(false);
        let right = self.curb_on(true);
        let road_lo = left.map_or(f64::NEG_INFINITY, |c| c.offset);
        let road_hi = right.map_or(f64::INFINITY, |c| c.offset);

        if dir.z < 0.0 {
            let t = -origin.z / dir.z;
            let x = origin.x + t * dir.x;
            if x >= road_lo && x <= road_hi {
                offer(t, Surface::Road);
            }
        }
        for curb in left.into_iter().chain(right) {
            let beyond = |x: f64| {
                if curb.offset > 0.0 {
                    x >= curb.offset
                } else {
                    x <= curb.offset
                }
            };
            if dir.z != 0.0 {
                let t = (curb.height - origin.z) / dir.z;
                if beyond(origin.x + t * dir.x) {
                    offer(t, Surface::Sidewalk);
                }
            }
            if dir.x != 0.0 {
                let t = (curb.offset - origin.x) / dir.x;
                let z = origin.z + t * dir.z;
                if (0.0..=curb.height).contains(&z) {
                    offer(t, Surface::CurbFace);
                }
            }
        }
        for (i, b) in self.boxes.iter().enumerate() {
            if let Some(t) = b.intersect(origin, dir) {
                offer(t, Surface::Box(i));
            }
        }
        best
    }
}

/// LiDAR-to-world poses at `(0, k * step, height)`, axes aligned with the world.
pub fn straight_trajectory(frames: usize, step: f64, height: f64) -> Vec<Pose> {
    (0..frames)
        .map(|k| Pose {
            rotation: Matrix3::identity(),
            translation: Vector3::new(0.0, k as f64 * step, height),
            frame_id: k as u32,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene(boxes: Vec<BoxObstacle>, curbs: Vec<Curb>) -> SceneSpec {
        SceneSpec::new(boxes, curbs, 1.75).unwrap()
    }

    #[test]
    fn plane_hit_is_closed_form() {
        let s = scene(vec![], vec![]);
        let origin = Vector3::new(0.0, 0.0, 1.75);
        for deg in [1.0f64, 3.0, 7.5, 15.0] {
            let a = deg.to_radians();
            let dir = Vector3::new(0.0, a.cos(), -a.sin());
            let hit = s.cast_ray(&origin, &dir, 1e6).unwrap();
            assert_eq!(hit.surface, Surface::Road);
            assert!((hit.distance - 1.75 / a.sin()).abs() < 1e-9);
        }
        assert!(s
            .cast_ray(&origin, &Vector3::new(0.0, 0.0, 1.0), 1e6)
            .is_none());
    }

    #[test]
    fn box_face_hit_is_closed_form() {
        let b = BoxObstacle::on_road(0.0, 10.15, Vector3::new(1.0, 0.3, 0.3)).unwrap();
        let s = scene(vec![b], vec![]);
        let origin = Vector3::new(0.0, 0.0, 1.75);
        let a = 9.0f64.to_radians();
        let dir = Vector3::new(0.0, a.cos(), -a.sin());
        let hit = s.cast_ray(&origin, &dir, 1e6).unwrap();
        assert_eq!(hit.surface, Surface::Box(0));
        assert!((hit.distance - 10.0 / a.cos()).abs() < 1e-9);
    }

    #[test]
    fn curb_face_and_sidewalk() {
        let s = scene(
            vec![],
            vec![Curb {
                offset: 4.0,
                height: 0.15,
            }],
        );
        let origin = Vector3::new(0.0, 0.0, 1.75);
        // Straight right: the face spans depression angles atan(1.6 / 4)..atan(1.75 / 4).
        let a = 22.5f64.to_radians();
        let dir = Vector3::new(a.cos(), 0.0, -a.sin());
        let hit = s.cast_ray(&origin, &dir, 1e6).unwrap();
        assert_eq!(hit.surface, Surface::CurbFace);
        assert!((hit.distance - 4.0 / a.cos()).abs() < 1e-9);
        let a = 30.0f64.to_radians();
        let dir = Vector3::new(a.cos(), 0.0, -a.sin());
        assert_eq!(
            s.cast_ray(&origin, &dir, 1e6).unwrap().surface,
            Surface::Road
        );
        let a = 5.0f64.to_radians();
        let dir = Vector3::new(a.cos(), 0.0, -a.sin());
        let hit = s.cast_ray(&origin, &dir, 1e6).unwrap();
        assert_eq!(hit.surface, Surface::Sidewalk);
        assert!((hit.distance - 1.6 / a.sin()).abs() < 1e-9);
    }

    #[test]
    fn validation() {
        let tall = BoxObstacle::on_road(0.0, 5.0, Vector3::new(0.5, 0.5, 2.0)).unwrap();
        assert!(SceneSpec::new(vec![tall], vec![], 1.75).is_err());
        assert!(BoxObstacle::new(Vector3::zeros(), Vector3::new(0.0, 1.0, 1.0)).is_err());
        let two_left = vec![
            Curb {
                offset: -3.0,
                height: 0.1,
            },
            Curb {
                offset: -4.0,
                height: 0.1,
            },
        ];
        assert!(SceneSpec::new(vec![], two_left, 1.75).is_err());
    }
}
