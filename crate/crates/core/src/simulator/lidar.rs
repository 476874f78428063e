use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{SceneSpec, Surface};
use crate::error::{Error, Result};
use crate::ring_geometry::{RingPoint, RingScan, RING_COUNT, VLP16_VERTICAL_ANGLES};
use crate::scene_io::Pose;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarModel {
    /// Ring elevation angles, degrees, ascending.
    pub vertical_angles: [f64; RING_COUNT],
    /// Degrees between consecutive firings.
    pub azimuth_resolution: f64,
    pub max_range: f64,
    /// Standard deviation of additive range noise, meters.
    pub range_noise: f64,
}

impl Default for LidarModel {
    fn default() -> Self {
        LidarModel {
            vertical_angles: VLP16_VERTICAL_ANGLES,
            azimuth_resolution: 0.2,
            max_range: 100.0,
            range_noise: 0.0,
        }
    }
}

impl LidarModel {
    pub fn validate(&self) -> Result<()> {
        if self.vertical_angles.windows(2).any(|w| !(w[0] < w[1]))
            || self.vertical_angles.iter().any(|a| !(a.abs() < 90.0))
        {
            return Err(Error::Invalid(
                "vertical angles must be ascending within (-90, 90)".into(),
            ));
        }
        if !(self.azimuth_resolution > 0.0 && self.azimuth_resolution <= 360.0) {
            return Err(Error::Invalid(
                "azimuth resolution must be in (0, 360]".into(),
            ));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(Error::Invalid("max range must be positive".into()));
        }
        if !(self.range_noise >= 0.0 && self.range_noise.is_finite()) {
            return Err(Error::Invalid("range noise must be non-negative".into()));
        }
        Ok(())
    }

    /// Firing azimuths `k * resolution` below 360 degrees.
    pub fn azimuths(&self) -> impl Iterator<Item = f64> + '_ {
        (0..)
            .map(move |k| k as f64 * self.azimuth_resolution)
            .take_while(|a| *a < 360.0)
    }

    /// Unit ray in the LiDAR frame.
    pub fn direction(&self, ring: usize, azimuth_deg: f64) -> Vector3<f64> {
        let (a, p) = (
            self.vertical_angles[ring].to_radians(),
            azimuth_deg.to_radians(),
        );
        Vector3::new(a.cos() * p.cos(), a.cos() * p.sin(), a.sin())
    }
}

/// Noise-free returns of one ring: `(azimuth, range, surface)`.
fn cast_ring(
    scene: &SceneSpec,
    pose: &Pose,
    lidar: &LidarModel,
    ring: usize,
) -> Vec<(f64, f64, Surface)> {
    let origin = pose.translation;
    lidar
        .azimuths()
        .filter_map(|az| {
            let dir = pose.rotation * lidar.direction(ring, az);
            scene
                .cast_ray(&origin, &dir, lidar.max_range)
                .map(|hit| (az, hit.distance, hit.surface))
        })
        .collect()
}

fn noise_seed(seed: u64, frame: u32, ring: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((frame as u64) << 8) ^ ring as u64
}

/// Ray-casts one sweep from `pose`. Noise, if configured, is seeded by the
/// scene seed, the frame id and the ring.
pub fn raycast_scan(scene: &SceneSpec, pose: &Pose, lidar: &LidarModel) -> RingScan {
    let rings: Vec<Vec<RingPoint>> = (0..RING_COUNT)
        .into_par_iter()
        .map(|ring| {
            let mut rng = ChaCha8Rng::seed_from_u64(noise_seed(scene.seed, pose.frame_id, ring));
            let noise =
                (lidar.range_noise > 0.0).then(|| Normal::new(0.0, lidar.range_noise).unwrap());
            cast_ring(scene, pose, lidar, ring)
                .into_iter()
                .filter_map(|(azimuth, range, _)| {
                    let range = match &noise {
                        Some(n) => range + n.sample(&mut rng),
                        None => range,
                    };
                    (range > 0.0).then(|| RingPoint {
                        azimuth,
                        range,
                        position: lidar.direction(ring, azimuth) * range,
                    })
                })
                .collect()
        })
        .collect();
    RingScan::new(rings, lidar.vertical_angles).expect("simulated rings are ordered")
}

/// A maximal run of consecutive returns on one ring that hit the same box.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    pub ring: usize,
    pub box_index: usize,
    pub first_azimuth: f64,
    pub last_azimuth: f64,
    pub returns: usize,
    /// Range of the preceding return minus the first box range; infinite
    /// when no return precedes the run.
    pub entry_jump: f64,
    /// Range of the following return minus the last box range.
    pub exit_jump: f64,
}

impl Crossing {
    pub fn min_jump(&self) -> f64 {
        self.entry_jump.min(self.exit_jump)
    }
}

/// Every box-ring crossing of a noise-free sweep.
pub fn enumerate_crossings(scene: &SceneSpec, pose: &Pose, lidar: &LidarModel) -> Vec<Crossing> {
    let mut out = Vec::new();
    for ring in 0..RING_COUNT {
        let returns = cast_ring(scene, pose, lidar, ring);
        let mut i = 0;
        while i < returns.len() {
            let Surface::Box(b) = returns[i].2 else {
                i += 1;
                continue;
            };
            let mut j = i;
            while j + 1 < returns.len() && returns[j + 1].2 == Surface::Box(b) {
                j += 1;
            }
            out.push(Crossing {
                ring,
                box_index: b,
                first_azimuth: returns[i].0,
                last_azimuth: returns[j].0,
                returns: j - i + 1,
                entry_jump: if i > 0 {
                    returns[i - 1].1 - returns[i].1
                } else {
                    f64::INFINITY
                },
                exit_jump: returns
                    .get(j + 1)
                    .map_or(f64::INFINITY, |r| r.1 - returns[j].1),
            });
            i = j + 1;
        }
    }
    out
}
