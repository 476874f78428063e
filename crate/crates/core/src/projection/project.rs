use nalgebra::{Matrix3, Vector3};

use crate::ring_geometry::ObstacleSegment;
use crate::scene_io::{CameraModel, ExtrinsicsSE3};

/// Points closer than this to the camera plane (meters) are culled.
pub const Z_MIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub x: f64,
    pub y: f64,
    /// Identifier of the segment (or input point) this pixel came from.
    pub source: usize,
    pub inside: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Projection {
    pub pixels: Vec<PixelPoint>,
    pub culled: usize,
}

/// Pinhole projector with the rotation matrix evaluated once.
#[derive(Debug, Clone, Copy)]
pub struct Projector {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    camera: CameraModel,
}

impl Projector {
    pub fn new(camera: &CameraModel, xi: &ExtrinsicsSE3) -> Self {
        Projector {
            rotation: xi.rotation(),
            translation: xi.nu,
            camera: *camera,
        }
    }

    pub fn camera(&self) -> &CameraModel {
        &self.camera
    }

    /// Pixel coordinates of a LiDAR-frame point, or `None` when it lies
    /// behind the near plane.
    #[inline]
    pub fn project(&self, point: &Vector3<f64>) -> Option<[f64; 2]> {
        let p = self.rotation * point + self.translation;
        if p.z <= Z_MIN {
            return None;
        }
        Some([
            self.camera.fx * p.x / p.z + self.camera.cx,
            self.camera.fy * p.y / p.z + self.camera.cy,
        ])
    }
}

/// Projects LiDAR-frame points; `source` is the index of each input point.
pub fn project_points(
    points: &[Vector3<f64>],
    camera: &CameraModel,
    xi: &ExtrinsicsSE3,
) -> Projection {
    let projector = Projector::new(camera, xi);
    let mut out = Projection::default();
    for (i, p) in points.iter().enumerate() {
        push(&projector, p, i, &mut out);
    }
    out
}

/// Projects the obstacle points of every segment; `source` is the segment index.
pub fn project_segments(
    segments: &[ObstacleSegment],
    camera: &CameraModel,
    xi: &ExtrinsicsSE3,
) -> Projection {
    let projector = Projector::new(camera, xi);
    let mut out = Projection::default();
    for (i, seg) in segments.iter().enumerate() {
        for p in seg.positions() {
            push(&projector, &p, i, &mut out);
        }
    }
    out
}

fn push(projector: &Projector, point: &Vector3<f64>, source: usize, out: &mut Projection) {
    match projector.project(point) {
        Some([x, y]) => out.pixels.push(PixelPoint {
            x,
            y,
            source,
            inside: projector.camera.contains(x, y),
        }),
        None => out.culled += 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::exp_so3;
    use nalgebra::{Matrix4, Vector4};
    use proptest::prelude::*;

    fn camera() -> CameraModel {
        CameraModel::new(700.0, 700.0, 640.0, 360.0, 1280, 720).unwrap()
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let out = project_points(
            &[Vector3::new(0.0, 0.0, 5.0)],
            &camera(),
            &ExtrinsicsSE3::identity(),
        );
        assert_eq!((out.pixels[0].x, out.pixels[0].y), (640.0, 360.0));
        assert!(out.pixels[0].inside);
    }

    #[test]
    fn similar_triangles() {
        let out = project_points(
            &[Vector3::new(1.0, 0.0, 5.0)],
            &camera(),
            &ExtrinsicsSE3::identity(),
        );
        assert!((out.pixels[0].x - 780.0).abs() < 1e-12);
        assert_eq!(out.pixels[0].y, 360.0);
    }

    #[test]
    fn behind_camera_is_culled() {
        let out = project_points(
            &[Vector3::new(0.0, 0.0, -1.0)],
            &camera(),
            &ExtrinsicsSE3::identity(),
        );
        assert!(out.pixels.is_empty());
        assert_eq!(out.culled, 1);
    }

    #[test]
    fn outside_flag() {
        let out = project_points(
            &[Vector3::new(10.0, 0.0, 5.0)],
            &camera(),
            &ExtrinsicsSE3::identity(),
        );
        assert!(!out.pixels[0].inside);
    }

    proptest! {
        #[test]
        fn matches_homogeneous_form(
            wx in -1.0f64..1.0, wy in -1.0f64..1.0, wz in -1.0f64..1.0,
            tx in -1.0f64..1.0, ty in -1.0f64..1.0, tz in -1.0f64..1.0,
            px in -5.0f64..5.0, py in -5.0f64..5.0, pz in 2.0f64..30.0,
        ) {
            let xi = ExtrinsicsSE3::new(Vector3::new(tx, ty, tz), Vector3::new(wx, wy, wz)).unwrap();
            let cam = camera();
            let mut t = Matrix4::identity();
            t.fixed_view_mut::<3, 3>(0, 0).copy_from(&exp_so3(&xi.omega));
            t.fixed_view_mut::<3, 1>(0, 3).copy_from(&xi.nu);
            let k = Matrix4::new(
                cam.fx, 0.0, cam.cx, 0.0,
                0.0, cam.fy, cam.cy, 0.0,
                0.0, 0.0, 1.0, 0.0,
                0.0, 0.0, 0.0, 1.0,
            );
            let h = k * t * Vector4::new(px, py, pz, 1.0);
            prop_assume!(h.z > Z_MIN + 1e-6);
            let out = project_points(&[Vector3::new(px, py, pz)], &cam, &xi);
            let (u, v) = (h.x / h.z, h.y / h.z);
            prop_assert!((out.pixels[0].x - u).abs() <= 1e-12 * u.abs().max(1.0));
            prop_assert!((out.pixels[0].y - v).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }
}
