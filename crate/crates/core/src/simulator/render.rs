use image::{GrayImage, Luma};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{SceneSpec, Surface};
use crate::projection::Z_MIN;
use crate::scene_io::{label, CameraModel, Pose, SegmentationMask};

/// Gray level of each label in synthetic camera images.
pub const GRAY_LEVELS: [u8; 3] = [64, 128, 255];

const CAMERA_FAR: f64 = 1e4;

/// Labels every pixel by casting a ray through its center: obstacle for a box,
/// road for the road surface between the curbs, off-road otherwise. Pixels
/// whose cell overlaps the silhouette of a box lying fully in front of the
/// camera are labeled obstacle as well, so every visible box surface point
/// falls inside an obstacle pixel.
pub fn render_ground_truth(
    scene: &SceneSpec,
    camera_pose: &Pose,
    camera: &CameraModel,
) -> SegmentationMask {
    let (w, h) = (camera.width as usize, camera.height as usize);
    let mut labels = vec![label::OFF_ROAD; w * h];
    labels.par_chunks_mut(w).enumerate().for_each(|(v, row)| {
        for (u, out) in row.iter_mut().enumerate() {
            let d = Vector3::new(
                (u as f64 - camera.cx) / camera.fx,
                (v as f64 - camera.cy) / camera.fy,
                1.0,
            );
            let dir = (camera_pose.rotation * d).normalize();
            *out = match scene.cast_ray(&camera_pose.translation, &dir, CAMERA_FAR) {
                Some(hit) => match hit.surface {
                    Surface::Road => label::ROAD,
                    Surface::Box(_) => label::OBSTACLE,
                    Surface::CurbFace | Surface::Sidewalk => label::OFF_ROAD,
                },
                None => label::OFF_ROAD,
            };
        }
    });

    let world_to_camera = camera_pose.inverse();
    for b in &scene.boxes {
        let corners = b.corners().map(|c| world_to_camera.transform(&c));
        if corners.iter().any(|c| c.z <= Z_MIN) {
            continue;
        }
        let projected: Vec<[f64; 2]> = corners
            .iter()
            .map(|c| {
                [
                    camera.fx * c.x / c.z + camera.cx,
                    camera.fy * c.y / c.z + camera.cy,
                ]
            })
            .collect();
        fill_convex_cover(&convex_hull(projected), w, h, &mut labels);
    }
    SegmentationMask::new(camera.width, camera.height, labels).expect("labels sized to camera")
}

/// Counter-clockwise hull (in image coordinates) without repeated endpoints.
fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(pts.len() * 2);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Marks every pixel whose closed unit cell meets the closed convex polygon.
fn fill_convex_cover(hull: &[[f64; 2]], w: usize, h: usize, labels: &mut [u8]) {
    if hull.is_empty() {
        return;
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in hull {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let x0 = (lo[0] - 0.5).ceil().max(0.0);
    let x1 = (hi[0] + 0.5).floor().min(w as f64 - 1.0);
    let y0 = (lo[1] - 0.5).ceil().max(0.0);
    let y1 = (hi[1] + 0.5).floor().min(h as f64 - 1.0);
    if x0 > x1 || y0 > y1 {
        return;
    }
    // Outward edge normals; the interior satisfies n . p <= c.
    let edges: Vec<([f64; 2], f64)> = (0..hull.len())
        .filter_map(|i| {
            let a = hull[i];
            let b = hull[(i + 1) % hull.len()];
            let n = [b[1] - a[1], a[0] - b[0]];
            (n[0] != 0.0 || n[1] != 0.0).then(|| (n, n[0] * a[0] + n[1] * a[1]))
        })
        .collect();
    for y in y0 as usize..=y1 as usize {
        for x in x0 as usize..=x1 as usize {
            let (cx, cy) = (x as f64, y as f64);
            let separated = edges.iter().any(|(n, c)| {
                let min = n[0] * cx + n[1] * cy - 0.5 * (n[0].abs() + n[1].abs());
                min > *c
            });
            if !separated {
                labels[y * w + x] = label::OBSTACLE;
            }
        }
    }
}

/// Gray raster for a label mask, optionally with seeded Gaussian noise.
pub fn gray_image(mask: &SegmentationMask, noise: f64, seed: u64) -> GrayImage {
    let mut img = GrayImage::new(mask.width(), mask.height());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = (noise > 0.0).then(|| Normal::new(0.0, noise).unwrap());
    for (&l, px) in mask.labels().iter().zip(img.pixels_mut()) {
        let base = GRAY_LEVELS[l as usize] as f64;
        let v = match &dist {
            Some(d) => (base + d.sample(&mut rng)).round().clamp(0.0, 255.0),
            None => base,
        };
        *px = Luma([v as u8]);
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::extract_instances;
    use crate::projection::project_points;
    use crate::simulator::{camera_pose, straight_trajectory, BoxObstacle};

    #[test]
    fn hull_of_square_with_interior_point() {
        let hull = convex_hull(vec![
            [0.0, 0.0],
            [2.0, 0.0],
            [1.0, 1.0],
            [2.0, 2.0],
            [0.0, 2.0],
        ]);
        assert_eq!(hull.len(), 4);
    }

    fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    }

    fn segments_intersect(p: [f64; 2], q: [f64; 2], r: [f64; 2], s: [f64; 2]) -> bool {
        let (d1, d2) = (cross(r, s, p), cross(r, s, q));
        let (d3, d4) = (cross(p, q, r), cross(p, q, s));
        d1 * d2 <= 0.0 && d3 * d4 <= 0.0
    }

    // Cell meets polygon iff a cell corner is inside the polygon, a polygon
    // vertex is inside the cell, or two edges cross.
    fn cell_meets_polygon(x: f64, y: f64, poly: &[[f64; 2]]) -> bool {
        let corners = [
            [x - 0.5, y - 0.5],
            [x + 0.5, y - 0.5],
            [x + 0.5, y + 0.5],
            [x - 0.5, y + 0.5],
        ];
        let n = poly.len();
        let in_poly = |p: [f64; 2]| (0..n).all(|i| cross(poly[i], poly[(i + 1) % n], p) >= 0.0);
        if corners.iter().any(|&c| in_poly(c)) {
            return true;
        }
        if poly
            .iter()
            .any(|v| (v[0] - x).abs() <= 0.5 && (v[1] - y).abs() <= 0.5)
        {
            return true;
        }
        (0..n).any(|i| {
            (0..4).any(|k| {
                segments_intersect(poly[i], poly[(i + 1) % n], corners[k], corners[(k + 1) % 4])
            })
        })
    }

    #[test]
    fn cover_matches_exact_cell_test() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        use rand::Rng;
        for _ in 0..200 {
            let pts: Vec<[f64; 2]> = (0..rng.random_range(3..9))
                .map(|_| [rng.random_range(-2.0..14.0), rng.random_range(-2.0..14.0)])
                .collect();
            let hull = convex_hull(pts);
            if hull.len() < 3 {
                continue;
            }
            let (w, h) = (12usize, 12usize);
            let mut labels = vec![0u8; w * h];
            fill_convex_cover(&hull, w, h, &mut labels);
            for y in 0..h {
                for x in 0..w {
                    let expected = cell_meets_polygon(x as f64, y as f64, &hull);
                    assert_eq!(labels[y * w + x] == 2, expected, "({x}, {y}) {hull:?}");
                }
            }
        }
    }

    fn box_scene(y: f64) -> (SceneSpec, Pose) {
        let b = BoxObstacle::on_road(0.6, y, Vector3::new(0.3, 0.3, 0.3)).unwrap();
        let scene = SceneSpec::new(vec![b], vec![], 1.75).unwrap();
        let pose = camera_pose(&straight_trajectory(1, 1.0, 1.75)[0], &scene.extrinsics);
        (scene, pose)
    }

    #[test]
    fn obstacle_free_scene_has_no_obstacle_pixels() {
        let scene = SceneSpec::new(vec![], vec![], 1.75).unwrap();
        let pose = camera_pose(&straight_trajectory(1, 1.0, 1.75)[0], &scene.extrinsics);
        let mask = render_ground_truth(&scene, &pose, &scene.camera);
        assert_eq!(mask.count(label::OBSTACLE), 0);
        assert!(mask.count(label::ROAD) > 0);
        // Above the horizon is sky.
        assert_eq!(mask.get(10, 10), label::OFF_ROAD);
    }

    #[test]
    fn single_box_is_one_component_centered_on_projection() {
        let (scene, pose) = box_scene(25.0);
        let mask = render_ground_truth(&scene, &pose, &scene.camera);
        let inst = extract_instances(&mask, label::OBSTACLE, 1);
        assert_eq!(inst.len(), 1);
        let w = mask.width() as usize;
        let n = inst.instances[0].len() as f64;
        let cx = inst.instances[0]
            .iter()
            .map(|p| (p % w) as f64)
            .sum::<f64>()
            / n;
        let cy = inst.instances[0]
            .iter()
            .map(|p| (p / w) as f64)
            .sum::<f64>()
            / n;
        let lidar_center = Vector3::new(0.6, 25.0, 0.15 - 1.75);
        let proj = project_points(&[lidar_center], &scene.camera, &scene.extrinsics);
        let p = proj.pixels[0];
        assert!(
            (p.x - cx).abs() < 0.5 && (p.y - cy).abs() < 0.5,
            "{p:?} vs ({cx}, {cy})"
        );
    }

    #[test]
    fn box_surface_points_fall_inside_obstacle_cells() {
        let (scene, pose) = box_scene(9.0);
        let mask = render_ground_truth(&scene, &pose, &scene.camera);
        let b = scene.boxes[0];
        let to_lidar = straight_trajectory(1, 1.0, 1.75)[0].inverse();
        // Corners and face centers of the front face.
        let lo = b.min();
        let hi = b.max();
        let pts: Vec<Vector3<f64>> = [
            [lo.x, lo.y, lo.z],
            [hi.x, lo.y, hi.z],
            [lo.x, lo.y, hi.z],
            [hi.x, lo.y, lo.z],
            [0.6, lo.y, 0.01],
        ]
        .iter()
        .map(|p| to_lidar.transform(&Vector3::new(p[0], p[1], p[2])))
        .collect();
        let proj = project_points(&pts, &scene.camera, &scene.extrinsics);
        for p in &proj.pixels {
            assert_eq!(mask.label_at(p.x, p.y), Some(label::OBSTACLE), "{p:?}");
        }
    }

    #[test]
    fn gray_levels_and_noise() {
        let m = SegmentationMask::new(3, 1, vec![0, 1, 2]).unwrap();
        let img = gray_image(&m, 0.0, 0);
        assert_eq!(img.as_raw(), &vec![64, 128, 255]);
        let a = gray_image(&m, 5.0, 3);
        assert_eq!(a, gray_image(&m, 5.0, 3));
    }
}
