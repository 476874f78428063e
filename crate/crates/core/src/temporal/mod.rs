//! Carrying detections across frames.
//!
//! The sparse LiDAR misses small obstacles whenever no ring happens to cross
//! them. Past detections are kept in a short [`DetectionMemory`]; in each new
//! frame their 3D points are moved into the current sensor frame through the
//! odometry poses, and the image patch recorded around them is searched for
//! near that seed. Accepted matches add Gaussian splats to the current
//! confidence map.

mod ncc;

use std::collections::VecDeque;

use image::GrayImage;
use nalgebra::Vector3;
use rayon::prelude::*;

pub use ncc::{template_match, MatchError, MatchResult};

use crate::error::{Error, Result};
use crate::projection::{render_confidence_map, PixelPoint, Projector};
use crate::ring_geometry::ObstacleSegment;
use crate::scene_io::{CameraModel, ExtrinsicsSE3, Pose};
use crate::ConfidenceMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalParams {
    /// Number of past frames kept.
    pub k: usize,
    /// Square template side, pixels.
    pub template_size: u32,
    /// Chebyshev search radius around the odometry seed, pixels.
    pub search_radius: u32,
    pub ncc_threshold: f64,
    /// A remembered obstacle whose seed lands this close (pixels) to a current
    /// anchor counts as re-detected and is not propagated.
    pub merge_radius: f64,
}

impl Default for TemporalParams {
    fn default() -> Self {
        TemporalParams {
            k: 4,
            template_size: 32,
            search_radius: 48,
            ncc_threshold: 0.6,
            merge_radius: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RememberedSegment {
    /// All member points, LiDAR frame of the frame they were seen in.
    pub points: Vec<Vector3<f64>>,
    /// Mean of the obstacle-surface points.
    pub centroid: Vector3<f64>,
    /// Projection of `centroid` in the frame it was seen in.
    pub anchor: Option<[f64; 2]>,
    /// Patch centered on `anchor`; absent when the patch leaves the image.
    pub template: Option<GrayImage>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryEntry {
    pub frame_id: u32,
    pub pose: Option<Pose>,
    pub segments: Vec<RememberedSegment>,
}

/// Ring buffer of the last `k` frames' detections.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionMemory {
    capacity: usize,
    entries: VecDeque<MemoryEntry>,
}

impl DetectionMemory {
    pub fn new(capacity: usize) -> Self {
        DetectionMemory {
            capacity,
            entries: VecDeque::with_capacity(capacity + 1),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = &MemoryEntry> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn frame_ids(&self) -> Vec<u32> {
        self.entries.iter().map(|e| e.frame_id).collect()
    }

    /// Records this frame's LiDAR detections, evicting the oldest entry beyond
    /// capacity. Frame ids must strictly increase.
    #[allow(clippy::too_many_arguments)]
    pub fn update(
        &mut self,
        segments: &[ObstacleSegment],
        image: &GrayImage,
        pose: Option<Pose>,
        frame_id: u32,
        camera: &CameraModel,
        xi: &ExtrinsicsSE3,
        template_size: u32,
    ) -> Result<()> {
        if let Some(last) = self.entries.back() {
            if frame_id <= last.frame_id {
                return Err(Error::Invalid(format!(
                    "frame {frame_id} does not follow remembered frame {}",
                    last.frame_id
                )));
            }
        }
        let projector = Projector::new(camera, xi);
        let remembered = segments
            .iter()
            .map(|seg| {
                let centroid = seg.obstacle_centroid();
                let anchor = projector.project(&centroid);
                RememberedSegment {
                    points: seg.positions().collect(),
                    centroid,
                    anchor,
                    template: anchor.and_then(|a| cut_template(image, a, template_size)),
                }
            })
            .collect();
        self.entries.push_back(MemoryEntry {
            frame_id,
            pose,
            segments: remembered,
        });
        while self.entries.len() > self.capacity {
            self.entries.pop_front();
        }
        Ok(())
    }
}

fn cut_template(image: &GrayImage, anchor: [f64; 2], size: u32) -> Option<GrayImage> {
    let ox = ncc_origin(anchor[0], size);
    let oy = ncc_origin(anchor[1], size);
    let (w, h) = image.dimensions();
    if ox < 0 || oy < 0 || ox + size as i64 > w as i64 || oy + size as i64 > h as i64 {
        return None;
    }
    Some(image::imageops::crop_imm(image, ox as u32, oy as u32, size, size).to_image())
}

fn ncc_origin(coord: f64, size: u32) -> i64 {
    ncc::patch_origin(coord.round() as i64, size)
}

/// Transform taking points from a past sensor frame into the current one.
fn relative(current: &Pose, past: &Pose) -> Pose {
    current.inverse().compose(past)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForwardProjection {
    pub anchors: Vec<PixelPoint>,
    /// Entries without a pose.
    pub skipped: usize,
    pub culled: usize,
}

/// Moves every remembered segment into the current frame by odometry alone
/// and projects all its points. `source` numbers segments across entries.
pub fn forward_project(
    memory: &DetectionMemory,
    current_pose: &Pose,
    camera: &CameraModel,
    xi: &ExtrinsicsSE3,
) -> ForwardProjection {
    let projector = Projector::new(camera, xi);
    let mut out = ForwardProjection::default();
    let mut source = 0;
    for entry in memory.entries() {
        let Some(past) = entry.pose else {
            out.skipped += 1;
            source += entry.segments.len();
            continue;
        };
        let rel = relative(current_pose, &past);
        for seg in &entry.segments {
            for p in &seg.points {
                match projector.project(&rel.transform(p)) {
                    Some([x, y]) => out.anchors.push(PixelPoint {
                        x,
                        y,
                        source,
                        inside: camera.contains(x, y),
                    }),
                    None => out.culled += 1,
                }
            }
            source += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    pub map: ConfidenceMap,
    pub matches: Vec<MatchResult>,
    /// Remembered segments skipped because the current scan sees them again.
    pub redetected: usize,
    pub degenerate: usize,
    /// Entries without a pose.
    pub skipped: usize,
}

/// Re-localizes remembered obstacles in `current_image` and merges accepted
/// matches into `current_map` by pixelwise maximum.
#[allow(clippy::too_many_arguments)]
pub fn propagate_and_aggregate(
    current_map: &ConfidenceMap,
    memory: &DetectionMemory,
    current_image: &GrayImage,
    current_pose: &Pose,
    current_anchors: &[PixelPoint],
    camera: &CameraModel,
    xi: &ExtrinsicsSE3,
    sigma: f64,
    params: &TemporalParams,
) -> Aggregation {
    let projector = Projector::new(camera, xi);
    let mut out = Aggregation {
        map: current_map.clone(),
        matches: Vec::new(),
        redetected: 0,
        degenerate: 0,
        skipped: 0,
    };

    let mut jobs = Vec::new();
    for entry in memory.entries() {
        let Some(past) = entry.pose else {
            out.skipped += 1;
            continue;
        };
        let rel = relative(current_pose, &past);
        for seg in &entry.segments {
            let Some(template) = &seg.template else {
                continue;
            };
            let Some(seed) = projector.project(&rel.transform(&seg.centroid)) else {
                continue;
            };
            let r2 = params.merge_radius * params.merge_radius;
            if current_anchors
                .iter()
                .any(|a| (a.x - seed[0]).powi(2) + (a.y - seed[1]).powi(2) <= r2)
            {
                out.redetected += 1;
                continue;
            }
            jobs.push((template, seed));
        }
    }

    let results: Vec<_> = jobs
        .par_iter()
        .map(|(template, seed)| {
            template_match(
                template,
                current_image,
                *seed,
                params.search_radius,
                params.ncc_threshold,
            )
        })
        .collect();

    let mut accepted = Vec::new();
    for result in results {
        match result {
            Ok(m) => {
                if m.accepted {
                    accepted.push(PixelPoint {
                        x: m.center[0],
                        y: m.center[1],
                        source: accepted.len(),
                        inside: true,
                    });
                }
                out.matches.push(m);
            }
            Err(_) => out.degenerate += 1,
        }
    }
    if !accepted.is_empty() {
        out.map
            .max_assign(&render_confidence_map(&accepted, sigma, camera));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring_geometry::{Breakpoint, GradientSign, RingPoint};

    fn camera() -> CameraModel {
        CameraModel::new(200.0, 200.0, 80.0, 60.0, 160, 120).unwrap()
    }

    fn segment_at(position: Vector3<f64>) -> ObstacleSegment {
        let bp = |index, sign| Breakpoint {
            ring: 0,
            index,
            azimuth: index as f64,
            sign,
        };
        let p = RingPoint::from_position(position);
        ObstacleSegment {
            ring: 0,
            start: bp(0, GradientSign::Negative),
            end: bp(1, GradientSign::Positive),
            points: vec![p, RingPoint::from_position(position * 1.5)],
            spread: 1.0,
        }
    }

    fn image() -> GrayImage {
        GrayImage::from_fn(160, 120, |x, y| {
            image::Luma([((x * 3 + y * 5) % 251) as u8])
        })
    }

    #[test]
    fn ring_buffer_evicts_oldest() {
        let mut memory = DetectionMemory::new(4);
        for id in 0..5 {
            memory
                .update(
                    &[],
                    &image(),
                    None,
                    id,
                    &camera(),
                    &ExtrinsicsSE3::identity(),
                    16,
                )
                .unwrap();
        }
        assert_eq!(memory.frame_ids(), vec![1, 2, 3, 4]);
        assert!(memory
            .update(
                &[],
                &image(),
                None,
                4,
                &camera(),
                &ExtrinsicsSE3::identity(),
                16
            )
            .is_err());
    }

    #[test]
    fn border_detection_has_no_template() {
        let mut memory = DetectionMemory::new(4);
        // Projects to x = 80 + 200 * 1.9 / 5 = 156, within 16 px of the right edge.
        let seg = segment_at(Vector3::new(1.9, 0.0, 5.0));
        let centered = segment_at(Vector3::new(0.0, 0.0, 5.0));
        memory
            .update(
                &[seg, centered],
                &image(),
                None,
                0,
                &camera(),
                &ExtrinsicsSE3::identity(),
                16,
            )
            .unwrap();
        let entry = memory.entries().next().unwrap();
        assert_eq!(entry.segments.len(), 2);
        assert!(entry.segments[0].template.is_none());
        assert!(entry.segments[0].anchor.is_some());
        assert!(entry.segments[1].template.is_some());
    }

    #[test]
    fn identity_motion_reproduces_projection() {
        let mut memory = DetectionMemory::new(4);
        let seg = segment_at(Vector3::new(0.3, -0.2, 6.0));
        let pose = Pose::identity(0);
        memory
            .update(
                std::slice::from_ref(&seg),
                &image(),
                Some(pose),
                0,
                &camera(),
                &ExtrinsicsSE3::identity(),
                16,
            )
            .unwrap();
        let fwd = forward_project(
            &memory,
            &Pose::identity(1),
            &camera(),
            &ExtrinsicsSE3::identity(),
        );
        let direct =
            crate::projection::project_segments(&[seg], &camera(), &ExtrinsicsSE3::identity());
        assert_eq!(fwd.anchors.len(), direct.pixels.len());
        for (a, b) in fwd.anchors.iter().zip(&direct.pixels) {
            assert!((a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9);
        }
    }

    #[test]
    fn moving_past_obstacle_culls_it() {
        let mut memory = DetectionMemory::new(4);
        let seg = segment_at(Vector3::new(0.0, 0.0, 3.0));
        memory
            .update(
                &[seg],
                &image(),
                Some(Pose::identity(0)),
                0,
                &camera(),
                &ExtrinsicsSE3::identity(),
                16,
            )
            .unwrap();
        let ahead = Pose::new(
            nalgebra::Matrix3::identity(),
            Vector3::new(0.0, 0.0, 10.0),
            1,
        )
        .unwrap();
        let fwd = forward_project(&memory, &ahead, &camera(), &ExtrinsicsSE3::identity());
        assert!(fwd.anchors.is_empty());
        // Only the obstacle point is remembered, not the closing breakpoint.
        assert_eq!(fwd.culled, 1);
    }

    #[test]
    fn missing_pose_is_skipped() {
        let mut memory = DetectionMemory::new(4);
        let seg = segment_at(Vector3::new(0.0, 0.0, 3.0));
        memory
            .update(
                &[seg],
                &image(),
                None,
                0,
                &camera(),
                &ExtrinsicsSE3::identity(),
                16,
            )
            .unwrap();
        let fwd = forward_project(
            &memory,
            &Pose::identity(1),
            &camera(),
            &ExtrinsicsSE3::identity(),
        );
        assert_eq!(fwd.skipped, 1);
        assert!(fwd.anchors.is_empty());
    }

    #[test]
    fn empty_memory_leaves_map_unchanged() {
        let map = render_confidence_map(
            &[PixelPoint {
                x: 40.0,
                y: 30.0,
                source: 0,
                inside: true,
            }],
            5.0,
            &camera(),
        );
        let out = propagate_and_aggregate(
            &map,
            &DetectionMemory::new(4),
            &image(),
            &Pose::identity(0),
            &[],
            &camera(),
            &ExtrinsicsSE3::identity(),
            5.0,
            &TemporalParams::default(),
        );
        assert_eq!(out.map, map);
    }
}
