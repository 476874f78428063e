use super::{ObstacleSegment, RingPoint, RingScan};
use crate::error::{Error, Result};
use crate::projection::Projector;
use crate::scene_io::{label, CameraModel, ExtrinsicsSE3, SegmentationMask};

/// Closed azimuth interval in degrees, `start <= end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AzimuthInterval {
    pub start: f64,
    pub end: f64,
}

impl AzimuthInterval {
    pub fn contains(&self, azimuth: f64) -> bool {
        azimuth >= self.start && azimuth <= self.end
    }

    pub fn contains_interval(&self, start: f64, end: f64) -> bool {
        self.contains(start) && self.contains(end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurbParams {
    /// Azimuth of the driving direction, degrees.
    pub forward_azimuth: f64,
    /// Rise above the road reference that counts as a curb, meters.
    pub elevation_jump: f64,
    /// An elevated run must span at least this many degrees to be a curb
    /// rather than an obstacle on the road.
    pub min_curb_extent_deg: f64,
    /// Half-width of the window around the forward azimuth used to estimate
    /// the road elevation, degrees.
    pub reference_window_deg: f64,
}

impl Default for CurbParams {
    fn default() -> Self {
        CurbParams {
            forward_azimuth: 90.0,
            elevation_jump: 0.08,
            min_curb_extent_deg: 3.0,
            reference_window_deg: 5.0,
        }
    }
}

/// Where detections are allowed to survive.
#[derive(Debug, Clone, PartialEq)]
pub enum RoadRegion {
    /// No filtering.
    Unrestricted,
    /// Per-ring bands derived from curbs in the scan being filtered.
    Curbs(CurbParams),
    /// Explicit per-ring bands; `None` means the ring has no road.
    Bands(Vec<Option<AzimuthInterval>>),
    /// Image-space road mask; needs camera intrinsics and extrinsics.
    Mask(SegmentationMask),
}

/// Maximal azimuth interval around the forward direction bounded by the
/// nearest persistent elevation rise (curb) on each side. Without curbs the
/// whole ring extent is returned.
pub fn detect_road_band(ring: &[RingPoint], params: &CurbParams) -> Option<AzimuthInterval> {
    if ring.is_empty() {
        return None;
    }
    let forward = ring
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let da = (a.1.azimuth - params.forward_azimuth).abs();
            let db = (b.1.azimuth - params.forward_azimuth).abs();
            da.total_cmp(&db)
        })
        .map(|(i, _)| i)?;

    let mut nearby: Vec<f64> = ring
        .iter()
        .filter(|p| (p.azimuth - ring[forward].azimuth).abs() <= params.reference_window_deg)
        .map(|p| p.position.z)
        .collect();
    nearby.sort_by(f64::total_cmp);
    let reference = nearby[nearby.len() / 2];
    let elevated = |p: &RingPoint| p.position.z - reference >= params.elevation_jump;

    // A curb is an elevated run that persists for the minimum extent, or to
    // the end of the ring.
    let is_curb = |run: &mut dyn Iterator<Item = &RingPoint>, from: f64| {
        for p in run {
            if (p.azimuth - from).abs() >= params.min_curb_extent_deg {
                return true;
            }
            if !elevated(p) {
                return false;
            }
        }
        true
    };

    let mut upper = ring.len() - 1;
    for i in forward..ring.len() {
        if elevated(&ring[i]) && is_curb(&mut ring[i..].iter(), ring[i].azimuth) {
            if i == forward {
                return None;
            }
            upper = i - 1;
            break;
        }
    }
    let mut lower = 0;
    for i in (0..=forward).rev() {
        if elevated(&ring[i]) && is_curb(&mut ring[..=i].iter().rev(), ring[i].azimuth) {
            if i == forward {
                return None;
            }
            lower = i + 1;
            break;
        }
    }
    Some(AzimuthInterval {
        start: ring[lower].azimuth,
        end: ring[upper].azimuth,
    })
}

/// Minimum share of member points that must land on road or obstacle pixels
/// for a segment to survive the mask filter.
pub const MASK_MEMBERSHIP: f64 = 0.5;

/// Drops segments that lie off the road.
pub fn filter_segments_by_road(
    segments: Vec<ObstacleSegment>,
    scan: &RingScan,
    road: &RoadRegion,
    camera: Option<&CameraModel>,
    xi: Option<&ExtrinsicsSE3>,
) -> Result<Vec<ObstacleSegment>> {
    let in_band = |seg: &ObstacleSegment, band: Option<&AzimuthInterval>| {
        band.is_some_and(|b| b.contains_interval(seg.start.azimuth, seg.end.azimuth))
    };
    match road {
        RoadRegion::Unrestricted => Ok(segments),
        RoadRegion::Curbs(params) => {
            let bands: Vec<_> = scan
                .rings()
                .iter()
                .map(|ring| detect_road_band(ring, params))
                .collect();
            Ok(segments
                .into_iter()
                .filter(|s| in_band(s, bands[s.ring].as_ref()))
                .collect())
        }
        RoadRegion::Bands(bands) => Ok(segments
            .into_iter()
            .filter(|s| in_band(s, bands.get(s.ring).and_then(Option::as_ref)))
            .collect()),
        RoadRegion::Mask(mask) => {
            let (Some(camera), Some(xi)) = (camera, xi) else {
                return Err(Error::Config(
                    "mask road filter needs camera intrinsics and extrinsics".into(),
                ));
            };
            if (mask.width(), mask.height()) != (camera.width, camera.height) {
                return Err(Error::DimensionMismatch {
                    expected: (camera.width, camera.height),
                    found: (mask.width(), mask.height()),
                });
            }
            let projector = Projector::new(camera, xi);
            Ok(segments
                .into_iter()
                .filter(|seg| {
                    let on_road = seg
                        .points
                        .iter()
                        .filter_map(|p| projector.project(&p.position))
                        .filter(|px| {
                            matches!(
                                mask.label_at(px[0], px[1]),
                                Some(label::ROAD) | Some(label::OBSTACLE)
                            )
                        })
                        .count();
                    on_road as f64 >= MASK_MEMBERSHIP * seg.points.len() as f64
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring_geometry::{Breakpoint, GradientSign};
    use nalgebra::Vector3;

    fn seg(ring: usize, points: Vec<RingPoint>) -> ObstacleSegment {
        let first = points[0];
        let last = *points.last().unwrap();
        ObstacleSegment {
            ring,
            start: Breakpoint {
                ring,
                index: 0,
                azimuth: first.azimuth,
                sign: GradientSign::Negative,
            },
            end: Breakpoint {
                ring,
                index: points.len() - 1,
                azimuth: last.azimuth,
                sign: GradientSign::Positive,
            },
            spread: last.azimuth - first.azimuth,
            points,
        }
    }

    fn arc(az_from: f64, count: usize, range: f64, z: f64) -> Vec<RingPoint> {
        (0..count)
            .map(|i| {
                let a = (az_from + i as f64 * 0.2).to_radians();
                RingPoint::from_position(Vector3::new(range * a.cos(), range * a.sin(), z))
            })
            .collect()
    }

    #[test]
    fn segments_filtered_by_band() {
        let bands = vec![Some(AzimuthInterval {
            start: 80.0,
            end: 100.0,
        })];
        let inside = seg(0, arc(89.0, 5, 10.0, -1.7));
        let outside = seg(0, arc(120.0, 5, 10.0, -1.7));
        let scan = RingScan::empty();
        let kept = filter_segments_by_road(
            vec![inside.clone(), outside],
            &scan,
            &RoadRegion::Bands(bands),
            None,
            None,
        )
        .unwrap();
        assert_eq!(kept, vec![inside]);
    }

    #[test]
    fn flat_ring_band_covers_everything() {
        let ring = arc(40.0, 500, 10.0, -1.75);
        let band = detect_road_band(&ring, &CurbParams::default()).unwrap();
        assert_eq!(band.start, ring[0].azimuth);
        assert_eq!(band.end, ring[499].azimuth);
    }

    #[test]
    fn small_bump_is_not_a_curb() {
        let mut ring = arc(40.0, 500, 10.0, -1.75);
        for p in &mut ring[300..305] {
            p.position.z = -1.5;
        }
        let band = detect_road_band(&ring, &CurbParams::default()).unwrap();
        assert_eq!(band.end, ring[499].azimuth);
    }

    #[test]
    fn mask_filter_needs_camera() {
        let mask = SegmentationMask::filled(4, 4, 1).unwrap();
        let s = seg(0, arc(89.0, 3, 10.0, -1.0));
        let err = filter_segments_by_road(
            vec![s],
            &RingScan::empty(),
            &RoadRegion::Mask(mask),
            None,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
