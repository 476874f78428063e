//! Range-discontinuity detection along LiDAR rings.
//!
//! Each ring is treated as a linear sequence ordered by azimuth. For every
//! consecutive triplet the range of the third point is predicted from the
//! first two under a straight-surface assumption; a large residual marks a
//! breakpoint. A breakpoint where the range drops (`-`) followed by one where
//! it rises (`+`) brackets something nearer than its background, and if the
//! pair spans a small azimuthal angle it is reported as an obstacle segment.

mod report;
mod road;

use nalgebra::Vector3;
use thiserror::Error;

pub use report::{format_segment_report, write_segment_report};
pub use road::{
    detect_road_band, filter_segments_by_road, AzimuthInterval, CurbParams, RoadRegion,
};

use crate::error::{Error, Result};
use crate::scene_io::{CameraModel, ExtrinsicsSE3};

pub const RING_COUNT: usize = 16;

/// Nominal VLP-16 elevation angles in degrees, ascending.
pub const VLP16_VERTICAL_ANGLES: [f64; RING_COUNT] = [
    -15.0, -13.0, -11.0, -9.0, -7.0, -5.0, -3.0, -1.0, 1.0, 3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0,
];

/// Smallest admissible denominator in [`predict_range`], in meters.
pub const PREDICT_EPSILON: f64 = 1e-6;

/// Tolerance on `|position| == range`, in meters.
pub const RANGE_CONSISTENCY_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate geometry: denominator {denominator:e} (ray nearly tangent to surface)")]
    Degenerate { denominator: f64 },
    #[error("invalid range input d_i={d_i} d_i1={d_i1}")]
    InvalidRange { d_i: f64, d_i1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingPoint {
    /// Degrees in `[0, 360)`, counter-clockwise from the LiDAR +x axis.
    pub azimuth: f64,
    /// Distance from the LiDAR origin, meters.
    pub range: f64,
    /// LiDAR-frame position, meters.
    pub position: Vector3<f64>,
}

impl RingPoint {
    pub fn from_position(position: Vector3<f64>) -> Self {
        RingPoint {
            azimuth: azimuth_of(&position),
            range: position.norm(),
            position,
        }
    }
}

/// Azimuth of a LiDAR-frame point in degrees, normalized to `[0, 360)`.
pub fn azimuth_of(p: &Vector3<f64>) -> f64 {
    let deg = p.y.atan2(p.x).to_degrees();
    let deg = if deg < 0.0 { deg + 360.0 } else { deg };
    if deg >= 360.0 {
        0.0
    } else {
        deg
    }
}

/// One sweep: up to 16 rings, each strictly ordered by azimuth.
#[derive(Debug, Clone, PartialEq)]
pub struct RingScan {
    rings: Vec<Vec<RingPoint>>,
    vertical_angles: [f64; RING_COUNT],
}

impl RingScan {
    pub fn empty() -> Self {
        RingScan {
            rings: vec![Vec::new(); RING_COUNT],
            vertical_angles: VLP16_VERTICAL_ANGLES,
        }
    }

    /// Builds a scan from pre-sorted rings, validating ordering and ranges.
    pub fn new(rings: Vec<Vec<RingPoint>>, vertical_angles: [f64; RING_COUNT]) -> Result<Self> {
        if rings.len() > RING_COUNT {
            return Err(Error::Invalid(format!(
                "{} rings exceed the {RING_COUNT}-ring limit",
                rings.len()
            )));
        }
        let mut rings = rings;
        rings.resize(RING_COUNT, Vec::new());
        for (r, ring) in rings.iter().enumerate() {
            for p in ring {
                if !(p.range.is_finite() && p.range > 0.0) {
                    return Err(Error::Invalid(format!(
                        "ring {r}: invalid range {}",
                        p.range
                    )));
                }
            }
            if let Some(w) = ring.windows(2).find(|w| w[1].azimuth <= w[0].azimuth) {
                return Err(Error::Invalid(format!(
                    "ring {r}: azimuth {} does not increase past {}",
                    w[1].azimuth, w[0].azimuth
                )));
            }
        }
        Ok(RingScan {
            rings,
            vertical_angles,
        })
    }

    pub fn rings(&self) -> &[Vec<RingPoint>] {
        &self.rings
    }

    pub fn ring(&self, index: usize) -> &[RingPoint] {
        &self.rings[index]
    }

    pub fn vertical_angles(&self) -> &[f64; RING_COUNT] {
        &self.vertical_angles
    }

    pub fn point_count(&self) -> usize {
        self.rings.iter().map(Vec::len).sum()
    }

    pub fn non_empty_rings(&self) -> usize {
        self.rings.iter().filter(|r| !r.is_empty()).count()
    }
}

/// Predicted range of the next sample on a straight surface, from two
/// consecutive ranges separated by azimuth step `theta` (radians):
/// `d_p = d_i * d_i1 / (2 * d_i * cos(theta) - d_i1)`.
pub fn predict_range(d_i: f64, d_i1: f64, theta: f64) -> Result<f64, GeometryError> {
    if !(d_i > 0.0 && d_i1 > 0.0 && d_i.is_finite() && d_i1.is_finite()) {
        return Err(GeometryError::InvalidRange { d_i, d_i1 });
    }
    let denominator = 2.0 * d_i * theta.cos() - d_i1;
    if !(denominator > PREDICT_EPSILON) {
        return Err(GeometryError::Degenerate { denominator });
    }
    Ok(d_i * d_i1 / denominator)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GradientSign {
    /// Measured range is shorter than predicted: entering a nearer object.
    Negative,
    /// Measured range is longer than predicted: leaving a nearer object.
    Positive,
}

impl GradientSign {
    pub fn as_i8(self) -> i8 {
        match self {
            GradientSign::Negative => -1,
            GradientSign::Positive => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakpoint {
    pub ring: usize,
    /// Index of the point within its ring.
    pub index: usize,
    pub azimuth: f64,
    pub sign: GradientSign,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BreakpointScan {
    pub breakpoints: Vec<Breakpoint>,
    /// Triplets skipped because the prediction was degenerate.
    pub degenerate: usize,
}

/// Flags every point whose range departs from the straight-surface prediction
/// by at least `d_th` meters.
///
/// The prediction step for triplet `(i, i+1, i+2)` is the mean azimuth spacing
/// of the triplet. When point `i+1` is itself a breakpoint the pair `(i, i+1)`
/// straddles the discontinuity and cannot predict a surface, so point `i+2` is
/// compared against the range of `i+1` instead. This keeps a single
/// discontinuity from spawning a second, opposite-signed breakpoint one sample
/// later and lets one-sample obstacles close with a `+` breakpoint.
pub fn detect_breakpoints(ring_index: usize, ring: &[RingPoint], d_th: f64) -> BreakpointScan {
    let mut out = BreakpointScan::default();
    if ring.len() < 3 {
        return out;
    }
    let mut flagged = vec![false; ring.len()];
    for i in 0..ring.len() - 2 {
        let (a, b, c) = (&ring[i], &ring[i + 1], &ring[i + 2]);
        let predicted = if flagged[i + 1] {
            b.range
        } else {
            let theta = ((c.azimuth - a.azimuth) / 2.0).to_radians();
            match predict_range(a.range, b.range, theta) {
                Ok(d) => d,
                Err(_) => {
                    out.degenerate += 1;
                    continue;
                }
            }
        };
        let residual = c.range - predicted;
        if residual.abs() >= d_th {
            flagged[i + 2] = true;
            out.breakpoints.push(Breakpoint {
                ring: ring_index,
                index: i + 2,
                azimuth: c.azimuth,
                sign: if residual < 0.0 {
                    GradientSign::Negative
                } else {
                    GradientSign::Positive
                },
            });
        }
    }
    out
}

/// Ring points bracketed by a `(-, +)` breakpoint pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleSegment {
    pub ring: usize,
    pub start: Breakpoint,
    pub end: Breakpoint,
    /// Points from `start` to `end` inclusive.
    pub points: Vec<RingPoint>,
    /// `end.azimuth - start.azimuth`, degrees.
    pub spread: f64,
}

impl ObstacleSegment {
    /// Points on the obstacle surface itself. The closing `+` breakpoint is the
    /// first sample back on the background and is excluded.
    pub fn obstacle_points(&self) -> &[RingPoint] {
        &self.points[..self.points.len() - 1]
    }

    pub fn min_range(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.range)
            .fold(f64::INFINITY, f64::min)
    }

    /// Mean LiDAR-frame position of [`Self::obstacle_points`].
    pub fn obstacle_centroid(&self) -> Vector3<f64> {
        let pts = self.obstacle_points();
        pts.iter().map(|p| p.position).sum::<Vector3<f64>>() / pts.len() as f64
    }

    /// Positions of [`Self::obstacle_points`].
    pub fn positions(&self) -> impl Iterator<Item = Vector3<f64>> + '_ {
        self.obstacle_points().iter().map(|p| p.position)
    }
}

/// Pairs breakpoints left to right. An open `-` breakpoint closes at the next
/// `+` if the spread is within `max_spread_deg`; a later `-` replaces an open
/// one, and a `+` beyond the spread discards it.
pub fn isolate_obstacle_segments(
    breakpoints: &[Breakpoint],
    ring: &[RingPoint],
    max_spread_deg: f64,
) -> Vec<ObstacleSegment> {
    let mut segments = Vec::new();
    let mut open: Option<&Breakpoint> = None;
    for bp in breakpoints {
        match bp.sign {
            GradientSign::Negative => open = Some(bp),
            GradientSign::Positive => {
                if let Some(start) = open.take() {
                    let spread = bp.azimuth - start.azimuth;
                    if spread > 0.0 && spread <= max_spread_deg && bp.index > start.index {
                        segments.push(ObstacleSegment {
                            ring: start.ring,
                            start: *start,
                            end: *bp,
                            points: ring[start.index..=bp.index].to_vec(),
                            spread,
                        });
                    }
                }
            }
        }
    }
    segments
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionParams {
    /// Breakpoint threshold, meters.
    pub d_th: f64,
    /// Largest azimuthal spread of a small obstacle, degrees.
    pub max_spread_deg: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            d_th: 0.4,
            max_spread_deg: 2.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanDetections {
    pub segments: Vec<ObstacleSegment>,
    pub breakpoints: usize,
    pub degenerate_triplets: usize,
}

/// Runs breakpoint detection, segment isolation and road filtering on every
/// ring and concatenates the results in ring order.
pub fn detect_scan(
    scan: &RingScan,
    params: &DetectionParams,
    road: &RoadRegion,
    camera: Option<&CameraModel>,
    xi: Option<&ExtrinsicsSE3>,
) -> Result<ScanDetections> {
    if !(params.d_th > 0.0) || !(params.max_spread_deg > 0.0) {
        return Err(Error::Config(format!(
            "d_th and max_spread must be positive, got {} and {}",
            params.d_th, params.max_spread_deg
        )));
    }
    let mut out = ScanDetections::default();
    let mut candidates = Vec::new();
    for (r, ring) in scan.rings().iter().enumerate() {
        let found = detect_breakpoints(r, ring, params.d_th);
        out.breakpoints += found.breakpoints.len();
        out.degenerate_triplets += found.degenerate;
        candidates.extend(isolate_obstacle_segments(
            &found.breakpoints,
            ring,
            params.max_spread_deg,
        ));
    }
    out.segments = filter_segments_by_road(candidates, scan, road, camera, xi)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ring_from(ranges: &[f64], azimuths: &[f64]) -> Vec<RingPoint> {
        ranges
            .iter()
            .zip(azimuths)
            .map(|(&d, &az)| {
                let a = az.to_radians();
                RingPoint {
                    azimuth: az,
                    range: d,
                    position: Vector3::new(d * a.cos(), d * a.sin(), 0.0),
                }
            })
            .collect()
    }

    /// Ranges of rays from the origin at the given azimuths onto the line
    /// `n . p = c` (`n` unit normal, `c > 0`), by direct intersection.
    fn wall_ranges(normal_angle: f64, c: f64, azimuths: &[f64]) -> Vec<f64> {
        azimuths
            .iter()
            .map(|az| c / (az.to_radians() - normal_angle).cos())
            .collect()
    }

    #[test]
    fn predict_range_zero_angle_identity() {
        assert_eq!(predict_range(10.0, 10.0, 0.0).unwrap(), 10.0);
    }

    #[test]
    fn predict_range_on_wall() {
        let d0 = 5.0;
        let d1 = 5.0 / 1f64.to_radians().cos();
        let dp = predict_range(d0, d1, 1f64.to_radians()).unwrap();
        assert!((dp - 5.0 / 2f64.to_radians().cos()).abs() < 1e-9);
    }

    #[test]
    fn predict_range_tangent_is_degenerate() {
        let err = predict_range(10.0, 10.0, 60f64.to_radians()).unwrap_err();
        assert!(matches!(err, GeometryError::Degenerate { .. }));
        assert!(predict_range(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn breakpoint_positive_jump() {
        let ring = ring_from(&[10.0, 10.0, 10.5], &[0.0, 0.2, 0.4]);
        let found = detect_breakpoints(0, &ring, 0.4);
        assert_eq!(found.breakpoints.len(), 1);
        assert_eq!(found.breakpoints[0].index, 2);
        assert_eq!(found.breakpoints[0].sign, GradientSign::Positive);
    }

    #[test]
    fn breakpoint_negative_jump() {
        let ring = ring_from(&[10.0, 10.0, 9.5], &[0.0, 0.2, 0.4]);
        let found = detect_breakpoints(0, &ring, 0.4);
        assert_eq!(found.breakpoints.len(), 1);
        assert_eq!(found.breakpoints[0].sign, GradientSign::Negative);
    }

    #[test]
    fn short_rings_yield_nothing() {
        let ring = ring_from(&[10.0, 2.0], &[0.0, 0.2]);
        assert!(detect_breakpoints(0, &ring, 0.4).breakpoints.is_empty());
    }

    #[test]
    fn degenerate_triplets_are_counted() {
        // Second range more than twice the first: denominator negative.
        let ring = ring_from(&[1.0, 2.5, 2.6], &[0.0, 0.2, 0.4]);
        let found = detect_breakpoints(0, &ring, 0.4);
        assert_eq!(found.degenerate, 1);
        assert!(found.breakpoints.is_empty());
    }

    #[test]
    fn step_produces_single_breakpoint() {
        let az: Vec<f64> = (0..8).map(|i| i as f64 * 0.2).collect();
        let ring = ring_from(&[10.0, 10.0, 10.0, 10.0, 8.0, 8.0, 8.0, 8.0], &az);
        let found = detect_breakpoints(0, &ring, 0.4);
        assert_eq!(found.breakpoints.len(), 1);
        assert_eq!(found.breakpoints[0].index, 4);
    }

    #[test]
    fn single_sample_obstacle_is_bracketed() {
        let az: Vec<f64> = (0..7).map(|i| i as f64 * 0.2).collect();
        let ring = ring_from(&[20.0, 20.0, 20.0, 15.0, 20.0, 20.0, 20.0], &az);
        let found = detect_breakpoints(0, &ring, 0.4);
        let signs: Vec<_> = found
            .breakpoints
            .iter()
            .map(|b| (b.index, b.sign))
            .collect();
        assert_eq!(
            signs,
            vec![(3, GradientSign::Negative), (4, GradientSign::Positive)]
        );
        let segs = isolate_obstacle_segments(&found.breakpoints, &ring, 2.0);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].obstacle_points().len(), 1);
        assert_eq!(segs[0].obstacle_points()[0].range, 15.0);
    }

    fn bp(index: usize, azimuth: f64, sign: GradientSign) -> Breakpoint {
        Breakpoint {
            ring: 0,
            index,
            azimuth,
            sign,
        }
    }

    fn flat_ring(n: usize, step: f64) -> Vec<RingPoint> {
        let az: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
        ring_from(&vec![10.0; n], &az)
    }

    #[test]
    fn segment_below_spread_threshold() {
        let ring = flat_ring(80, 0.2);
        let bps = [
            bp(50, 10.0, GradientSign::Negative),
            bp(55, 11.0, GradientSign::Positive),
        ];
        let segs = isolate_obstacle_segments(&bps, &ring, 2.0);
        assert_eq!(segs.len(), 1);
        assert!((segs[0].spread - 1.0).abs() < 1e-12);
        assert_eq!(segs[0].points.len(), 6);
    }

    #[test]
    fn segment_above_spread_threshold_is_dropped() {
        let ring = flat_ring(80, 0.2);
        let bps = [
            bp(50, 10.0, GradientSign::Negative),
            bp(75, 15.0, GradientSign::Positive),
        ];
        assert!(isolate_obstacle_segments(&bps, &ring, 2.0).is_empty());
    }

    #[test]
    fn wrong_gradient_order_is_dropped() {
        let ring = flat_ring(80, 0.2);
        let bps = [
            bp(50, 10.0, GradientSign::Positive),
            bp(55, 11.0, GradientSign::Negative),
        ];
        assert!(isolate_obstacle_segments(&bps, &ring, 2.0).is_empty());
        assert!(isolate_obstacle_segments(&[], &ring, 2.0).is_empty());
    }

    #[test]
    fn later_negative_restarts_pairing() {
        let ring = flat_ring(80, 0.2);
        let bps = [
            bp(40, 8.0, GradientSign::Negative),
            bp(50, 10.0, GradientSign::Negative),
            bp(55, 11.0, GradientSign::Positive),
        ];
        let segs = isolate_obstacle_segments(&bps, &ring, 2.0);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].start.index, 50);
    }

    proptest! {
        #[test]
        fn straight_walls_have_no_breakpoints(
            normal in -0.6f64..0.6,
            c in 2.0f64..30.0,
            step in 0.1f64..0.4,
            n in 3usize..120,
        ) {
            let az: Vec<f64> = (0..n).map(|i| 60.0 + i as f64 * step).collect();
            let normal = normal + 75f64.to_radians();
            let ranges = wall_ranges(normal, c, &az);
            let ring = ring_from(&ranges, &az);
            prop_assert!(detect_breakpoints(0, &ring, 0.4).breakpoints.is_empty());
        }

        #[test]
        fn predict_range_is_one_homogeneous(
            d0 in 1.0f64..50.0, ratio in 0.9f64..1.1, theta in 0.001f64..0.05, k in 0.1f64..10.0,
        ) {
            let d1 = d0 * ratio;
            let base = predict_range(d0, d1, theta).unwrap();
            let scaled = predict_range(k * d0, k * d1, theta).unwrap();
            prop_assert!((scaled - k * base).abs() <= 1e-9 * scaled.abs());
        }

        #[test]
        fn breakpoints_invariant_to_azimuth_shift_and_range_scale(
            ranges in prop::collection::vec(5.0f64..30.0, 3..60),
            shift in 0.0f64..200.0,
            k_exp in -3i32..4,
        ) {
            // Powers of two scale exactly in floating point.
            let k = 2f64.powi(k_exp);
            let az: Vec<f64> = (0..ranges.len()).map(|i| 10.0 + i as f64 * 0.2).collect();
            let base = detect_breakpoints(0, &ring_from(&ranges, &az), 0.4);

            let shifted: Vec<f64> = az.iter().map(|a| a + shift).collect();
            let moved = detect_breakpoints(0, &ring_from(&ranges, &shifted), 0.4);
            let key = |s: &BreakpointScan| s.breakpoints.iter().map(|b| (b.index, b.sign)).collect::<Vec<_>>();
            prop_assert_eq!(key(&base), key(&moved));

            let scaled_ranges: Vec<f64> = ranges.iter().map(|d| d * k).collect();
            let scaled = detect_breakpoints(0, &ring_from(&scaled_ranges, &az), 0.4 * k);
            prop_assert_eq!(key(&base), key(&scaled));
        }

        #[test]
        fn segments_satisfy_sign_and_spread(
            ranges in prop::collection::vec(5.0f64..30.0, 3..100),
            max_spread in 0.5f64..4.0,
        ) {
            let az: Vec<f64> = (0..ranges.len()).map(|i| i as f64 * 0.2).collect();
            let ring = ring_from(&ranges, &az);
            let found = detect_breakpoints(0, &ring, 0.4);
            for seg in isolate_obstacle_segments(&found.breakpoints, &ring, max_spread) {
                prop_assert_eq!(seg.start.sign, GradientSign::Negative);
                prop_assert_eq!(seg.end.sign, GradientSign::Positive);
                prop_assert!(seg.spread > 0.0 && seg.spread <= max_spread);
                prop_assert_eq!(seg.points.len(), seg.end.index - seg.start.index + 1);
            }
        }
    }
}
