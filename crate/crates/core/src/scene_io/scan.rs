use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, ParseErrorKind, Result};
use crate::ring_geometry::{
    RingPoint, RingScan, RANGE_CONSISTENCY_TOLERANCE, RING_COUNT, VLP16_VERTICAL_ANGLES,
};

pub const SCAN_HEADER: &str = "#VLP16-SCAN v1";

pub fn load_scan(path: &Path) -> Result<RingScan> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scan(&text, path)
}

/// Parses SCAN v1 text. Points may be listed in any order; rings come back
/// sorted by azimuth. `path` only labels errors.
pub fn parse_scan(text: &str, path: &Path) -> Result<RingScan> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == SCAN_HEADER => {}
        _ => {
            return Err(Error::parse(
                path,
                1,
                ParseErrorKind::MalformedHeader {
                    expected: SCAN_HEADER,
                },
            ))
        }
    }

    let mut rings: Vec<Vec<(usize, RingPoint)>> = vec![Vec::new(); RING_COUNT];
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(Error::parse(
                path,
                lineno,
                ParseErrorKind::MalformedLine(format!("expected 6 fields, found {}", fields.len())),
            ));
        }
        let ring: i64 = fields[0].parse().map_err(|_| {
            Error::parse(
                path,
                lineno,
                ParseErrorKind::InvalidNumber(fields[0].into()),
            )
        })?;
        if !(0..RING_COUNT as i64).contains(&ring) {
            return Err(Error::parse(
                path,
                lineno,
                ParseErrorKind::RingOutOfRange(ring),
            ));
        }
        let mut values = [0.0f64; 5];
        for (slot, field) in values.iter_mut().zip(&fields[1..]) {
            *slot = field.parse().map_err(|_| {
                Error::parse(path, lineno, ParseErrorKind::InvalidNumber((*field).into()))
            })?;
        }
        let [azimuth, range, x, y, z] = values;
        if !(range.is_finite() && range > 0.0) {
            return Err(Error::parse(
                path,
                lineno,
                ParseErrorKind::NonFiniteRange(range),
            ));
        }
        if !(0.0..360.0).contains(&azimuth) {
            return Err(Error::parse(
                path,
                lineno,
                ParseErrorKind::AzimuthOutOfRange(azimuth),
            ));
        }
        let position = Vector3::new(x, y, z);
        let norm = position.norm();
        if !((norm - range).abs() <= RANGE_CONSISTENCY_TOLERANCE) {
            return Err(Error::parse(
                path,
                lineno,
                ParseErrorKind::RangeMismatch { range, norm },
            ));
        }
        rings[ring as usize].push((
            lineno,
            RingPoint {
                azimuth,
                range,
                position,
            },
        ));
    }

    let mut sorted = Vec::with_capacity(RING_COUNT);
    let mut angles = VLP16_VERTICAL_ANGLES;
    for (r, mut ring) in rings.into_iter().enumerate() {
        ring.sort_by(|a, b| a.1.azimuth.total_cmp(&b.1.azimuth));
        if let Some(w) = ring.windows(2).find(|w| w[1].1.azimuth <= w[0].1.azimuth) {
            return Err(Error::parse(
                path,
                w[0].0.max(w[1].0),
                ParseErrorKind::NonMonotoneAzimuth {
                    ring: r,
                    azimuth: w[1].1.azimuth,
                },
            ));
        }
        if !ring.is_empty() {
            let mean = ring
                .iter()
                .map(|(_, p)| (p.position.z / p.range).clamp(-1.0, 1.0).asin())
                .sum::<f64>()
                / ring.len() as f64;
            angles[r] = mean.to_degrees();
        }
        sorted.push(ring.into_iter().map(|(_, p)| p).collect());
    }
    RingScan::new(sorted, angles)
}

/// SCAN v1 text, rings in index order. Floats use the shortest representation
/// that parses back to the same value.
pub fn format_scan(scan: &RingScan) -> String {
    let mut out = String::with_capacity(scan.point_count() * 64 + 16);
    out.push_str(SCAN_HEADER);
    out.push('\n');
    for (r, ring) in scan.rings().iter().enumerate() {
        for p in ring {
            writeln!(
                out,
                "{r} {} {} {} {} {}",
                p.azimuth, p.range, p.position.x, p.position.y, p.position.z
            )
            .unwrap();
        }
    }
    out
}

pub fn save_scan(scan: &RingScan, path: &Path) -> Result<()> {
    std::fs::write(path, format_scan(scan)).map_err(|e| Error::io(path, e))
}
