use std::fmt::Write as _;
use std::path::Path;

use super::ObstacleSegment;
use crate::error::{Error, Result};

/// One line per segment: `ring azA azB n_points spread_deg min_range`.
pub fn format_segment_report(segments: &[ObstacleSegment]) -> String {
    let mut out = String::new();
    for s in segments {
        writeln!(
            out,
            "{} {:.6} {:.6} {} {:.6} {:.6}",
            s.ring,
            s.start.azimuth,
            s.end.azimuth,
            s.points.len(),
            s.spread,
            s.min_range()
        )
        .unwrap();
    }
    out
}

/// Writes the report, preceded by `header` lines (each prefixed with `# `).
pub fn write_segment_report(
    path: &Path,
    header: &[String],
    segments: &[ObstacleSegment],
) -> Result<()> {
    let mut text: String = header.iter().map(|h| format!("# {h}\n")).collect();
    text.push_str(&format_segment_report(segments));
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
