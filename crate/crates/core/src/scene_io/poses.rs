use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use super::Pose;
use crate::error::{Error, ParseErrorKind, Result};

pub fn load_poses(path: &Path) -> Result<Vec<Pose>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_poses(&text, path)
}

/// One `[R|t]` row-major 3x4 matrix per non-blank line. Frame ids are the
/// zero-based line order; callers remap them to sequence ids.
pub fn parse_poses(text: &str, path: &Path) -> Result<Vec<Pose>> {
    let mut poses = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|v| {
                v.parse().map_err(|_| {
                    Error::parse(path, lineno, ParseErrorKind::InvalidNumber(v.into()))
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != 12 {
            return Err(Error::parse(
                path,
                lineno,
                ParseErrorKind::MalformedLine(format!(
                    "expected 12 values, found {}",
                    values.len()
                )),
            ));
        }
        let rotation = Matrix3::new(
            values[0], values[1], values[2], values[4], values[5], values[6], values[8], values[9],
            values[10],
        );
        let translation = Vector3::new(values[3], values[7], values[11]);
        let pose = Pose::new(rotation, translation, poses.len() as u32).map_err(|e| {
            Error::parse(path, lineno, ParseErrorKind::MalformedLine(e.to_string()))
        })?;
        poses.push(pose);
    }
    Ok(poses)
}

pub fn format_poses(poses: &[Pose]) -> String {
    let mut out = String::new();
    for p in poses {
        let (r, t) = (&p.rotation, &p.translation);
        writeln!(
            out,
            "{} {} {} {} {} {} {} {} {} {} {} {}",
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z
        )
        .unwrap();
    }
    out
}

pub fn save_poses(poses: &[Pose], path: &Path) -> Result<()> {
    std::fs::write(path, format_poses(poses)).map_err(|e| Error::io(path, e))
}
