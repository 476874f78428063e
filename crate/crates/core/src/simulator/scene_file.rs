use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use super::{straight_trajectory, BoxObstacle, Curb, LidarModel, SceneSpec};
use crate::error::{Error, ParseErrorKind, Result};
use crate::ring_geometry::RING_COUNT;
use crate::scene_io::{CameraModel, ExtrinsicsSE3};

const REPEATABLE: [&str; 2] = ["box", "curb"];
const SINGLE: [&str; 10] = [
    "sensor_height",
    "trajectory",
    "camera",
    "xi",
    "ring_angles",
    "azimuth_resolution",
    "max_range",
    "range_noise",
    "image_noise",
    "seed",
];

pub fn load_scene(path: &Path) -> Result<SceneSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scene(&text, path)
}

/// Parses a `key=value` scene description.
///
/// `box=cx cy cz sx sy sz` and `curb=offset height` may repeat;
/// `sensor_height` and `trajectory=straight <frames> <step>` are required.
/// Optional: `camera=fx fy cx cy width height`, `xi=<6 values>`,
/// `ring_angles=<16 degrees>`, `azimuth_resolution`, `max_range`,
/// `range_noise`, `image_noise`, `seed`.
pub fn parse_scene(text: &str, path: &Path) -> Result<SceneSpec> {
    let (camera, extrinsics) = SceneSpec::default_camera();
    let mut scene = SceneSpec {
        boxes: Vec::new(),
        curbs: Vec::new(),
        sensor_height: f64::NAN,
        camera,
        extrinsics,
        lidar: LidarModel::default(),
        trajectory: Vec::new(),
        image_noise: 0.0,
        seed: 0,
    };
    let mut seen: HashSet<&str> = HashSet::new();
    let mut trajectory: Option<(usize, f64)> = None;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed =
            |msg: String| Error::parse(path, lineno, ParseErrorKind::MalformedLine(msg));
        let Some((key, value)) = line.split_once('=') else {
            return Err(malformed("expected key=value".into()));
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(&key) = SINGLE.iter().chain(REPEATABLE.iter()).find(|k| **k == key) else {
            return Err(malformed(format!("unknown key `{key}`")));
        };
        if SINGLE.contains(&key) && !seen.insert(key) {
            return Err(Error::DuplicateKey {
                path: path.into(),
                line: lineno,
                key: key.into(),
            });
        }
        let numbers = |count: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = value
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| {
                            Error::parse(path, lineno, ParseErrorKind::InvalidNumber(t.into()))
                        })
                })
                .collect::<Result<_>>()?;
            if v.len() != count {
                return Err(malformed(format!(
                    "`{key}` needs {count} values, found {}",
                    v.len()
                )));
            }
            Ok(v)
        };
        let invalid = |e: Error| Error::OutOfRange {
            path: path.into(),
            key: key.into(),
            reason: e.to_string(),
        };
        match key {
            "box" => {
                let v = numbers(6)?;
                let b = BoxObstacle::new(
                    Vector3::new(v[0], v[1], v[2]),
                    Vector3::new(v[3], v[4], v[5]),
                )
                .map_err(invalid)?;
                scene.boxes.push(b);
            }
            "curb" => {
                let v = numbers(2)?;
                scene.curbs.push(Curb {
                    offset: v[0],
                    height: v[1],
                });
            }
            "sensor_height" => scene.sensor_height = numbers(1)?[0],
            "trajectory" => {
                let parts: Vec<&str> = value.split_whitespace().collect();
                let [kind, n, step] = parts[..] else {
                    return Err(malformed(
                        "expected `trajectory=straight <frames> <step>`".into(),
                    ));
                };
                if kind != "straight" {
                    return Err(malformed(format!("unknown trajectory kind `{kind}`")));
                }
                let n: usize = n.parse().map_err(|_| {
                    Error::parse(path, lineno, ParseErrorKind::InvalidNumber(n.into()))
                })?;
                let step: f64 = step
                    .parse()
                    .ok()
                    .filter(|s: &f64| s.is_finite())
                    .ok_or_else(|| {
                        Error::parse(path, lineno, ParseErrorKind::InvalidNumber(step.into()))
                    })?;
                if n == 0 {
                    return Err(Error::OutOfRange {
                        path: path.into(),
                        key: key.into(),
                        reason: "trajectory needs at least one frame".into(),
                    });
                }
                trajectory = Some((n, step));
            }
            "camera" => {
                let v = numbers(6)?;
                if v[4].fract() != 0.0 || v[5].fract() != 0.0 || v[4] < 1.0 || v[5] < 1.0 {
                    return Err(malformed(
                        "camera width and height must be positive integers".into(),
                    ));
                }
                scene.camera = CameraModel::new(v[0], v[1], v[2], v[3], v[4] as u32, v[5] as u32)
                    .map_err(invalid)?;
            }
            "xi" => {
                let v = numbers(6)?;
                scene.extrinsics = ExtrinsicsSE3::from_array([v[0], v[1], v[2], v[3], v[4], v[5]])
                    .map_err(invalid)?;
            }
            "ring_angles" => {
                let v = numbers(RING_COUNT)?;
                scene.lidar.vertical_angles.copy_from_slice(&v);
            }
            "azimuth_resolution" => scene.lidar.azimuth_resolution = numbers(1)?[0],
            "max_range" => scene.lidar.max_range = numbers(1)?[0],
            "range_noise" => scene.lidar.range_noise = numbers(1)?[0],
            "image_noise" => scene.image_noise = numbers(1)?[0],
            "seed" => {
                scene.seed = value.parse().map_err(|_| {
                    Error::parse(path, lineno, ParseErrorKind::InvalidNumber(value.into()))
                })?;
            }
            _ => unreachable!("key list is exhaustive"),
        }
    }

    for key in ["sensor_height", "trajectory"] {
        if !seen.contains(key) {
            return Err(Error::MissingKey {
                path: path.into(),
                key: key.into(),
            });
        }
    }
    let (n, step) = trajectory.expect("trajectory key was seen");
    scene.trajectory = straight_trajectory(n, step, scene.sensor_height);
    scene.validate().map_err(|e| Error::OutOfRange {
        path: path.into(),
        key: "scene".into(),
        reason: e.to_string(),
    })?;
    Ok(scene)
}

/// Scene text that `parse_scene` reads back to the same scene, given a
/// straight trajectory.
pub fn format_scene(scene: &SceneSpec) -> String {
    let mut out = String::new();
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(out, "sensor_height={}", scene.sensor_height);
    let step = if scene.trajectory.len() > 1 {
        scene.trajectory[1].translation.y - scene.trajectory[0].translation.y
    } else {
        1.0
    };
    let _ = writeln!(
        out,
        "trajectory=straight {} {}",
        scene.trajectory.len(),
        step
    );
    for c in &scene.curbs {
        let _ = writeln!(out, "curb={} {}", c.offset, c.height);
    }
    for b in &scene.boxes {
        let _ = writeln!(
            out,
            "box={}",
            join(&[b.center.x, b.center.y, b.center.z, b.size.x, b.size.y, b.size.z])
        );
    }
    let c = &scene.camera;
    let _ = writeln!(
        out,
        "camera={} {} {} {} {} {}",
        c.fx, c.fy, c.cx, c.cy, c.width, c.height
    );
    let _ = writeln!(out, "xi={}", join(&scene.extrinsics.to_array()));
    let _ = writeln!(out, "ring_angles={}", join(&scene.lidar.vertical_angles));
    let _ = writeln!(out, "azimuth_resolution={}", scene.lidar.azimuth_resolution);
    let _ = writeln!(out, "max_range={}", scene.lidar.max_range);
    let _ = writeln!(out, "range_noise={}", scene.lidar.range_noise);
    let _ = writeln!(out, "image_noise={}", scene.image_noise);
    let _ = writeln!(out, "seed={}", scene.seed);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<SceneSpec> {
        parse_scene(text, Path::new("scene.txt"))
    }

    #[test]
    fn minimal_scene() {
        let s = parse("sensor_height=1.75\ntrajectory=straight 10 1.0\nbox=0 10 0.15 0.3 0.3 0.3\ncurb=-4 0.15\n").unwrap();
        assert_eq!(s.boxes.len(), 1);
        assert_eq!(s.curbs.len(), 1);
        assert_eq!(s.trajectory.len(), 10);
        for w in s.trajectory.windows(2) {
            assert_eq!((w[1].translation - w[0].translation).norm(), 1.0);
        }
    }

    #[test]
    fn required_keys() {
        let err = parse("trajectory=straight 1 1\n").unwrap_err();
        assert!(matches!(err, Error::MissingKey { ref key, .. } if key == "sensor_height"));
        let err = parse("sensor_height=1.75\n").unwrap_err();
        assert!(matches!(err, Error::MissingKey { ref key, .. } if key == "trajectory"));
    }

    #[test]
    fn bad_lines() {
        assert!(matches!(
            parse("sensor_height=1.75\ntrajectory=straight 1 1\nbox=1 2 3\n").unwrap_err(),
            Error::Parse { line: 3, .. }
        ));
        assert!(matches!(
            parse("sensor_height=1.75\nsensor_height=2\n").unwrap_err(),
            Error::DuplicateKey { line: 2, .. }
        ));
        assert!(parse("sensor_height=1.75\ntrajectory=circle 1 1\n").is_err());
        assert!(parse("sensor_height=1.75\ntrajectory=straight 1 1\nwarp=9\n").is_err());
        assert!(parse("sensor_height=1.0\ntrajectory=straight 1 1\nbox=0 5 1 1 1 1\n").is_err());
    }

    #[test]
    fn format_round_trip() {
        let text = "sensor_height=1.75\ntrajectory=straight 5 0.5\nbox=0.5 12 0.2 0.3 0.4 0.4\ncurb=3.5 0.12\n\
                    ring_angles=-15 -13 -11 -9 -7 -5 -3 -2 1 3 5 7 9 11 13 15\nrange_noise=0.01\nseed=9\n";
        let s = parse(text).unwrap();
        assert_eq!(s.lidar.vertical_angles[7], -2.0);
        let again = parse(&format_scene(&s)).unwrap();
        assert_eq!(again, s);
    }
}
