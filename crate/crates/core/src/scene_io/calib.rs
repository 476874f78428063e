use std::collections::HashMap;
use std::path::Path;

use nalgebra::Vector3;

use super::{CameraModel, ExtrinsicsSE3};
use crate::error::{Error, ParseErrorKind, Result};

const KEYS: [&str; 7] = ["fx", "fy", "cx", "cy", "width", "height", "xi"];

pub fn load_calibration(path: &Path) -> Result<(CameraModel, ExtrinsicsSE3)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_calibration(&text, path)
}

/// Parses `key=value` calibration text. Blank lines and `#` comments are
/// ignored; every key must appear exactly once.
pub fn parse_calibration(text: &str, path: &Path) -> Result<(CameraModel, ExtrinsicsSE3)> {
    let mut values: HashMap<&str, (usize, &str)> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::parse(
                path,
                lineno,
                ParseErrorKind::MalformedLine("expected key=value".into()),
            ));
        };
        let key = key.trim();
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            return Err(Error::parse(
                path,
                lineno,
                ParseErrorKind::MalformedLine(format!("unknown key `{key}`")),
            ));
        };
        if values.insert(known, (lineno, value.trim())).is_some() {
            return Err(Error::DuplicateKey {
                path: path.into(),
                line: lineno,
                key: key.into(),
            });
        }
    }

    let get = |key: &str| {
        values.get(key).copied().ok_or_else(|| Error::MissingKey {
            path: path.into(),
            key: key.into(),
        })
    };
    let float = |key: &str| -> Result<f64> {
        let (line, v) = get(key)?;
        v.parse()
            .map_err(|_| Error::parse(path, line, ParseErrorKind::InvalidNumber(v.into())))
    };
    let int = |key: &str| -> Result<u32> {
        let (line, v) = get(key)?;
        v.parse()
            .map_err(|_| Error::parse(path, line, ParseErrorKind::InvalidNumber(v.into())))
    };
    let out_of_range = |key: &str, reason: String| Error::OutOfRange {
        path: path.into(),
        key: key.into(),
        reason,
    };

    let (fx, fy, cx, cy) = (float("fx")?, float("fy")?, float("cx")?, float("cy")?);
    let (width, height) = (int("width")?, int("height")?);
    let (xi_line, xi_text) = get("xi")?;
    let xi: Vec<f64> = xi_text
        .split_whitespace()
        .map(|v| {
            v.parse()
                .map_err(|_| Error::parse(path, xi_line, ParseErrorKind::InvalidNumber(v.into())))
        })
        .collect::<Result<_>>()?;
    if xi.len() != 6 {
        return Err(Error::parse(
            path,
            xi_line,
            ParseErrorKind::MalformedLine(format!("xi needs 6 values, found {}", xi.len())),
        ));
    }

    for (key, v) in [("fx", fx), ("fy", fy)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(out_of_range(key, format!("{v} must be positive")));
        }
    }
    if width == 0 || height == 0 {
        return Err(out_of_range("width", "image size must be non-zero".into()));
    }
    if !(0.0..width as f64).contains(&cx) {
        return Err(out_of_range("cx", format!("{cx} outside [0, {width})")));
    }
    if !(0.0..height as f64).contains(&cy) {
        return Err(out_of_range("cy", format!("{cy} outside [0, {height})")));
    }
    let nu = Vector3::new(xi[0], xi[1], xi[2]);
    let omega = Vector3::new(xi[3], xi[4], xi[5]);
    let extrinsics =
        ExtrinsicsSE3::new(nu, omega).map_err(|e| out_of_range("xi", e.to_string()))?;
    let camera = CameraModel::new(fx, fy, cx, cy, width, height)
        .map_err(|e| out_of_range("camera", e.to_string()))?;
    Ok((camera, extrinsics))
}

pub fn format_calibration(camera: &CameraModel, xi: &ExtrinsicsSE3) -> String {
    let v = xi.to_array();
    format!(
        "fx={}\nfy={}\ncx={}\ncy={}\nwidth={}\nheight={}\nxi={} {} {} {} {} {}\n",
        camera.fx,
        camera.fy,
        camera.cx,
        camera.cy,
        camera.width,
        camera.height,
        v[0],
        v[1],
        v[2],
        v[3],
        v[4],
        v[5]
    )
}

pub fn save_calibration(camera: &CameraModel, xi: &ExtrinsicsSE3, path: &Path) -> Result<()> {
    std::fs::write(path, format_calibration(camera, xi)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "fx=700\nfy=700\ncx=640\ncy=360\nwidth=1280\nheight=720\nxi=0 0 0 0 0 0\n";

    fn parse(text: &str) -> Result<(CameraModel, ExtrinsicsSE3)> {
        parse_calibration(text, Path::new("calib.txt"))
    }

    #[test]
    fn identity_extrinsics() {
        let (camera, xi) = parse(BASE).unwrap();
        assert_eq!(camera.fx, 700.0);
        assert_eq!(camera.width, 1280);
        assert_eq!(xi, ExtrinsicsSE3::identity());
    }

    #[test]
    fn missing_key_is_named() {
        let err = parse(&BASE.replace("fy=700\n", "")).unwrap_err();
        assert!(matches!(err, Error::MissingKey { ref key, .. } if key == "fy"));
    }

    #[test]
    fn duplicate_key() {
        let err = parse(&format!("{BASE}fx=701\n")).unwrap_err();
        assert!(matches!(err, Error::DuplicateKey { line: 8, .. }));
    }

    #[test]
    fn rotation_out_of_range() {
        let err = parse(&BASE.replace("xi=0 0 0 0 0 0", "xi=0 0 0 0 0 3.5")).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { ref key, .. } if key == "xi"));
    }

    #[test]
    fn round_trip() {
        let camera = CameraModel::new(712.5, 701.25, 640.5, 359.75, 1280, 720).unwrap();
        let xi = ExtrinsicsSE3::new(
            Vector3::new(0.01, -0.1, -0.2),
            Vector3::new(std::f64::consts::FRAC_PI_2, 0.001, -0.002),
        )
        .unwrap();
        let (c2, x2) = parse(&format_calibration(&camera, &xi)).unwrap();
        assert_eq!(c2, camera);
        assert_eq!(x2, xi);
    }
}
