use rayon::prelude::*;

use super::PixelPoint;
use crate::error::{Error, Result};
use crate::scene_io::CameraModel;

/// Gaussian splats are cut off at this many standard deviations.
pub const TRUNCATION_SIGMAS: f64 = 3.0;

/// Per-pixel obstacle confidence in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    width: u32,
    height: u32,
    values: Vec<f32>,
}

impl ConfidenceMap {
    pub fn zeros(width: u32, height: u32) -> Self {
        ConfidenceMap {
            width,
            height,
            values: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn from_values(width: u32, height: u32, values: Vec<f32>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::Invalid(format!(
                "confidence map of {width}x{height} needs {} values, got {}",
                width as usize * height as usize,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::ConfidenceOutOfRange {
                x: (i % width as usize) as u32,
                y: (i / width as usize) as u32,
                value: values[i],
            });
        }
        Ok(ConfidenceMap {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    pub fn max_value(&self) -> f32 {
        self.values.iter().copied().fold(0.0, f32::max)
    }

    /// Largest value among pixels within `radius` of `(x, y)`.
    pub fn max_within(&self, x: f64, y: f64, radius: f64) -> f32 {
        let mut best = 0.0f32;
        let (x0, x1) = ((x - radius).floor().max(0.0), (x + radius).ceil());
        let (y0, y1) = ((y - radius).floor().max(0.0), (y + radius).ceil());
        let mut py = y0;
        while py <= y1 && py < self.height as f64 {
            let mut px = x0;
            while px <= x1 && px < self.width as f64 {
                if (px - x).powi(2) + (py - y).powi(2) <= radius * radius {
                    best = best.max(self.get(px as u32, py as u32));
                }
                px += 1.0;
            }
            py += 1.0;
        }
        best
    }

    /// Pixelwise maximum with another map of the same size.
    pub fn max_assign(&mut self, other: &ConfidenceMap) {
        assert_eq!((self.width, self.height), (other.width, other.height));
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a = a.max(*b);
        }
    }
}

/// Renders one Gaussian per anchor and composes them by pixelwise maximum.
///
/// Anchors snap to their nearest pixel, which receives exactly 1.0; a pixel at
/// distance `r` from an anchor receives `exp(-r^2 / (2 sigma^2))`, truncated at
/// `3 sigma`. Anchors outside the image still contribute to in-bounds pixels.
///
/// # Panics
///
/// If `sigma` is not positive.
pub fn render_confidence_map(
    anchors: &[PixelPoint],
    sigma: f64,
    camera: &CameraModel,
) -> ConfidenceMap {
    assert!(sigma > 0.0, "sigma must be positive, got {sigma}");
    let (width, height) = (camera.width as usize, camera.height as usize);
    let mut map = ConfidenceMap::zeros(camera.width, camera.height);
    let radius = TRUNCATION_SIGMAS * sigma;
    let r2 = radius * radius;
    let inv = 1.0 / (2.0 * sigma * sigma);

    let mut snapped: Vec<(i64, i64)> = anchors
        .iter()
        .filter(|a| a.x.is_finite() && a.y.is_finite())
        .map(|a| (a.x.round() as i64, a.y.round() as i64))
        .filter(|&(x, y)| {
            x as f64 >= -radius
                && y as f64 >= -radius
                && x as f64 <= width as f64 + radius
                && y as f64 <= height as f64 + radius
        })
        .collect();
    snapped.sort_unstable_by_key(|&(x, y)| (y, x));
    snapped.dedup();
    if snapped.is_empty() {
        return map;
    }
    let reach = radius.floor() as i64;

    map.values
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(row, values)| {
            let row = row as i64;
            let lo = snapped.partition_point(|&(_, y)| y < row - reach);
            let hi = snapped.partition_point(|&(_, y)| y <= row + reach);
            for &(ax, ay) in &snapped[lo..hi] {
                let dy2 = ((ay - row) * (ay - row)) as f64;
                let half = (r2 - dy2).max(0.0).sqrt().floor() as i64;
                let x0 = (ax - half).max(0);
                let x1 = (ax + half).min(width as i64 - 1);
                for x in x0..=x1 {
                    let dx = (x - ax) as f64;
                    let d2 = dx * dx + dy2;
                    if d2 > r2 {
                        continue;
                    }
                    let v = (-d2 * inv).exp() as f32;
                    let slot = &mut values[x as usize];
                    if v > *slot {
                        *slot = v;
                    }
                }
            }
        });
    map
}
