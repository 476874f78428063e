//! Exact Euclidean distance transform with nearest-site tracking, used to
//! answer "how far is this continuous point from the labeled pixels" in
//! constant time.

use crate::scene_io::SegmentationMask;

/// Distances to the union of closed unit cells of the pixels carrying a given
/// label. Pixel `(i, j)` covers `[i - 0.5, i + 0.5] x [j - 0.5, j + 0.5]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    width: usize,
    height: usize,
    labeled: Vec<bool>,
    /// Nearest labeled pixel center for every pixel center (row-major).
    nearest: Vec<(u32, u32)>,
    site_count: usize,
}

impl DistanceField {
    pub fn from_mask(mask: &SegmentationMask, label: u8) -> Self {
        let (w, h) = (mask.width() as usize, mask.height() as usize);
        let labeled: Vec<bool> = mask.labels().iter().map(|&l| l == label).collect();
        let site_count = labeled.iter().filter(|&&b| b).count();

        // Column pass: nearest labeled row in the same column.
        let mut column_row = vec![u32::MAX; w * h];
        for x in 0..w {
            let mut last: Option<usize> = None;
            for y in 0..h {
                if labeled[y * w + x] {
                    last = Some(y);
                }
                if let Some(l) = last {
                    column_row[y * w + x] = l as u32;
                }
            }
            let mut next: Option<usize> = None;
            for y in (0..h).rev() {
                if labeled[y * w + x] {
                    next = Some(y);
                }
                if let Some(n) = next {
                    let cur = column_row[y * w + x];
                    if cur == u32::MAX || (n - y) < y - cur as usize {
                        column_row[y * w + x] = n as u32;
                    }
                }
            }
        }

        // Row pass: lower envelope of parabolas (Felzenszwalb & Huttenlocher),
        // remembering which column supplied the minimum.
        let mut nearest = vec![(u32::MAX, u32::MAX); w * h];
        let mut heights = vec![0.0f64; w];
        let mut sites: Vec<usize> = Vec::with_capacity(w);
        let mut bounds: Vec<f64> = Vec::with_capacity(w + 1);
        for y in 0..h {
            sites.clear();
            bounds.clear();
            for x in 0..w {
                let r = column_row[y * w + x];
                if r == u32::MAX {
                    continue;
                }
                let dy = r as f64 - y as f64;
                heights[x] = dy * dy;
                loop {
                    match sites.last() {
                        None => {
                            sites.push(x);
                            bounds.push(f64::NEG_INFINITY);
                            break;
                        }
                        Some(&q) => {
                            let s = ((heights[x] + (x * x) as f64) - (heights[q] + (q * q) as f64))
                                / (2.0 * (x as f64 - q as f64));
                            if s <= *bounds.last().unwrap() {
                                sites.pop();
                                bounds.pop();
                            } else {
                                sites.push(x);
                                bounds.push(s);
                                break;
                            }
                        }
                    }
                }
            }
            if sites.is_empty() {
                continue;
            }
            let mut k = 0;
            for x in 0..w {
                while k + 1 < sites.len() && bounds[k + 1] < x as f64 {
                    k += 1;
                }
                let q = sites[k];
                nearest[y * w + x] = (q as u32, column_row[y * w + q]);
            }
        }

        DistanceField {
            width: w,
            height: h,
            labeled,
            nearest,
            site_count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.site_count == 0
    }

    pub fn site_count(&self) -> usize {
        self.site_count
    }

    /// Squared distance from pixel center `(x, y)` to the nearest labeled
    /// pixel center.
    pub fn center_distance_sq(&self, x: u32, y: u32) -> f64 {
        let (sx, sy) = self.nearest[y as usize * self.width + x as usize];
        if sx == u32::MAX {
            return f64::INFINITY;
        }
        (sx as f64 - x as f64).powi(2) + (sy as f64 - y as f64).powi(2)
    }

    /// Euclidean distance from a continuous point to the labeled region;
    /// zero inside it. Candidate cells come from the nearest sites of the
    /// pixel containing the point and its eight neighbours.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        if self.site_count == 0 {
            return f64::INFINITY;
        }
        let px = x.round().clamp(0.0, (self.width - 1) as f64) as i64;
        let py = y.round().clamp(0.0, (self.height - 1) as f64) as i64;
        if px as f64 == x.round()
            && py as f64 == y.round()
            && self.labeled[py as usize * self.width + px as usize]
        {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for ny in (py - 1).max(0)..=(py + 1).min(self.height as i64 - 1) {
            for nx in (px - 1).max(0)..=(px + 1).min(self.width as i64 - 1) {
                let (sx, sy) = self.nearest[ny as usize * self.width + nx as usize];
                let dx = ((x - sx as f64).abs() - 0.5).max(0.0);
                let dy = ((y - sy as f64).abs() - 0.5).max(0.0);
                best = best.min(dx * dx + dy * dy);
            }
        }
        best.sqrt()
    }
}
