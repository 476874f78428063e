use image::GrayImage;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchError {
    #[error("degenerate match: template has zero variance")]
    FlatTemplate,
    #[error("degenerate match: every window in the search area has zero variance")]
    FlatWindow,
    #[error("template {template:?} does not fit in image {image:?}")]
    TemplateTooLarge {
        template: (u32, u32),
        image: (u32, u32),
    },
    #[error("search window around ({x:.1}, {y:.1}) lies outside the image")]
    OutsideImage { x: f64, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    /// Pixel at which the template center lands for the best score.
    pub center: [f64; 2],
    /// Zero-mean normalized cross-correlation, in `[-1, 1]`.
    pub score: f64,
    pub accepted: bool,
}

/// Top-left corner of a `size` patch centered on pixel `center`.
pub(crate) fn patch_origin(center: i64, size: u32) -> i64 {
    center - (size / 2) as i64
}

/// Exhaustive zero-mean NCC search for the template center within
/// `search_radius` pixels (Chebyshev) of `search_center`. Candidates whose
/// patch would leave the image are skipped; flat windows are skipped too.
pub fn template_match(
    template: &GrayImage,
    image: &GrayImage,
    search_center: [f64; 2],
    search_radius: u32,
    threshold: f64,
) -> Result<MatchResult, MatchError> {
    let (tw, th) = template.dimensions();
    let (iw, ih) = image.dimensions();
    if tw == 0 || th == 0 || tw > iw || th > ih {
        return Err(MatchError::TemplateTooLarge {
            template: (tw, th),
            image: (iw, ih),
        });
    }

    let n = (tw * th) as f64;
    let t: Vec<f64> = template.as_raw().iter().map(|&v| v as f64).collect();
    let t_mean = t.iter().sum::<f64>() / n;
    let t_dev: Vec<f64> = t.iter().map(|v| v - t_mean).collect();
    let t_norm = t_dev.iter().map(|d| d * d).sum::<f64>();
    if t_norm <= 0.0 {
        return Err(MatchError::FlatTemplate);
    }

    let (sx, sy) = (
        search_center[0].round() as i64,
        search_center[1].round() as i64,
    );
    let r = search_radius as i64;
    let x_lo = (sx - r).max((tw / 2) as i64);
    let x_hi = (sx + r).min(iw as i64 - tw as i64 + (tw / 2) as i64);
    let y_lo = (sy - r).max((th / 2) as i64);
    let y_hi = (sy + r).min(ih as i64 - th as i64 + (th / 2) as i64);
    if x_lo > x_hi || y_lo > y_hi {
        return Err(MatchError::OutsideImage {
            x: search_center[0],
            y: search_center[1],
        });
    }

    let pixels = image.as_raw();
    let stride = iw as usize;
    let mut best: Option<(f64, i64, i64)> = None;
    for cy in y_lo..=y_hi {
        let oy = patch_origin(cy, th) as usize;
        for cx in x_lo..=x_hi {
            let ox = patch_origin(cx, tw) as usize;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let mut cross = 0.0;
            for row in 0..th as usize {
                let base = (oy + row) * stride + ox;
                let window = &pixels[base..base + tw as usize];
                let tmpl = &t_dev[row * tw as usize..(row + 1) * tw as usize];
                for (&w, &d) in window.iter().zip(tmpl) {
                    let w = w as f64;
                    sum += w;
                    sum_sq += w * w;
                    cross += w * d;
                }
            }
            let w_var = sum_sq - sum * sum / n;
            if w_var <= 1e-9 {
                continue;
            }
            // Template deviations sum to zero, so the window mean drops out.
            let score = (cross / (w_var * t_norm).sqrt()).clamp(-1.0, 1.0);
            if best.is_none_or(|(b, _, _)| score > b) {
                best = Some((score, cx, cy));
            }
        }
    }
    let (score, cx, cy) = best.ok_or(MatchError::FlatWindow)?;
    Ok(MatchResult {
        center: [cx as f64, cy as f64],
        score,
        accepted: score >= threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Deterministic texture with structure at several scales.
    fn textured(w: u32, h: u32) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| {
            let v = (x * 7 + y * 13) % 17 * 9 + ((x / 5 + y / 3) % 4) * 20;
            image::Luma([v as u8])
        })
    }

    fn crop(img: &GrayImage, cx: i64, cy: i64, size: u32) -> GrayImage {
        let (ox, oy) = (patch_origin(cx, size) as u32, patch_origin(cy, size) as u32);
        image::imageops::crop_imm(img, ox, oy, size, size).to_image()
    }

    #[test]
    fn self_match_scores_one() {
        let img = textured(120, 90);
        let tmpl = crop(&img, 60, 40, 16);
        let m = template_match(&tmpl, &img, [57.0, 44.0], 10, 0.6).unwrap();
        assert_eq!(m.center, [60.0, 40.0]);
        assert!((m.score - 1.0).abs() < 1e-12);
        assert!(m.accepted);
    }

    #[test]
    fn flat_template_is_degenerate() {
        let img = textured(64, 64);
        let tmpl = GrayImage::from_pixel(8, 8, image::Luma([90]));
        assert_eq!(
            template_match(&tmpl, &img, [32.0, 32.0], 4, 0.6),
            Err(MatchError::FlatTemplate)
        );
    }

    #[test]
    fn flat_image_is_degenerate() {
        let img = GrayImage::from_pixel(64, 64, image::Luma([90]));
        let tmpl = crop(&textured(64, 64), 20, 20, 8);
        assert_eq!(
            template_match(&tmpl, &img, [32.0, 32.0], 4, 0.6),
            Err(MatchError::FlatWindow)
        );
    }

    #[test]
    fn oversized_template() {
        let img = textured(10, 10);
        let tmpl = textured(12, 4);
        assert!(matches!(
            template_match(&tmpl, &img, [5.0, 5.0], 2, 0.6),
            Err(MatchError::TemplateTooLarge { .. })
        ));
    }

    #[test]
    fn inverted_template_is_rejected() {
        let img = textured(80, 80);
        let mut tmpl = crop(&img, 40, 40, 12);
        for p in tmpl.pixels_mut() {
            p[0] = 255 - p[0];
        }
        let m = template_match(&tmpl, &img, [40.0, 40.0], 0, 0.6).unwrap();
        assert!((m.score + 1.0).abs() < 1e-12);
        assert!(!m.accepted);
    }
}
