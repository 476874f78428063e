//! Instance- and pixel-level scoring of predicted segmentation masks.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scene_io::{label, SegmentationMask};

pub const DEFAULT_MIN_AREA: usize = 3;
pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.2;

/// Connected pixel groups of one label, each sorted row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceSet {
    pub width: u32,
    pub height: u32,
    /// Pixel indices `y * width + x`; instances ordered by first pixel.
    pub instances: Vec<Vec<usize>>,
}

impl InstanceSet {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Per-pixel instance index, `usize::MAX` for background.
    fn owner_map(&self) -> Vec<usize> {
        let mut owner = vec![usize::MAX; self.width as usize * self.height as usize];
        for (k, inst) in self.instances.iter().enumerate() {
            for &p in inst {
                owner[p] = k;
            }
        }
        owner
    }
}

/// 8-connected components of `class_label` with at least `min_area` pixels.
pub fn extract_instances(mask: &SegmentationMask, class_label: u8, min_area: usize) -> InstanceSet {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let labels = mask.labels();
    let mut seen = vec![false; w * h];
    let mut instances = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if seen[start] || labels[start] != class_label {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut component = Vec::new();
        while let Some(p) = stack.pop() {
            component.push(p);
            let (x, y) = ((p % w) as i64, (p / w) as i64);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let q = ny as usize * w + nx as usize;
                    if !seen[q] && labels[q] == class_label {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        if component.len() >= min_area {
            component.sort_unstable();
            instances.push(component);
        }
    }
    InstanceSet {
        width: mask.width(),
        height: mask.height(),
        instances,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceMatch {
    pub true_positives: usize,
    pub false_positives: usize,
    /// One flag per ground-truth instance.
    pub detected: Vec<bool>,
}

/// A prediction is a true positive when more than `overlap_threshold` of its
/// pixels are ground truth; it is a false positive only when it touches no
/// ground truth at all. Every ground-truth instance touched by a true
/// positive counts as detected.
pub fn match_instances(
    pred: &InstanceSet,
    gt: &InstanceSet,
    overlap_threshold: f64,
) -> Result<InstanceMatch> {
    if (pred.width, pred.height) != (gt.width, gt.height) {
        return Err(Error::DimensionMismatch {
            expected: (gt.width, gt.height),
            found: (pred.width, pred.height),
        });
    }
    let owner = gt.owner_map();
    let mut out = InstanceMatch {
        true_positives: 0,
        false_positives: 0,
        detected: vec![false; gt.len()],
    };
    let mut touched = Vec::new();
    for inst in &pred.instances {
        touched.clear();
        let mut overlap = 0usize;
        for &p in inst {
            if owner[p] != usize::MAX {
                overlap += 1;
                touched.push(owner[p]);
            }
        }
        if overlap == 0 {
            out.false_positives += 1;
        } else if overlap as f64 / inst.len() as f64 > overlap_threshold {
            out.true_positives += 1;
            for &g in &touched {
                out.detected[g] = true;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluationParams {
    pub min_area: usize,
    pub overlap_threshold: f64,
}

impl Default for EvaluationParams {
    fn default() -> Self {
        EvaluationParams {
            min_area: DEFAULT_MIN_AREA,
            overlap_threshold: DEFAULT_OVERLAP_THRESHOLD,
        }
    }
}

/// Pixel tallies for one class: true positives, false positives, false negatives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PixelCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl PixelCounts {
    /// `None` when the class is absent from both prediction and ground truth.
    pub fn iou(&self) -> Option<f64> {
        let union = self.tp + self.fp + self.fn_;
        (union > 0).then(|| self.tp as f64 / union as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub idr: f64,
    pub ifdr: f64,
    pub pdr: f64,
    pub miou: f64,
    /// IoU per label (off-road, road, obstacle); NaN when the class never occurs.
    pub class_iou: [f64; 3],
    pub pixels: [PixelCounts; 3],
    pub gt_instances: usize,
    pub detected_instances: usize,
    pub predicted_instances: usize,
    pub tp_instances: usize,
    pub fp_instances: usize,
    pub frames: usize,
    /// Explanations for every metric reported as NaN.
    pub undefined: Vec<String>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num as f64 / den as f64
    }
}

/// Dataset-wide metrics; counts are pooled over all frame pairs.
pub fn evaluate(
    pred: &[SegmentationMask],
    gt: &[SegmentationMask],
    params: &EvaluationParams,
) -> Result<MetricsReport> {
    if pred.len() != gt.len() {
        return Err(Error::Invalid(format!(
            "{} predicted masks but {} ground-truth masks",
            pred.len(),
            gt.len()
        )));
    }
    let mut pixels = [PixelCounts::default(); 3];
    let (mut gt_instances, mut detected, mut predicted, mut tp, mut fp) = (0, 0, 0, 0, 0);
    for (p, g) in pred.iter().zip(gt) {
        if (p.width(), p.height()) != (g.width(), g.height()) {
            return Err(Error::DimensionMismatch {
                expected: (g.width(), g.height()),
                found: (p.width(), p.height()),
            });
        }
        for (&pl, &gl) in p.labels().iter().zip(g.labels()) {
            if pl == gl {
                pixels[gl as usize].tp += 1;
            } else {
                pixels[pl as usize].fp += 1;
                pixels[gl as usize].fn_ += 1;
            }
        }
        let pi = extract_instances(p, label::OBSTACLE, params.min_area);
        let gi = extract_instances(g, label::OBSTACLE, params.min_area);
        let m = match_instances(&pi, &gi, params.overlap_threshold)?;
        gt_instances += gi.len();
        detected += m.detected.iter().filter(|&&d| d).count();
        predicted += pi.len();
        tp += m.true_positives;
        fp += m.false_positives;
    }

    let mut undefined = Vec::new();
    let idr = ratio(detected as u64, gt_instances as u64);
    if idr.is_nan() {
        undefined.push("idr: no ground-truth obstacle instances".to_string());
    }
    let ifdr = ratio(fp as u64, predicted as u64);
    if ifdr.is_nan() {
        undefined.push("ifdr: no predicted obstacle instances".to_string());
    }
    let obstacle = pixels[label::OBSTACLE as usize];
    let pdr = ratio(obstacle.tp, obstacle.tp + obstacle.fn_);
    if pdr.is_nan() {
        undefined.push("pdr: no ground-truth obstacle pixels".to_string());
    }
    let class_iou = pixels.map(|c| c.iou().unwrap_or(f64::NAN));
    let present: Vec<f64> = class_iou.iter().copied().filter(|v| !v.is_nan()).collect();
    let miou = if present.is_empty() {
        undefined.push("miou: no pixels".to_string());
        f64::NAN
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };

    Ok(MetricsReport {
        idr,
        ifdr,
        pdr,
        miou,
        class_iou,
        pixels,
        gt_instances,
        detected_instances: detected,
        predicted_instances: predicted,
        tp_instances: tp,
        fp_instances: fp,
        frames: pred.len(),
        undefined,
    })
}

impl MetricsReport {
    /// Fixed-order `key value` table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let f = |v: f64| {
            if v.is_nan() {
                "nan".to_string()
            } else {
                format!("{v:.6}")
            }
        };
        let _ = writeln!(out, "frames {}", self.frames);
        let _ = writeln!(out, "idr {}", f(self.idr));
        let _ = writeln!(out, "ifdr {}", f(self.ifdr));
        let _ = writeln!(out, "pdr {}", f(self.pdr));
        let _ = writeln!(out, "miou {}", f(self.miou));
        for (name, v) in ["iou_off_road", "iou_road", "iou_obstacle"]
            .iter()
            .zip(self.class_iou)
        {
            let _ = writeln!(out, "{name} {}", f(v));
        }
        let _ = writeln!(out, "gt_instances {}", self.gt_instances);
        let _ = writeln!(out, "detected_instances {}", self.detected_instances);
        let _ = writeln!(out, "predicted_instances {}", self.predicted_instances);
        let _ = writeln!(out, "tp_instances {}", self.tp_instances);
        let _ = writeln!(out, "fp_instances {}", self.fp_instances);
        for (name, c) in ["off_road", "road", "obstacle"].iter().zip(self.pixels) {
            let _ = writeln!(out, "pixels_{name} tp {} fp {} fn {}", c.tp, c.fp, c.fn_);
        }
        for note in &self.undefined {
            let _ = writeln!(out, "undefined {note}");
        }
        out
    }
}
