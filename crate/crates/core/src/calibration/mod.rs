//! Extrinsic refinement.
//!
//! Obstacle points seen by the LiDAR should project inside the obstacle
//! pixels annotated in the image. The loss per frame is the directed
//! Hausdorff distance from the projected points to the annotated pixel set;
//! it is averaged over frames and minimized over the six extrinsic
//! parameters with Adam on central finite-difference gradients.

mod adam;
mod distance_field;
mod hausdorff;

use std::fmt::Write as _;

use nalgebra::Vector3;
use rayon::prelude::*;
use thiserror::Error;

pub use adam::Adam;
pub use distance_field::DistanceField;
pub use hausdorff::directed_hausdorff;

use crate::projection::Projector;
use crate::scene_io::{label, CameraModel, ExtrinsicsSE3, SegmentationMask};

/// Parameter names in `ExtrinsicsSE3::to_array` order.
pub const COORDINATE_NAMES: [&str; 6] = ["nu_x", "nu_y", "nu_z", "omega_x", "omega_y", "omega_z"];

/// Default finite-difference steps: meters for translation, radians for rotation.
pub const DEFAULT_STEPS: [f64; 6] = [1e-4, 1e-4, 1e-4, 1e-5, 1e-5, 1e-5];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("point set is empty")]
    EmptySet,
    #[error("frame {frame}: no obstacle point projects in front of the camera")]
    FrameDegenerate { frame: u32 },
    #[error("non-finite loss probing coordinate {coordinate}")]
    NonFiniteGradient { coordinate: &'static str },
    #[error("no calibration frames")]
    NoFrames,
    #[error("invalid refinement parameter: {0}")]
    InvalidParameter(String),
}

/// One frame's evidence: obstacle points in the LiDAR frame and the
/// annotated obstacle pixels, the latter kept as a distance field.
#[derive(Debug, Clone)]
pub struct CalibrationFrame {
    pub id: u32,
    points: Vec<Vector3<f64>>,
    field: DistanceField,
}

impl CalibrationFrame {
    /// Uses the obstacle label of `mask` as the annotated pixel set.
    pub fn new(
        id: u32,
        points: Vec<Vector3<f64>>,
        mask: &SegmentationMask,
    ) -> Result<Self, CalibrationError> {
        let field = DistanceField::from_mask(mask, label::OBSTACLE);
        if points.is_empty() || field.is_empty() {
            return Err(CalibrationError::EmptySet);
        }
        Ok(CalibrationFrame { id, points, field })
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn annotated_pixels(&self) -> usize {
        self.field.site_count()
    }

    /// Directed Hausdorff distance of the projected points to the annotation.
    /// Points behind the near plane do not contribute.
    pub fn loss(&self, projector: &Projector) -> Result<f64, CalibrationError> {
        let mut worst: Option<f64> = None;
        for p in &self.points {
            if let Some([u, v]) = projector.project(p) {
                let d = self.field.distance(u, v);
                worst = Some(worst.map_or(d, |w| w.max(d)));
            }
        }
        worst.ok_or(CalibrationError::FrameDegenerate { frame: self.id })
    }
}

/// Points projecting at least `margin` pixels inside the image under `xi`.
pub fn points_in_view(
    points: impl IntoIterator<Item = Vector3<f64>>,
    camera: &CameraModel,
    xi: &ExtrinsicsSE3,
    margin: f64,
) -> Vec<Vector3<f64>> {
    let projector = Projector::new(camera, xi);
    let (w, h) = (camera.width as f64, camera.height as f64);
    points
        .into_iter()
        .filter(|p| {
            projector.project(p).is_some_and(|[u, v]| {
                u >= margin - 0.5
                    && v >= margin - 0.5
                    && u < w - 0.5 - margin
                    && v < h - 0.5 - margin
            })
        })
        .collect()
}

fn extrinsics_from(v: &[f64; 6]) -> ExtrinsicsSE3 {
    ExtrinsicsSE3 {
        nu: Vector3::new(v[0], v[1], v[2]),
        omega: Vector3::new(v[3], v[4], v[5]),
    }
}

/// Mean per-frame directed Hausdorff loss, in pixels.
pub fn hausdorff_loss(
    xi: &ExtrinsicsSE3,
    frames: &[CalibrationFrame],
    camera: &CameraModel,
) -> Result<f64, CalibrationError> {
    if frames.is_empty() {
        return Err(CalibrationError::NoFrames);
    }
    let projector = Projector::new(camera, xi);
    let mut total = 0.0;
    for frame in frames {
        total += frame.loss(&projector)?;
    }
    Ok(total / frames.len() as f64)
}

/// Central differences `(L(xi + h e_i) - L(xi - h e_i)) / 2 h_i`.
pub fn numeric_gradient(
    xi: &ExtrinsicsSE3,
    frames: &[CalibrationFrame],
    camera: &CameraModel,
    steps: &[f64; 6],
) -> Result<[f64; 6], CalibrationError> {
    let base = xi.to_array();
    let partials: Vec<Result<f64, CalibrationError>> = (0..6)
        .into_par_iter()
        .map(|i| {
            let probe = |sign: f64| {
                let mut v = base;
                v[i] += sign * steps[i];
                let loss = hausdorff_loss(&extrinsics_from(&v), frames, camera)?;
                if loss.is_finite() {
                    Ok(loss)
                } else {
                    Err(CalibrationError::NonFiniteGradient {
                        coordinate: COORDINATE_NAMES[i],
                    })
                }
            };
            Ok((probe(1.0)? - probe(-1.0)?) / (2.0 * steps[i]))
        })
        .collect();
    let mut grad = [0.0; 6];
    for (g, p) in grad.iter_mut().zip(partials) {
        *g = p?;
    }
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineParams {
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Stop once the loss falls below this (pixels).
    pub tol: f64,
    /// Stop once the best loss improved by less than `stall_tolerance` over
    /// the last `stall_window` iterations.
    pub stall_window: usize,
    pub stall_tolerance: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub steps: [f64; 6],
}

impl Default for RefineParams {
    fn default() -> Self {
        RefineParams {
            learning_rate: 1e-5,
            max_iters: 20_000,
            tol: 1e-9,
            stall_window: 50,
            stall_tolerance: 1e-9,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            steps: DEFAULT_STEPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    BelowTolerance,
    Stalled,
    MaxIterations,
    Aborted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementReport {
    pub initial: ExtrinsicsSE3,
    /// Lowest-loss extrinsics visited.
    pub final_xi: ExtrinsicsSE3,
    /// Loss evaluated at the start of every iteration.
    pub loss_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
}

impl RefinementReport {
    pub fn initial_loss(&self) -> f64 {
        self.loss_trace[0]
    }

    pub fn final_loss(&self) -> f64 {
        self.loss_trace
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `iteration loss` lines preceded by `#` summary lines.
    pub fn to_log(&self) -> String {
        let mut out = String::new();
        let fmt = |v: [f64; 6]| v.map(|x| format!("{x:.9}")).join(" ");
        let _ = writeln!(out, "# initial_xi {}", fmt(self.initial.to_array()));
        let _ = writeln!(out, "# final_xi {}", fmt(self.final_xi.to_array()));
        let _ = writeln!(out, "# iterations {}", self.iterations);
        let _ = writeln!(out, "# converged {}", self.converged);
        let _ = writeln!(out, "# stop_reason {:?}", self.stop_reason);
        let _ = writeln!(out, "# iteration loss");
        for (i, l) in self.loss_trace.iter().enumerate() {
            let _ = writeln!(out, "{} {:.9}", i + 1, l);
        }
        out
    }
}

/// Refinement aborted part-way; `partial` holds the trace up to the failure.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("refinement aborted: {error}")]
pub struct RefinementFailure {
    pub error: CalibrationError,
    pub partial: Option<Box<RefinementReport>>,
}

impl From<RefinementFailure> for crate::Error {
    fn from(f: RefinementFailure) -> Self {
        crate::Error::Calibration(f.error)
    }
}

/// Adam on the mean Hausdorff loss. Iteration `n` evaluates the loss at the
/// current estimate, records it, tests the stopping rules, then steps.
pub fn refine_extrinsics(
    xi0: &ExtrinsicsSE3,
    frames: &[CalibrationFrame],
    camera: &CameraModel,
    params: &RefineParams,
) -> Result<RefinementReport, RefinementFailure> {
    let fail = |error| RefinementFailure {
        error,
        partial: None,
    };
    if !(params.learning_rate > 0.0) || !params.learning_rate.is_finite() {
        return Err(fail(CalibrationError::InvalidParameter(format!(
            "learning rate {} must be positive",
            params.learning_rate
        ))));
    }
    if params.max_iters == 0 {
        return Err(fail(CalibrationError::InvalidParameter(
            "max_iters must be positive".into(),
        )));
    }
    if params.steps.iter().any(|h| !(*h > 0.0)) {
        return Err(fail(CalibrationError::InvalidParameter(
            "finite-difference steps must be positive".into(),
        )));
    }
    if frames.is_empty() {
        return Err(fail(CalibrationError::NoFrames));
    }

    let mut adam = Adam::<6>::new(
        params.learning_rate,
        params.beta1,
        params.beta2,
        params.epsilon,
    );
    let mut x = xi0.to_array();
    let mut report = RefinementReport {
        initial: *xi0,
        final_xi: *xi0,
        loss_trace: Vec::new(),
        iterations: 0,
        converged: false,
        stop_reason: StopReason::MaxIterations,
    };
    let mut best = f64::INFINITY;
    let mut best_history: Vec<f64> = Vec::new();

    let abort = |mut report: RefinementReport, error| RefinementFailure {
        error,
        partial: if report.loss_trace.is_empty() {
            None
        } else {
            report.stop_reason = StopReason::Aborted;
            Some(Box::new(report))
        },
    };

    for iteration in 1..=params.max_iters {
        let current = extrinsics_from(&x);
        let loss = match hausdorff_loss(&current, frames, camera) {
            Ok(l) if l.is_finite() => l,
            Ok(_) => {
                return Err(abort(
                    report,
                    CalibrationError::NonFiniteGradient { coordinate: "loss" },
                ));
            }
            Err(e) => return Err(abort(report, e)),
        };
        report.loss_trace.push(loss);
        report.iterations = iteration;
        if loss < best {
            best = loss;
            report.final_xi = current;
        }
        best_history.push(best);

        if loss < params.tol {
            report.converged = true;
            report.stop_reason = StopReason::BelowTolerance;
            break;
        }
        let n = best_history.len();
        if n > params.stall_window
            && best_history[n - 1 - params.stall_window] - best < params.stall_tolerance
        {
            report.converged = true;
            report.stop_reason = StopReason::Stalled;
            break;
        }
        if iteration == params.max_iters {
            break;
        }

        let grad = match numeric_gradient(&current, frames, camera, &params.steps) {
            Ok(g) => g,
            Err(e) => return Err(abort(report, e)),
        };
        adam.step(&mut x, &grad);
    }
    Ok(report)
}
