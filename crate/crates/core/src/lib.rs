//! Small on-road obstacle detection from a sparse 16-ring LiDAR fused with a
//! monocular camera.
//!
//! The crate is organized as a pipeline:
//!
//! 1. [`scene_io`] loads scans, images, masks, poses and calibration.
//! 2. [`ring_geometry`] finds range discontinuities (breakpoints) along each
//!    ring and pairs them into small-obstacle segments.
//! 3. [`projection`] maps segment points into the image and renders Gaussian
//!    confidence maps.
//! 4. [`temporal`] carries earlier detections forward into the current frame
//!    by odometry-seeded template matching.
//! 5. [`calibration`] refines LiDAR-camera extrinsics with a directed
//!    Hausdorff projection loss.
//! 6. [`metrics`] scores predicted masks (IDR, iFDR, PDR, mIoU).
//!
//! [`simulator`] ray-casts synthetic road scenes and provides ground truth for
//! every stage.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod error;
pub mod metrics;
pub mod projection;
pub mod ring_geometry;
pub mod scene_io;
pub mod simulator;
pub mod temporal;

pub use error::{Error, Result};
pub use projection::ConfidenceMap;
pub use ring_geometry::{ObstacleSegment, RingPoint, RingScan};
pub use scene_io::{CameraModel, ExtrinsicsSE3, Pose, SegmentationMask};
