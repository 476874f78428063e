//! Rigid-body math, pinhole projection and Gaussian confidence maps.

mod confidence;
mod project;
mod so3;

pub use confidence::{render_confidence_map, ConfidenceMap, TRUNCATION_SIGMAS};
pub use project::{project_points, project_segments, PixelPoint, Projection, Projector, Z_MIN};
pub use so3::{exp_so3, geodesic_angle, log_so3, skew};
