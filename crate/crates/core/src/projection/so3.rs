use nalgebra::{Matrix3, Vector3};

/// Below this angle the Rodrigues coefficients switch to their Taylor series.
const SMALL_ANGLE: f64 = 1e-8;

/// Cross-product matrix `[v]x`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues exponential map so(3) -> SO(3):
/// `R = I + (sin t / t) [w]x + ((1 - cos t) / t^2) [w]x^2`, `t = |w|`,
/// with `1 - cos t` evaluated as `2 sin^2(t / 2)`.
pub fn exp_so3(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = omega.norm_squared();
    let theta = theta2.sqrt();
    let k = skew(omega);
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let half = (theta / 2.0).sin();
        (theta.sin() / theta, 2.0 * half * half / theta2)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Inverse of [`exp_so3`] for rotations with angle below pi.
pub fn log_so3(rotation: &Matrix3<f64>) -> Vector3<f64> {
    let cos = ((rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let theta = cos.acos();
    let vee = Vector3::new(
        rotation[(2, 1)] - rotation[(1, 2)],
        rotation[(0, 2)] - rotation[(2, 0)],
        rotation[(1, 0)] - rotation[(0, 1)],
    );
    if theta < SMALL_ANGLE {
        return vee * 0.5;
    }
    vee * (theta / (2.0 * theta.sin()))
}

/// Angle of `a * b^T`, radians.
pub fn geodesic_angle(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let relative = a * b.transpose();
    (((relative.trace() - 1.0) / 2.0).clamp(-1.0, 1.0)).acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn zero_rotation_is_identity() {
        assert_eq!(exp_so3(&Vector3::zeros()), Matrix3::identity());
    }

    #[test]
    fn quarter_turn_about_z() {
        let r = exp_so3(&Vector3::new(0.0, 0.0, FRAC_PI_2));
        let v = r * Vector3::new(1.0, 0.0, 0.0);
        assert!((v - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn small_angle_branch_is_continuous() {
        let w = Vector3::new(3e-9, -4e-9, 1e-9);
        let series = exp_so3(&w);
        let w2 = w * 10.0;
        let closed = exp_so3(&w2);
        let second_order =
            |w: &Vector3<f64>| Matrix3::identity() + skew(w) + skew(w) * skew(w) * 0.5;
        assert!((series - second_order(&w)).abs().max() <= f64::EPSILON);
        assert!((closed - second_order(&w2)).abs().max() <= f64::EPSILON);
    }

    proptest! {
        #[test]
        fn exp_is_orthonormal_and_inverts(
            x in -1.8f64..1.8, y in -1.8f64..1.8, z in -1.8f64..1.8,
        ) {
            let w = Vector3::new(x, y, z);
            prop_assume!(w.norm() < 3.1);
            let r = exp_so3(&w);
            prop_assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-12);
            prop_assert!((r * exp_so3(&-w) - Matrix3::identity()).abs().max() < 1e-10);
            prop_assert!((log_so3(&r) - w).norm() < 1e-8);
            prop_assert!((geodesic_angle(&r, &Matrix3::identity()) - w.norm()).abs() < 1e-8);
        }
    }
}
