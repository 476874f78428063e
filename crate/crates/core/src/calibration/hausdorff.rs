use super::CalibrationError;

/// `sup_{x in p1} inf_{y in p2} |x - y|`.
///
/// Nearest neighbours are found by sweeping outward from each query along
/// `p2` sorted by x, stopping once the x gap alone exceeds the best distance.
pub fn directed_hausdorff(p1: &[[f64; 2]], p2: &[[f64; 2]]) -> Result<f64, CalibrationError> {
    if p1.is_empty() || p2.is_empty() {
        return Err(CalibrationError::EmptySet);
    }
    let mut sorted = p2.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]));

    let mut worst = 0.0f64;
    for q in p1 {
        let start = sorted.partition_point(|p| p[0] < q[0]);
        let mut best = f64::INFINITY;
        for p in &sorted[start..] {
            let dx = p[0] - q[0];
            if dx * dx >= best {
                break;
            }
            best = best.min(dx * dx + (p[1] - q[1]).powi(2));
        }
        for p in sorted[..start].iter().rev() {
            let dx = q[0] - p[0];
            if dx * dx >= best {
                break;
            }
            best = best.min(dx * dx + (p[1] - q[1]).powi(2));
        }
        worst = worst.max(best);
    }
    Ok(worst.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn containment_is_zero() {
        let p2 = [[0.0, 0.0], [1.0, 2.0], [3.0, -1.0]];
        assert_eq!(directed_hausdorff(&p2[..2], &p2).unwrap(), 0.0);
    }

    #[test]
    fn single_pair() {
        assert_eq!(
            directed_hausdorff(&[[0.0, 0.0]], &[[3.0, 4.0]]).unwrap(),
            5.0
        );
    }

    #[test]
    fn directedness() {
        let a = [[0.0, 0.0], [10.0, 0.0]];
        let b = [[0.0, 0.0]];
        assert_eq!(directed_hausdorff(&a, &b).unwrap(), 10.0);
        assert_eq!(directed_hausdorff(&b, &a).unwrap(), 0.0);
    }

    #[test]
    fn empty_sets_are_errors() {
        assert_eq!(
            directed_hausdorff(&[], &[[0.0, 0.0]]),
            Err(CalibrationError::EmptySet)
        );
        assert_eq!(
            directed_hausdorff(&[[0.0, 0.0]], &[]),
            Err(CalibrationError::EmptySet)
        );
    }
}
