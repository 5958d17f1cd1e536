//! Central finite-difference gradient checks in double precision.

use crate::error::{Error, Result};

/// Denominator floor of [`relative_error`], so coordinates whose true gradient
/// is essentially zero are judged on absolute error instead.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

/// `|a - b| / max(|a|, |b|, RELATIVE_ERROR_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let denom = a.abs().max(b.abs()).max(RELATIVE_ERROR_FLOOR);
    (a - b).abs() / denom
}

pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| relative_error(x, y))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub max_rel_error: f64,
    /// Coordinate with the largest relative error.
    pub worst_index: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub checked: usize,
    /// Coordinates the objective declined to evaluate (kink crossings).
    pub skipped: usize,
}

impl GradReport {
    pub fn within(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// Compares `analytic` against `(f(x + h e_i) - f(x - h e_i)) / 2h` for every
/// coordinate `i` of `point`.
///
/// `objective` returns `Ok(None)` when a perturbed point falls on the other
/// side of a non-differentiable kink (a max-pool winner changing, say); such
/// coordinates are counted in [`GradReport::skipped`] and excluded.
pub fn check_gradient<F>(
    point: &[f64],
    step: f64,
    analytic: &[f64],
    mut objective: F,
) -> Result<GradReport>
where
    F: FnMut(&[f64]) -> Result<Option<f64>>,
{
    if point.len() != analytic.len() {
        return Err(Error::shape(format!(
            "gradient check: {} coordinates but {} analytic gradients",
            point.len(),
            analytic.len()
        )));
    }
    let mut report = GradReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        checked: 0,
        skipped: 0,
    };
    let mut x = point.to_vec();
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + step;
        let plus = objective(&x)?;
        x[i] = orig - step;
        let minus = objective(&x)?;
        x[i] = orig;
        let (Some(plus), Some(minus)) = (plus, minus) else {
            report.skipped += 1;
            continue;
        };
        if !plus.is_finite() || !minus.is_finite() || !analytic[i].is_finite() {
            return Err(Error::Numeric(format!(
                "gradient check coordinate {i}: f(x+h) = {plus}, f(x-h) = {minus}, analytic = {}",
                analytic[i]
            )));
        }
        let numeric = (plus - minus) / (2.0 * step);
        let err = relative_error(analytic[i], numeric);
        report.checked += 1;
        if report.checked == 1 || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = i;
            report.analytic_at_worst = analytic[i];
            report.numeric_at_worst = numeric;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_map_has_zero_error() {
        // f(x) = sum(x) has gradient 1 everywhere; central differences are exact.
        let x = [0.25, -0.5, 1.0, 2.0];
        let r = check_gradient(&x, 1e-3, &[1.0; 4], |p| Ok(Some(p.iter().sum()))).unwrap();
        assert_eq!(r.checked, 4);
        assert!(r.max_rel_error < 1e-10, "{r:?}");
    }

    #[test]
    fn detects_wrong_gradient() {
        let x = [1.0, 2.0];
        let r = check_gradient(&x, 1e-3, &[2.0, 5.0], |p| {
            Ok(Some(p[0] * p[0] + p[1] * p[1]))
        })
        .unwrap();
        assert_eq!(r.worst_index, 1);
        assert!((r.max_rel_error - 0.2).abs() < 1e-6);
    }

    #[test]
    fn non_finite_objective_names_coordinate() {
        let x = [1.0, 0.0];
        let err = check_gradient(&x, 1e-3, &[0.0, 0.0], |p| {
            Ok(Some(if p[1] != 0.0 { f64::NAN } else { 0.0 }))
        })
        .unwrap_err();
        assert!(matches!(err, Error::Numeric(ref m) if m.contains("coordinate 1")));
    }

    #[test]
    fn skipped_coordinates_are_counted() {
        let x = [1.0, 2.0, 3.0];
        let r = check_gradient(&x, 1e-3, &[1.0, 1.0, 1.0], |p| {
            Ok((p[1] == 2.0).then(|| p.iter().sum()))
        })
        .unwrap();
        assert_eq!(r.skipped, 1);
        assert_eq!(r.checked, 2);
    }

    #[test]
    fn floor_applies_to_tiny_values() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1e-9, 0.0) - 1e-3).abs() < 1e-15);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
    }
}
