//! Central finite differences, the independent check on [`Tape::backward`].
//!
//! [`Tape::backward`]: super::Tape::backward

use super::Tensor;
use crate::error::{Error, Result};

/// Central-difference estimate of `∂f/∂p`, one coordinate at a time:
/// `(f(p + h·eᵢ) − f(p − h·eᵢ)) / 2h`.
pub fn finite_difference_gradient<F>(mut f: F, p: &Tensor, h: f64) -> Result<Tensor>
where
    F: FnMut(&Tensor) -> Result<f64>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Contract(format!("finite-difference step {h} must be positive")));
    }
    let mut probe = p.clone();
    let mut grad = Tensor::zeros(p.rows(), p.cols());
    for i in 0..p.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f(&probe)?;
        probe.data_mut()[i] = orig - h;
        let minus = f(&probe)?;
        probe.data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite {
                op: "finite_difference_gradient",
            });
        }
        grad.data_mut()[i] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// One coordinate that failed [`compare_gradients`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradMismatch {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub coordinates: usize,
    pub max_rel_err: f64,
    pub failures: Vec<GradMismatch>,
}

impl GradCheckReport {
    pub fn pass_fraction(&self) -> f64 {
        if self.coordinates == 0 {
            1.0
        } else {
            1.0 - self.failures.len() as f64 / self.coordinates as f64
        }
    }

    pub fn merge(&mut self, other: GradCheckReport) {
        let offset = self.coordinates;
        self.coordinates += other.coordinates;
        self.max_rel_err = self.max_rel_err.max(other.max_rel_err);
        self.failures.extend(other.failures.into_iter().map(|mut m| {
            m.index += offset;
            m
        }));
    }
}

/// Coordinate-wise comparison of analytic and numeric gradients.
///
/// Coordinates with `|analytic| < tiny` are compared absolutely against
/// `abs_tol`; the rest by relative error `|a − n| / max(|a|, |n|)` against
/// `rel_tol`.
pub fn compare_gradients(analytic: &Tensor, numeric: &Tensor, rel_tol: f64, tiny: f64, abs_tol: f64) -> GradCheckReport {
    assert_eq!(analytic.shape(), numeric.shape(), "gradient shapes differ");
    let mut report = GradCheckReport {
        coordinates: analytic.len(),
        ..Default::default()
    };
    for (index, (&a, &n)) in analytic.data().iter().zip(numeric.data()).enumerate() {
        let ok = if a.abs() < tiny {
            (a - n).abs() <= abs_tol
        } else {
            let rel = (a - n).abs() / a.abs().max(n.abs());
            report.max_rel_err = report.max_rel_err.max(rel);
            rel <= rel_tol
        };
        if !ok {
            report.failures.push(GradMismatch {
                index,
                analytic: a,
                numeric: n,
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact_up_to_rounding() {
        let g = finite_difference_gradient(|p| Ok(p.data()[0].powi(2)), &Tensor::scalar(3.0), 1e-5).unwrap();
        assert!((g.data()[0] - 6.0).abs() < 1e-8);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let p = Tensor::column_vector(&[1.0, 2.0, 3.0]);
        let g = finite_difference_gradient(|_| Ok(4.2), &p, 1e-5).unwrap();
        assert_eq!(g, Tensor::zeros(3, 1));
    }

    #[test]
    fn non_finite_evaluation_propagates() {
        let p = Tensor::scalar(0.0);
        let err = finite_difference_gradient(|p| Ok(p.data()[0].ln()), &p, 1e-5).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn comparison_uses_absolute_tolerance_for_tiny_gradients() {
        let a = Tensor::column_vector(&[1e-9, 1.0]);
        let n = Tensor::column_vector(&[5e-8, 1.00001]);
        let report = compare_gradients(&a, &n, 1e-4, 1e-8, 1e-7);
        assert!(report.failures.is_empty());
        let n = Tensor::column_vector(&[5e-7, 1.1]);
        assert_eq!(compare_gradients(&a, &n, 1e-4, 1e-8, 1e-7).failures.len(), 2);
    }
}
