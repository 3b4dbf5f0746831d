//! Tracking error metrics.

use crate::error::{Error, Result};

/// Root mean square of the per-step Euclidean errors.
pub fn rmse<T: AsRef<[f64]>>(truth: &[T], estimates: &[T]) -> Result<f64> {
    if truth.len() != estimates.len() {
        return Err(Error::LengthMismatch { left: truth.len(), right: estimates.len() });
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("rmse of an empty series".into()));
    }
    let mut sum = 0.0;
    for (a, b) in truth.iter().zip(estimates) {
        let (a, b) = (a.as_ref(), b.as_ref());
        if a.len() != b.len() {
            return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
        }
        sum += a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    }
    Ok((sum / truth.len() as f64).sqrt())
}

/// Planar position error.
pub fn euclidean_error(truth: (f64, f64), est: (f64, f64)) -> f64 {
    (truth.0 - est.0).hypot(truth.1 - est.1)
}

/// Running RMSE accumulator, for long runs that should not store series.
#[derive(Debug, Clone, Copy, Default)]
pub struct RmseAccumulator {
    sum_sq: f64,
    count: usize,
}

impl RmseAccumulator {
    pub fn push(&mut self, truth: &[f64], est: &[f64]) {
        self.sum_sq += truth.iter().zip(est).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn value(&self) -> Option<f64> {
        (self.count > 0).then(|| (self.sum_sq / self.count as f64).sqrt())
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rmse_examples() {
        let t = [[0.0], [0.0]];
        assert_eq!(rmse(&t, &t).unwrap(), 0.0);
        assert_eq!(rmse(&t, &[[1.0], [1.0]]).unwrap(), 1.0);
        assert_abs_diff_eq!(rmse(&t, &[[1.0], [0.0]]).unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
        assert!(matches!(rmse(&t[..1], &[[1.0], [0.0]]), Err(Error::LengthMismatch { left: 1, right: 2 })));
    }

    #[test]
    fn accumulator_matches_batch() {
        let t = [[0.0], [2.0], [1.0]];
        let e = [[1.0], [2.5], [-1.0]];
        let mut acc = RmseAccumulator::default();
        for (a, b) in t.iter().zip(&e) {
            acc.push(a, b);
        }
        assert_abs_diff_eq!(acc.value().unwrap(), rmse(&t, &e).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn euclidean_examples() {
        assert_eq!(euclidean_error((1.0, 2.0), (1.0, 2.0)), 0.0);
        assert_eq!(euclidean_error((0.0, 0.0), (3.0, 4.0)), 5.0);
        assert_eq!(euclidean_error((3.0, 4.0), (0.0, 0.0)), 5.0);
    }
}
