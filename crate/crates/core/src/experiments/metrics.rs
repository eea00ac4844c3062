use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Monte Carlo accuracy summary of one parameter.
///
/// `bias = |theta - ave|`, `rel_bias = bias / |theta|` (absent when
/// `theta = 0`) and `mse = variance + bias^2`, where `variance` is the mean
/// squared deviation of the estimates from their average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub theta: f64,
    pub ave: f64,
    pub bias: f64,
    pub rel_bias: Option<f64>,
    pub variance: f64,
    pub mse: f64,
    pub count: usize,
}

impl Metrics {
    pub fn relative_bias(&self) -> Result<f64> {
        self.rel_bias.ok_or(Error::RbUndefined)
    }
}

pub fn compute_metrics(estimates: &[f64], theta: f64) -> Result<Metrics> {
    if estimates.is_empty() {
        return Err(Error::InvalidArgument(
            "metrics need at least one estimate".into(),
        ));
    }
    let count = estimates.len();
    let ave = estimates.iter().sum::<f64>() / count as f64;
    let variance = estimates.iter().map(|e| (e - ave) * (e - ave)).sum::<f64>() / count as f64;
    let bias = (theta - ave).abs();
    let rel_bias = if theta != 0.0 {
        Some(bias / theta.abs())
    } else {
        None
    };
    Ok(Metrics {
        theta,
        ave,
        bias,
        rel_bias,
        variance,
        mse: variance + bias * bias,
        count,
    })
}

/// Median and quartiles by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_estimates() {
        let m = compute_metrics(&[1.0, 1.0, 1.0], 1.0).unwrap();
        assert_eq!((m.bias, m.rel_bias, m.mse), (0.0, Some(0.0), 0.0));
    }

    #[test]
    fn symmetric_spread() {
        let m = compute_metrics(&[0.9, 1.1], 1.0).unwrap();
        assert_abs_diff_eq!(m.ave, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.bias, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mse, 0.01, epsilon = 1e-15);
    }

    #[test]
    fn table_average_gives_table_relative_bias() {
        let m = compute_metrics(&[0.99517], 1.0).unwrap();
        assert_abs_diff_eq!(m.relative_bias().unwrap(), 0.00483, epsilon = 1e-12);
    }

    #[test]
    fn zero_truth_has_no_relative_bias() {
        let m = compute_metrics(&[0.1, -0.05], 0.0).unwrap();
        assert_eq!(m.relative_bias().unwrap_err(), Error::RbUndefined);
        assert!(compute_metrics(&[], 1.0).is_err());
    }

    #[test]
    fn single_estimate_mse_is_squared_bias() {
        let m = compute_metrics(&[1.3], 1.0).unwrap();
        assert_eq!(m.mse, m.bias * m.bias);
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
    }
}
