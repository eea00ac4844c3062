//! Pairwise likelihood for the spatial error model.
//!
//! Each couplet contributes the bivariate normal density of its two
//! regression errors with common variance `sigma2` and correlation `psi`.
//! The log-likelihood depends on the data only through six sums, so the
//! closed-form estimating equations are solved on those sums alone.

mod oracle;
mod sample;
mod solver;

pub use oracle::numerical_pl_mle;
pub use sample::{extract_paired_sample, sufficient_statistics, PairedSample, SufficientStats};
pub use solver::{equation_rhs, solve_pl, PlSolver};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlParams {
    pub beta: f64,
    pub sigma2: f64,
    pub psi: f64,
}

impl PlParams {
    pub fn new(beta: f64, sigma2: f64, psi: f64) -> Self {
        Self { beta, sigma2, psi }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() {
            return Err(Error::InvalidParams(format!("beta = {}", self.beta)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "sigma2 = {} must be positive",
                self.sigma2
            )));
        }
        if !(self.psi.abs() < 1.0) {
            return Err(Error::InvalidParams(format!(
                "psi = {} must lie in (-1, 1)",
                self.psi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlFit {
    pub params: PlParams,
    pub iterations: usize,
    pub converged: bool,
    pub loglik: f64,
    pub q: usize,
}

/// Pairwise log-likelihood summed over the couplets of `s`.
pub fn pairwise_loglik(s: &PairedSample, p: &PlParams) -> Result<f64> {
    p.validate()?;
    let one_m = 1.0 - p.psi * p.psi;
    let norm = (2.0 * std::f64::consts::PI * p.sigma2 * one_m.sqrt()).ln();
    let scale = 2.0 * p.sigma2 * one_m;
    let mut total = 0.0;
    for k in 0..s.q() {
        let ei = s.y_i[k] - p.beta * s.x_i[k];
        let el = s.y_l[k] - p.beta * s.x_l[k];
        total -= norm + (ei * ei - 2.0 * p.psi * ei * el + el * el) / scale;
    }
    Ok(total)
}

/// The same log-likelihood evaluated from the sufficient statistics.
pub fn loglik_from_stats(st: &SufficientStats, p: &PlParams) -> Result<f64> {
    p.validate()?;
    let q = st.q as f64;
    let one_m = 1.0 - p.psi * p.psi;
    let (sum_sq, cross) = st.residual_sums(p.beta);
    let norm = (2.0 * std::f64::consts::PI * p.sigma2 * one_m.sqrt()).ln();
    Ok(-q * norm - (sum_sq - 2.0 * p.psi * cross) / (2.0 * p.sigma2 * one_m))
}
