use serde::{Deserialize, Serialize};

use super::{loglik_from_stats, PlFit, PlParams, SufficientStats};
use crate::error::{Error, Result};

/// Fixed-point solver for the closed-form pairwise-likelihood equations.
///
/// Starting from `psi = 0` (the OLS point), each pass updates
///
/// ```text
/// beta   = (a3 - psi a4) / (a1 - 2 psi a5)
/// sigma2 = (a2 + beta^2 a1 - 2 beta a3 - 2 psi a6 - 2 psi beta^2 a5 + 2 psi beta a4)
///          / (2 q (1 - psi^2))
/// psi    = (a6 - beta a4 + beta^2 a5) / (q sigma2)
/// ```
///
/// in that order. The plain update for `psi` is a contraction only while
/// `psi^2 < 1/2`; if it has not settled after `plain_passes` passes (or hits
/// the clamp) the solver switches to the equivalent update obtained by
/// substituting the `sigma2` equation into the `psi` equation,
/// `psi = 2 (a6 - beta a4 + beta^2 a5) / (a2 - 2 beta a3 + beta^2 a1)`,
/// which has the same fixed points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlSolver {
    pub min_couples: usize,
    /// Absolute change per parameter that ends the iteration.
    pub tol: f64,
    pub max_iter: usize,
    pub psi_clamp: f64,
    pub plain_passes: usize,
}

impl Default for PlSolver {
    fn default() -> Self {
        Self {
            min_couples: 3,
            tol: 1e-10,
            max_iter: 1000,
            psi_clamp: 0.999,
            plain_passes: 200,
        }
    }
}

/// Solves with [`PlSolver::default`].
pub fn solve_pl(st: &SufficientStats) -> Result<PlFit> {
    PlSolver::default().solve(st)
}

impl PlSolver {
    pub fn solve(&self, st: &SufficientStats) -> Result<PlFit> {
        if st.q < self.min_couples {
            return Err(Error::InsufficientCouples {
                required: self.min_couples,
                got: st.q,
            });
        }
        let q = st.q as f64;
        let beta_of = |psi: f64| -> Result<f64> {
            let denom = st.a1 - 2.0 * psi * st.a5;
            if denom.abs() < 1e-12 || !denom.is_finite() {
                return Err(Error::SingularSystem { psi });
            }
            Ok((st.a3 - psi * st.a4) / denom)
        };
        let sigma2_of = |beta: f64, psi: f64| -> f64 {
            let num = st.a2 + beta * beta * st.a1
                - 2.0 * beta * st.a3
                - 2.0 * psi * st.a6
                - 2.0 * psi * beta * beta * st.a5
                + 2.0 * psi * beta * st.a4;
            num / (2.0 * q * (1.0 - psi * psi))
        };
        let clamp = |psi: f64| psi.clamp(-self.psi_clamp, self.psi_clamp);

        let mut psi = 0.0;
        let mut beta = beta_of(psi)?;
        let mut sigma2 = sigma2_of(beta, psi);
        let mut reduced = false;
        let mut converged = false;
        let mut iterations = 0;
        while iterations < self.max_iter {
            iterations += 1;
            let new_beta = beta_of(psi)?;
            let new_sigma2 = sigma2_of(new_beta, psi);
            if !(new_sigma2 > 0.0 && new_sigma2.is_finite()) {
                return Err(Error::DegenerateVariance(new_sigma2));
            }
            let raw_psi = if reduced {
                let (sum_sq, cross) = st.residual_sums(new_beta);
                2.0 * cross / sum_sq
            } else {
                (st.a6 - new_beta * st.a4 + new_beta * new_beta * st.a5) / (q * new_sigma2)
            };
            let new_psi = clamp(raw_psi);
            let (new_beta, new_sigma2) = if reduced {
                // Keep the reported triple on one consistent fixed point.
                (new_beta, sigma2_of(new_beta, new_psi))
            } else {
                (new_beta, new_sigma2)
            };
            let change = (new_beta - beta)
                .abs()
                .max((new_sigma2 - sigma2).abs())
                .max((new_psi - psi).abs());
            beta = new_beta;
            sigma2 = new_sigma2;
            psi = new_psi;
            if change < self.tol {
                converged = true;
                break;
            }
            let on_clamp = raw_psi.abs() >= self.psi_clamp;
            if !reduced && (iterations >= self.plain_passes || on_clamp) {
                log::debug!("switching psi update after {iterations} passes (psi = {psi})");
                reduced = true;
            }
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::DegenerateVariance(sigma2));
        }
        if psi.abs() >= self.psi_clamp {
            converged = false;
        }
        let params = PlParams { beta, sigma2, psi };
        let loglik = loglik_from_stats(st, &params)?;
        Ok(PlFit {
            params,
            iterations,
            converged,
            loglik,
            q: st.q,
        })
    }
}

/// Right-hand sides `(beta, sigma2, psi)` of the three estimating equations
/// at `p`. At a solution each equals the corresponding parameter.
pub fn equation_rhs(st: &SufficientStats, p: &PlParams) -> (f64, f64, f64) {
    let q = st.q as f64;
    let (beta, sigma2, psi) = (p.beta, p.sigma2, p.psi);
    let b = (st.a3 - psi * st.a4) / (st.a1 - 2.0 * psi * st.a5);
    let s = (st.a2 + beta * beta * st.a1
        - 2.0 * beta * st.a3
        - 2.0 * psi * st.a6
        - 2.0 * psi * beta * beta * st.a5
        + 2.0 * psi * beta * st.a4)
        / (2.0 * q * (1.0 - psi * psi));
    let r = (st.a6 - beta * st.a4 + beta * beta * st.a5) / (q * sigma2);
    (b, s, r)
}
