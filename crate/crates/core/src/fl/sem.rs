use serde::{Deserialize, Serialize};

use super::WeightsMatrix;
use crate::error::{Error, Result};

const BOUNDARY_GAP: f64 = 1e-6;
const GRID_POINTS: usize = 41;
const RHO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemFit {
    pub beta: f64,
    pub sigma2: f64,
    pub rho: f64,
    pub loglik: f64,
    /// False when the maximum sits at the edge of the search interval.
    pub converged: bool,
}

/// GLS-profiled `beta`, `sigma2` and the concentrated log-likelihood at a
/// fixed `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemProfile {
    pub rho: f64,
    pub beta: f64,
    pub sigma2: f64,
    pub loglik: f64,
}

fn check_lengths(y: &[f64], x: &[f64], w: &WeightsMatrix) -> Result<()> {
    if y.len() != w.n() || x.len() != w.n() {
        return Err(Error::InvalidArgument(format!(
            "y and x must have length {} (got {} and {})",
            w.n(),
            y.len(),
            x.len()
        )));
    }
    Ok(())
}

fn check_rho(rho: f64, w: &WeightsMatrix) -> Result<()> {
    let (lower, upper) = w.rho_bounds();
    if rho > lower && rho < upper {
        Ok(())
    } else {
        Err(Error::InvalidRho { rho, lower, upper })
    }
}

/// Full log-likelihood
/// `-(n/2) ln(2 pi sigma2) + sum ln(1 - rho lambda_i) - |(I - rho W)(y - beta x)|^2 / (2 sigma2)`.
pub fn sem_loglik(
    y: &[f64],
    x: &[f64],
    w: &WeightsMatrix,
    beta: f64,
    sigma2: f64,
    rho: f64,
) -> Result<f64> {
    check_lengths(y, x, w)?;
    check_rho(rho, w)?;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "sigma2 = {sigma2} must be positive"
        )));
    }
    let n = y.len() as f64;
    let resid: Vec<f64> = y.iter().zip(x).map(|(yi, xi)| yi - beta * xi).collect();
    let lagged = w.apply(&resid);
    let ss: f64 = resid
        .iter()
        .zip(&lagged)
        .map(|(r, l)| {
            let f = r - rho * l;
            f * f
        })
        .sum();
    Ok(
        -0.5 * n * (2.0 * std::f64::consts::PI * sigma2).ln() + w.log_det(rho)
            - ss / (2.0 * sigma2),
    )
}

struct Concentrated<'a> {
    y: &'a [f64],
    x: &'a [f64],
    wy: Vec<f64>,
    wx: Vec<f64>,
    w: &'a WeightsMatrix,
}

impl Concentrated<'_> {
    fn at(&self, rho: f64) -> Result<SemProfile> {
        let n = self.y.len() as f64;
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for i in 0..self.y.len() {
            let xf = self.x[i] - rho * self.wx[i];
            let yf = self.y[i] - rho * self.wy[i];
            sxx += xf * xf;
            sxy += xf * yf;
        }
        if !(sxx > 1e-300) || !sxx.is_finite() {
            return Err(Error::SingularDesign);
        }
        let beta = sxy / sxx;
        let ss: f64 = (0..self.y.len())
            .map(|i| {
                let e = (self.y[i] - rho * self.wy[i]) - beta * (self.x[i] - rho * self.wx[i]);
                e * e
            })
            .sum();
        let sigma2 = ss / n;
        if !(sigma2 > 0.0) {
            return Err(Error::DegenerateVariance(sigma2));
        }
        let loglik =
            -0.5 * n * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0) + self.w.log_det(rho);
        Ok(SemProfile {
            rho,
            beta,
            sigma2,
            loglik,
        })
    }
}

/// Profiles `beta` and `sigma2` out at a given `rho`.
pub fn profile_at(y: &[f64], x: &[f64], w: &WeightsMatrix, rho: f64) -> Result<SemProfile> {
    check_lengths(y, x, w)?;
    check_rho(rho, w)?;
    Concentrated {
        y,
        x,
        wy: w.apply(y),
        wx: w.apply(x),
        w,
    }
    .at(rho)
}

/// Maximizes the concentrated likelihood over `rho`: a 41-point scan of the
/// admissible interval, then golden-section refinement between the scan
/// neighbors of the best point.
pub fn fit_sem_ml(y: &[f64], x: &[f64], w: &WeightsMatrix) -> Result<SemFit> {
    check_lengths(y, x, w)?;
    if y.len() < 10 {
        return Err(Error::InsufficientPoints {
            required: 10,
            got: y.len(),
        });
    }
    let conc = Concentrated {
        y,
        x,
        wy: w.apply(y),
        wx: w.apply(x),
        w,
    };
    let (lower, upper) = w.rho_bounds();
    let (lo, hi) = (lower + BOUNDARY_GAP, upper - BOUNDARY_GAP);

    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let grid: Vec<SemProfile> = (0..GRID_POINTS)
        .map(|i| {
            conc.at(if i == GRID_POINTS - 1 {
                hi
            } else {
                lo + step * i as f64
            })
        })
        .collect::<Result<_>>()?;
    let best_idx = (0..GRID_POINTS)
        .max_by(|&a, &b| grid[a].loglik.total_cmp(&grid[b].loglik))
        .expect("grid is nonempty");
    let mut best = grid[best_idx];

    let mut a = grid[best_idx.saturating_sub(1)].rho;
    let mut b = grid[(best_idx + 1).min(GRID_POINTS - 1)].rho;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = conc.at(c)?;
    let mut fd = conc.at(d)?;
    while (b - a).abs() > RHO_TOL {
        if fc.loglik >= fd.loglik {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = conc.at(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = conc.at(d)?;
        }
    }
    for cand in [fc, fd] {
        if cand.loglik > best.loglik {
            best = cand;
        }
    }
    let converged = best.rho - lo > RHO_TOL && hi - best.rho > RHO_TOL;
    Ok(SemFit {
        beta: best.beta,
        sigma2: best.sigma2,
        rho: best.rho,
        loglik: best.loglik,
        converged,
    })
}
