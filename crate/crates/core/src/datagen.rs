//! Synthetic irregular spatial data.
//!
//! Locations are uniform on a square. Errors are a Gaussian field with
//! exponential correlation `exp(-phi d)` over scaled distances `d`, drawn as
//! `sigma L z` with `L` the Cholesky factor of the correlation matrix. The
//! covariate is standard normal and `y = beta x + eps`.
//!
//! Random draws for one seed happen in a fixed order: coordinates
//! (`x`, `y` per point), then `z`, then the covariate.

use std::fmt;
use std::str::FromStr;

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fl::WeightsMatrix;
use crate::spatial::{distance_summary, DistanceMode, KdTree, PointSet};

/// Largest dataset the dense generator accepts.
pub const MAX_DENSE_N: usize = 20_000;

/// Unit in which distances enter the correlation function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceScaling {
    /// Divide by the mean nearest-neighbor distance.
    #[default]
    MeanNn,
    /// Divide by the mean pairwise distance.
    Mean,
    /// Divide by the maximum pairwise distance.
    Max,
}

impl fmt::Display for DistanceScaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceScaling::MeanNn => "mean-nn",
            DistanceScaling::Mean => "mean",
            DistanceScaling::Max => "max",
        })
    }
}

impl FromStr for DistanceScaling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean-nn" => Ok(DistanceScaling::MeanNn),
            "mean" => Ok(DistanceScaling::Mean),
            "max" => Ok(DistanceScaling::Max),
            _ => Err(Error::Parse(format!(
                "unknown distance scaling '{s}' (expected mean-nn, mean or max)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpConfig {
    pub n: usize,
    pub phi: f64,
    pub beta: f64,
    pub sigma: f64,
    pub domain: f64,
    pub scaling: DistanceScaling,
    pub seed: u64,
}

impl DgpConfig {
    pub fn new(n: usize, phi: f64, seed: u64) -> Self {
        Self {
            n,
            phi,
            beta: 1.0,
            sigma: 1.0,
            domain: 1000.0,
            scaling: DistanceScaling::MeanNn,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InsufficientPoints {
                required: 2,
                got: self.n,
            });
        }
        if self.n > MAX_DENSE_N {
            return Err(Error::InvalidArgument(format!(
                "n = {} exceeds the dense generator limit {MAX_DENSE_N}",
                self.n
            )));
        }
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "phi = {} must be positive",
                self.phi
            )));
        }
        if !(self.domain > 0.0 && self.domain.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "domain = {} must be positive",
                self.domain
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) || !self.beta.is_finite() {
            return Err(Error::InvalidArgument(
                "beta must be finite and sigma positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    /// Locations carrying `x` as covariate and `y` as response.
    pub points: PointSet,
    pub x: Vec<f64>,
    pub eps: Vec<f64>,
    pub y: Vec<f64>,
    /// Distance unit used by the correlation function (1 when not applicable).
    pub distance_scale: f64,
}

pub fn gen_locations<R: Rng + ?Sized>(n: usize, domain: f64, rng: &mut R) -> Result<PointSet> {
    if n < 2 {
        return Err(Error::InsufficientPoints {
            required: 2,
            got: n,
        });
    }
    PointSet::from_coords((0..n).map(|_| {
        let x = rng.random::<f64>() * domain;
        let y = rng.random::<f64>() * domain;
        (x, y)
    }))
}

/// Distance unit for `scaling` on this point set.
pub fn distance_scale(points: &PointSet, scaling: DistanceScaling) -> Result<f64> {
    let scale = match scaling {
        DistanceScaling::MeanNn => {
            let tree = KdTree::build(points)?;
            let mut total = 0.0;
            for i in 0..points.len() {
                total += tree.nearest_neighbors(i, 1, f64::INFINITY)?[0].distance;
            }
            total / points.len() as f64
        }
        DistanceScaling::Mean => distance_summary(points, DistanceMode::auto(points.len()))?.r_mean,
        DistanceScaling::Max => distance_summary(points, DistanceMode::auto(points.len()))?.r_max,
    };
    if scale > 0.0 && scale.is_finite() {
        Ok(scale)
    } else {
        Err(Error::InvalidPoints(format!(
            "degenerate distance scale {scale}"
        )))
    }
}

/// `exp(-phi d / scale)` for every pair, with an exact unit diagonal.
pub fn correlation_matrix_scaled(points: &PointSet, phi: f64, scale: f64) -> Mat<f64> {
    let n = points.len();
    let mut m = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = 1.0;
        for i in (j + 1)..n {
            let v = (-phi * points.distance(i, j) / scale).exp();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

pub fn correlation_matrix(
    points: &PointSet,
    phi: f64,
    scaling: DistanceScaling,
) -> Result<Mat<f64>> {
    if points.len() < 2 {
        return Err(Error::InsufficientPoints {
            required: 2,
            got: points.len(),
        });
    }
    let scale = distance_scale(points, scaling)?;
    Ok(correlation_matrix_scaled(points, phi, scale))
}

/// Lower Cholesky factor `L` with `L L^T = m`.
pub fn cholesky_lower(m: &Mat<f64>) -> Result<Mat<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    let llt = m.llt(Side::Lower).map_err(|_| Error::NotPositiveDefinite)?;
    Ok(llt.L().to_owned())
}

pub fn simulate_dataset(cfg: &DgpConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let points = gen_locations(cfg.n, cfg.domain, &mut rng)?;
    let scale = distance_scale(&points, cfg.scaling)?;
    let corr = correlation_matrix_scaled(&points, cfg.phi, scale);
    let l = cholesky_lower(&corr)?;
    drop(corr);
    let z: Vec<f64> = (0..cfg.n).map(|_| rng.sample(StandardNormal)).collect();
    let eps: Vec<f64> = (0..cfg.n)
        .map(|i| cfg.sigma * (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>())
        .collect();
    drop(l);
    let x: Vec<f64> = (0..cfg.n).map(|_| rng.sample(StandardNormal)).collect();
    finish(points, x, eps, cfg.beta, scale)
}

fn finish(points: PointSet, x: Vec<f64>, eps: Vec<f64>, beta: f64, scale: f64) -> Result<Dataset> {
    let y: Vec<f64> = x.iter().zip(&eps).map(|(xi, ei)| beta * xi + ei).collect();
    let points = points.with_observations(&x, &y)?;
    Ok(Dataset {
        points,
        x,
        eps,
        y,
        distance_scale: scale,
    })
}

/// Draws from the spatial error model itself: `u = (I - rho W)^{-1} eps`
/// with `eps ~ N(0, sigma^2 I)`, `y = beta x + u`. The random stream order
/// matches [`simulate_dataset`] with `eps` in place of `z`.
pub fn simulate_sem(
    points: &PointSet,
    w: &WeightsMatrix,
    beta: f64,
    sigma: f64,
    rho: f64,
    seed: u64,
) -> Result<Dataset> {
    let n = points.len();
    if w.n() != n {
        return Err(Error::InvalidArgument(
            "weights and points differ in size".into(),
        ));
    }
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "rho = {rho} must lie in (-1, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let innov: Vec<f64> = (0..n)
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    // Neumann series u = sum (rho W)^k eps; W is row-stochastic, so the
    // error shrinks by |rho| per pass.
    let mut u = innov.clone();
    for _ in 0..2000 {
        let wu = w.apply(&u);
        let next: Vec<f64> = innov.iter().zip(&wu).map(|(e, l)| e + rho * l).collect();
        let delta = next
            .iter()
            .zip(&u)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        u = next;
        if delta < 1e-14 {
            break;
        }
    }
    finish(points.clone(), x, u, beta, 1.0)
}
