use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{median, quantile};
use crate::coupling::{pair_quietly, resolve_radius_with, PairingOptions, RadiusSpec};
use crate::datagen::{simulate_dataset, Dataset, DgpConfig, DistanceScaling};
use crate::error::{Error, Result};
use crate::fl::{build_knn_weights, fit_sem_ml};
use crate::pl::{extract_paired_sample, solve_pl, sufficient_statistics, PlFit};
use crate::spatial::{distance_summary, DistanceMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub ns: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub phi: f64,
    pub radius: RadiusSpec,
    pub knn_k: usize,
    pub scaling: DistanceScaling,
    /// FL is not timed above this size.
    pub fl_max_n: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            ns: vec![500, 1000, 2000, 4000],
            repeats: 5,
            seed: 0,
            phi: 1.0,
            radius: RadiusSpec::Mean,
            knn_k: 5,
            scaling: DistanceScaling::MeanNn,
            fl_max_n: 5000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pl,
    Fl,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pl => "pl",
            Method::Fl => "fl",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingPoint {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub samples: Vec<f64>,
}

impl TimingPoint {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Least-squares line through `(ln n, ln seconds)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square residual on the log scale.
    pub rms_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodTiming {
    pub method: Method,
    pub points: Vec<TimingPoint>,
    pub fit: Option<LogLogFit>,
}

impl MethodTiming {
    pub fn median_at(&self, n: usize) -> Option<f64> {
        self.points.iter().find(|p| p.n == n).map(|p| p.median)
    }
}

/// Estimates on the benchmark datasets. Unlike the timings these are fully
/// determined by the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEstimate {
    pub n: usize,
    pub seed: u64,
    pub radius: f64,
    pub q: usize,
    pub pl_beta: f64,
    pub pl_sigma2: f64,
    pub pl_psi: f64,
    pub fl_beta: Option<f64>,
    pub fl_sigma2: Option<f64>,
    pub fl_rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub config: BenchConfig,
    pub pl: MethodTiming,
    pub fl: MethodTiming,
    pub estimates: Vec<BenchEstimate>,
}

pub fn loglog_fit(points: &[(usize, f64)]) -> Option<LogLogFit> {
    if points.len() < 2 {
        return None;
    }
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|&(n, t)| ((n as f64).ln(), t.ln()))
        .collect();
    let m = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / m;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xy
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Some(LogLogFit {
        slope,
        intercept,
        rms_residual: (rss / m).sqrt(),
    })
}

fn pl_pipeline(data: &Dataset, radius: f64) -> Result<(usize, PlFit)> {
    let cs = pair_quietly(&data.points, radius, &PairingOptions::default())?;
    let sample = extract_paired_sample(&data.points, &cs)?;
    Ok((cs.q(), solve_pl(&sufficient_statistics(&sample)?)?))
}

fn time_repeats<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<(T, Vec<f64>)> {
    let mut out = f()?; // warm-up, discarded
    let mut secs = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t = Instant::now();
        out = f()?;
        secs.push(t.elapsed().as_secs_f64().max(f64::MIN_POSITIVE));
    }
    Ok((out, secs))
}

fn point(n: usize, mut secs: Vec<f64>) -> TimingPoint {
    secs.sort_by(f64::total_cmp);
    TimingPoint {
        n,
        median: median(&secs),
        q1: quantile(&secs, 0.25),
        q3: quantile(&secs, 0.75),
        samples: secs,
    }
}

/// Times the PL pipeline (pairing plus solve, radius resolved beforehand)
/// and the FL pipeline (weights with spectrum plus concentrated ML) on one
/// dataset per `n`, generated from `seed`. Runs on the calling thread with
/// linear algebra forced sequential.
pub fn timing_benchmark(cfg: &BenchConfig) -> Result<TimingReport> {
    if cfg.repeats < 3 {
        return Err(Error::InvalidArgument(format!(
            "repeats = {} must be at least 3",
            cfg.repeats
        )));
    }
    if cfg.ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "ns must be strictly ascending".into(),
        ));
    }
    let prev = faer::get_global_parallelism();
    faer::set_global_parallelism(faer::Par::Seq);
    let result = run_bench(cfg);
    faer::set_global_parallelism(prev);
    result
}

fn run_bench(cfg: &BenchConfig) -> Result<TimingReport> {
    let mut pl_points = Vec::new();
    let mut fl_points = Vec::new();
    let mut estimates = Vec::new();
    for &n in &cfg.ns {
        let dgp = DgpConfig {
            scaling: cfg.scaling,
            ..DgpConfig::new(n, cfg.phi, cfg.seed)
        };
        let data = simulate_dataset(&dgp)?;
        let summary = distance_summary(&data.points, DistanceMode::auto(n))?;
        let radius = resolve_radius_with(&summary, cfg.radius)?;
        let ((q, pl), pl_secs) = time_repeats(cfg.repeats, || pl_pipeline(&data, radius))?;
        pl_points.push(point(n, pl_secs));

        let mut est = BenchEstimate {
            n,
            seed: cfg.seed,
            radius,
            q,
            pl_beta: pl.params.beta,
            pl_sigma2: pl.params.sigma2,
            pl_psi: pl.params.psi,
            fl_beta: None,
            fl_sigma2: None,
            fl_rho: None,
        };
        if n <= cfg.fl_max_n {
            let (fl, fl_secs) = time_repeats(cfg.repeats, || {
                let w = build_knn_weights(&data.points, cfg.knn_k)?;
                fit_sem_ml(&data.y, &data.x, &w)
            })?;
            fl_points.push(point(n, fl_secs));
            est.fl_beta = Some(fl.beta);
            est.fl_sigma2 = Some(fl.sigma2);
            est.fl_rho = Some(fl.rho);
        }
        log::info!("bench n = {n} done");
        estimates.push(est);
    }
    let fit =
        |pts: &[TimingPoint]| loglog_fit(&pts.iter().map(|p| (p.n, p.median)).collect::<Vec<_>>());
    Ok(TimingReport {
        config: cfg.clone(),
        pl: MethodTiming {
            method: Method::Pl,
            fit: fit(&pl_points),
            points: pl_points,
        },
        fl: MethodTiming {
            method: Method::Fl,
            fit: fit(&fl_points),
            points: fl_points,
        },
        estimates,
    })
}
