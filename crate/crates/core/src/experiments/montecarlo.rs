use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, median, Metrics};
use crate::coupling::{pair_quietly, resolve_radius_with, PairingOptions, RadiusSpec};
use crate::datagen::{simulate_dataset, Dataset, DgpConfig, DistanceScaling};
use crate::error::{Error, Result};
use crate::fl::{build_knn_weights, fit_sem_ml};
use crate::pl::{extract_paired_sample, solve_pl, sufficient_statistics, PairedSample};
use crate::spatial::{distance_summary, DistanceMode, DistanceSummary};

/// Monte Carlo design: every `(phi, n, radius)` cell gets `reps`
/// replications, replication `r` using seed `base_seed + r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub phis: Vec<f64>,
    pub ns: Vec<usize>,
    pub reps: usize,
    pub radius_specs: Vec<RadiusSpec>,
    pub knn_k: usize,
    pub base_seed: u64,
    pub run_fl: bool,
    pub beta: f64,
    pub sigma: f64,
    pub domain: f64,
    pub scaling: DistanceScaling,
    /// FL is skipped (with a recorded reason) above this size.
    pub fl_max_n: usize,
    /// Per-cell FL wall-clock budget in seconds. Once spent, remaining
    /// replications of the cell skip FL, so FL columns then depend on
    /// machine speed.
    pub fl_time_budget: Option<f64>,
    /// Worker threads; `None` uses all available cores.
    pub workers: Option<usize>,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            phis: vec![0.8, 1.0],
            ns: vec![200, 800, 1800, 5000],
            reps: 100,
            radius_specs: vec![RadiusSpec::Mean],
            knn_k: 5,
            base_seed: 0,
            run_fl: true,
            beta: 1.0,
            sigma: 1.0,
            domain: 1000.0,
            scaling: DistanceScaling::MeanNn,
            fl_max_n: 5000,
            fl_time_budget: None,
            workers: None,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidArgument("reps must be at least 1".into()));
        }
        if self.ns.is_empty() || self.phis.is_empty() || self.radius_specs.is_empty() {
            return Err(Error::InvalidArgument(
                "phis, ns and radius specs must be nonempty".into(),
            ));
        }
        if self.knn_k == 0 {
            return Err(Error::InvalidArgument("knn k must be positive".into()));
        }
        Ok(())
    }

    pub fn dgp(&self, phi: f64, n: usize, seed: u64) -> DgpConfig {
        DgpConfig {
            n,
            phi,
            beta: self.beta,
            sigma: self.sigma,
            domain: self.domain,
            scaling: self.scaling,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlEstimate {
    pub beta: f64,
    pub sigma2: f64,
    pub sigma: f64,
    pub psi: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlEstimate {
    pub beta: f64,
    pub sigma2: f64,
    pub sigma: f64,
    pub rho: f64,
    pub converged: bool,
}

/// Wall-clock seconds for each stage of one replication.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub pairing: f64,
    pub pl_solve: f64,
    pub fl_weights: Option<f64>,
    pub fl_solve: Option<f64>,
}

/// Outcome of one replication under one radius spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub seed: u64,
    pub radius_spec: RadiusSpec,
    pub radius: Option<f64>,
    pub q: usize,
    pub pl: Option<PlEstimate>,
    /// Pearson correlation of the paired PL residuals.
    pub paired_corr: Option<f64>,
    /// Mean over couplets of the correlation the generator imposed on the pair.
    pub implied_corr: Option<f64>,
    pub fl: Option<FlEstimate>,
    pub fl_skipped: Option<String>,
    pub error: Option<String>,
    pub times: StageTimes,
}

fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len() as f64;
    if n < 2.0 {
        return None;
    }
    let (sa, sb) = pairs
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (ma, mb) = (sa / n, sb / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for &(a, b) in pairs {
        sab += (a - ma) * (b - mb);
        saa += (a - ma) * (a - ma);
        sbb += (b - mb) * (b - mb);
    }
    let r = sab / (saa * sbb).sqrt();
    r.is_finite().then_some(r)
}

struct FlSettings<'a> {
    knn_k: usize,
    max_n: usize,
    budget: Option<(f64, &'a AtomicU64)>,
}

/// PL (and optionally FL) on one already simulated dataset, once per radius spec.
fn replicate(
    data: &Dataset,
    phi: f64,
    seed: u64,
    specs: &[RadiusSpec],
    fl: Option<&FlSettings<'_>>,
) -> Vec<Replication> {
    let n = data.points.len();
    let summary: Option<Result<DistanceSummary>> = specs
        .iter()
        .any(RadiusSpec::needs_summary)
        .then(|| distance_summary(&data.points, DistanceMode::auto(n)));

    let (fl_est, fl_skipped, fl_w, fl_s, fl_err) = match fl {
        None => (None, None, None, None, None),
        Some(s) if n > s.max_n => (
            None,
            Some(format!("n = {n} exceeds FL cap {}", s.max_n)),
            None,
            None,
            None,
        ),
        Some(s)
            if s.budget
                .is_some_and(|(b, spent)| f64::from_bits(spent.load(Ordering::Relaxed)) > b) =>
        {
            (
                None,
                Some("FL time budget exhausted".to_string()),
                None,
                None,
                None,
            )
        }
        Some(s) => {
            let t0 = Instant::now();
            let w = build_knn_weights(&data.points, s.knn_k);
            let tw = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let fit = w.and_then(|w| fit_sem_ml(&data.y, &data.x, &w));
            let ts = t1.elapsed().as_secs_f64();
            if let Some((_, spent)) = s.budget {
                let mut cur = spent.load(Ordering::Relaxed);
                loop {
                    let next = (f64::from_bits(cur) + tw + ts).to_bits();
                    match spent.compare_exchange(cur, next, Ordering::Relaxed, Ordering::Relaxed) {
                        Ok(_) => break,
                        Err(actual) => cur = actual,
                    }
                }
            }
            match fit {
                Ok(f) => (
                    Some(FlEstimate {
                        beta: f.beta,
                        sigma2: f.sigma2,
                        sigma: f.sigma2.sqrt(),
                        rho: f.rho,
                        converged: f.converged,
                    }),
                    None,
                    Some(tw),
                    Some(ts),
                    None,
                ),
                Err(e) => (
                    None,
                    None,
                    Some(tw),
                    Some(ts),
                    Some(format!("FL: {}: {e}", e.kind())),
                ),
            }
        }
    };

    specs
        .iter()
        .map(|&spec| {
            let mut rep = Replication {
                seed,
                radius_spec: spec,
                radius: None,
                q: 0,
                pl: None,
                paired_corr: None,
                implied_corr: None,
                fl: fl_est,
                fl_skipped: fl_skipped.clone(),
                error: fl_err.clone(),
                times: StageTimes {
                    fl_weights: fl_w,
                    fl_solve: fl_s,
                    ..Default::default()
                },
            };
            let summary = summary.clone().unwrap_or(Ok(DistanceSummary {
                r_mean: 0.0,
                r_max: 0.0,
                exact: true,
            }));
            let run = || -> Result<()> {
                let radius = resolve_radius_with(&summary?, spec)?;
                rep.radius = Some(radius);
                let t0 = Instant::now();
                let cs = pair_quietly(&data.points, radius, &PairingOptions::default())?;
                rep.times.pairing = t0.elapsed().as_secs_f64();
                rep.q = cs.q();
                rep.implied_corr = (cs.q() > 0).then(|| {
                    cs.couplets()
                        .iter()
                        .map(|c| (-phi * c.dist / data.distance_scale).exp())
                        .sum::<f64>()
                        / cs.q() as f64
                });
                let t1 = Instant::now();
                let sample: PairedSample = extract_paired_sample(&data.points, &cs)?;
                let fit = solve_pl(&sufficient_statistics(&sample)?)?;
                rep.times.pl_solve = t1.elapsed().as_secs_f64();
                let p = fit.params;
                rep.pl = Some(PlEstimate {
                    beta: p.beta,
                    sigma2: p.sigma2,
                    sigma: p.sigma2.sqrt(),
                    psi: p.psi,
                    converged: fit.converged,
                    iterations: fit.iterations,
                });
                rep.paired_corr = pearson(&sample.residuals(p.beta).collect::<Vec<_>>());
                Ok(())
            };
            if let Err(e) = run() {
                let msg = format!("PL: {}: {e}", e.kind());
                rep.error = Some(match rep.error.take() {
                    Some(prev) => format!("{prev}; {msg}"),
                    None => msg,
                });
            }
            rep
        })
        .collect()
}

/// One full replication: simulate, pair, fit PL and optionally FL.
pub fn run_replication(
    cfg: &DgpConfig,
    radius: RadiusSpec,
    run_fl: bool,
    knn_k: usize,
) -> Result<Replication> {
    let data = simulate_dataset(cfg)?;
    let fl = run_fl.then_some(FlSettings {
        knn_k,
        max_n: usize::MAX,
        budget: None,
    });
    Ok(replicate(&data, cfg.phi, cfg.seed, &[radius], fl.as_ref())
        .pop()
        .expect("one radius spec"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlMetrics {
    pub beta: Metrics,
    pub sigma: Metrics,
    /// Against the mean implied couplet correlation.
    pub psi: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlMetrics {
    pub beta: Metrics,
    pub sigma: Metrics,
    /// Against zero; the generator has no SEM coefficient.
    pub rho: Metrics,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRep {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTimes {
    pub pairing_median: f64,
    pub pl_solve_median: f64,
    pub fl_median: Option<f64>,
}

/// Aggregated results for one `(phi, n, radius)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub phi: f64,
    pub n: usize,
    pub radius: RadiusSpec,
    pub reps: usize,
    pub succeeded: usize,
    pub failures: Vec<FailedRep>,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    pub q_mean: f64,
    pub q_min: usize,
    pub q_max: usize,
    pub radius_mean: f64,
    pub pl_nonconverged: usize,
    pub pl: PlMetrics,
    pub paired_corr_mean: Option<f64>,
    pub implied_corr_mean: f64,
    pub fl: Option<FlMetrics>,
    pub fl_skipped: usize,
    pub times: CellTimes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub config: McConfig,
    pub rows: Vec<McRow>,
    pub replications: Vec<Vec<Replication>>,
}

fn aggregate(
    cfg: &McConfig,
    phi: f64,
    n: usize,
    spec: RadiusSpec,
    reps: &[Replication],
) -> Result<McRow> {
    let cell = format!("phi={phi} n={n} radius={spec}");
    let ok: Vec<&Replication> = reps.iter().filter(|r| r.pl.is_some()).collect();
    if ok.is_empty() {
        return Err(Error::CellFailed {
            cell,
            reps: reps.len(),
        });
    }
    let failures = reps
        .iter()
        .filter(|r| r.pl.is_none())
        .map(|r| FailedRep {
            seed: r.seed,
            error: r.error.clone().unwrap_or_default(),
        })
        .collect();
    let pl: Vec<PlEstimate> = ok.iter().filter_map(|r| r.pl).collect();
    let col = |f: fn(&PlEstimate) -> f64| pl.iter().map(f).collect::<Vec<f64>>();
    let implied: Vec<f64> = ok.iter().filter_map(|r| r.implied_corr).collect();
    let implied_corr_mean = implied.iter().sum::<f64>() / implied.len().max(1) as f64;
    let corr: Vec<f64> = ok.iter().filter_map(|r| r.paired_corr).collect();
    let qs: Vec<usize> = ok.iter().map(|r| r.q).collect();

    let fl_est: Vec<FlEstimate> = reps.iter().filter_map(|r| r.fl).collect();
    let fl = if fl_est.is_empty() {
        None
    } else {
        let fcol = |f: fn(&FlEstimate) -> f64| fl_est.iter().map(f).collect::<Vec<f64>>();
        Some(FlMetrics {
            beta: compute_metrics(&fcol(|e| e.beta), cfg.beta)?,
            sigma: compute_metrics(&fcol(|e| e.sigma), cfg.sigma)?,
            rho: compute_metrics(&fcol(|e| e.rho), 0.0)?,
            count: fl_est.len(),
        })
    };
    let fl_times: Vec<f64> = reps
        .iter()
        .filter_map(|r| Some(r.times.fl_weights? + r.times.fl_solve?))
        .collect();

    Ok(McRow {
        phi,
        n,
        radius: spec,
        reps: reps.len(),
        succeeded: ok.len(),
        failures,
        base_seed: cfg.base_seed,
        seeds: reps.iter().map(|r| r.seed).collect(),
        q_mean: qs.iter().sum::<usize>() as f64 / qs.len() as f64,
        q_min: qs.iter().copied().min().unwrap_or(0),
        q_max: qs.iter().copied().max().unwrap_or(0),
        radius_mean: ok.iter().filter_map(|r| r.radius).sum::<f64>() / ok.len() as f64,
        pl_nonconverged: pl.iter().filter(|e| !e.converged).count(),
        pl: PlMetrics {
            beta: compute_metrics(&col(|e| e.beta), cfg.beta)?,
            sigma: compute_metrics(&col(|e| e.sigma), cfg.sigma)?,
            psi: compute_metrics(&col(|e| e.psi), implied_corr_mean)?,
        },
        paired_corr_mean: (!corr.is_empty()).then(|| corr.iter().sum::<f64>() / corr.len() as f64),
        implied_corr_mean,
        fl,
        fl_skipped: reps.iter().filter(|r| r.fl_skipped.is_some()).count(),
        times: CellTimes {
            pairing_median: median(&ok.iter().map(|r| r.times.pairing).collect::<Vec<_>>()),
            pl_solve_median: median(&ok.iter().map(|r| r.times.pl_solve).collect::<Vec<_>>()),
            fl_median: (!fl_times.is_empty()).then(|| median(&fl_times)),
        },
    })
}

pub(crate) fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs every cell of `mc`. Rows are ordered by `phi`, then `n`, then radius
/// spec, following the configuration order.
pub fn run_montecarlo(mc: &McConfig) -> Result<McReport> {
    mc.validate()?;
    // Parallelism lives at the replication level; keeping the linear algebra
    // sequential also makes results independent of the worker count.
    let prev = faer::get_global_parallelism();
    faer::set_global_parallelism(faer::Par::Seq);
    let result = run_cells(mc);
    faer::set_global_parallelism(prev);
    result
}

fn run_cells(mc: &McConfig) -> Result<McReport> {
    let mut tasks = Vec::new();
    for (pi, &phi) in mc.phis.iter().enumerate() {
        for (ni, &n) in mc.ns.iter().enumerate() {
            for r in 0..mc.reps {
                tasks.push((pi, ni, phi, n, r));
            }
        }
    }
    let budgets: Vec<AtomicU64> = (0..mc.phis.len() * mc.ns.len())
        .map(|_| AtomicU64::new(0f64.to_bits()))
        .collect();

    let results: Vec<Vec<Replication>> = with_workers(mc.workers, || {
        tasks
            .par_iter()
            .map(|&(pi, ni, phi, n, r)| {
                let seed = mc.base_seed.wrapping_add(r as u64);
                let fl = mc.run_fl.then(|| FlSettings {
                    knn_k: mc.knn_k,
                    max_n: mc.fl_max_n,
                    budget: mc
                        .fl_time_budget
                        .map(|b| (b, &budgets[pi * mc.ns.len() + ni])),
                });
                match simulate_dataset(&mc.dgp(phi, n, seed)) {
                    Ok(data) => replicate(&data, phi, seed, &mc.radius_specs, fl.as_ref()),
                    Err(e) => mc
                        .radius_specs
                        .iter()
                        .map(|&spec| Replication {
                            seed,
                            radius_spec: spec,
                            radius: None,
                            q: 0,
                            pl: None,
                            paired_corr: None,
                            implied_corr: None,
                            fl: None,
                            fl_skipped: None,
                            error: Some(format!("datagen: {}: {e}", e.kind())),
                            times: StageTimes::default(),
                        })
                        .collect(),
                }
            })
            .collect()
    })?;

    let mut rows = Vec::new();
    let mut replications = Vec::new();
    let mut chunks = results.chunks(mc.reps);
    for &phi in &mc.phis {
        for &n in &mc.ns {
            let block = chunks.next().expect("one chunk per (phi, n)");
            for (si, &spec) in mc.radius_specs.iter().enumerate() {
                let cell: Vec<Replication> = block.iter().map(|reps| reps[si].clone()).collect();
                rows.push(aggregate(mc, phi, n, spec, &cell)?);
                replications.push(cell);
            }
        }
    }
    Ok(McReport {
        config: mc.clone(),
        rows,
        replications,
    })
}

/// Monte Carlo over the standard radius family: mean, max and mean plus
/// buffers of 50 to 800 units.
pub fn buffer_sweep(mc: &McConfig) -> Result<McReport> {
    let cfg = McConfig {
        radius_specs: RadiusSpec::buffer_sweep(),
        ..mc.clone()
    };
    run_montecarlo(&cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> McConfig {
        McConfig {
            phis: vec![1.0],
            ns: vec![120],
            reps: 3,
            run_fl: false,
            base_seed: 17,
            workers: Some(2),
            ..Default::default()
        }
    }

    #[test]
    fn pearson_basics() {
        let v = [(1.0, 2.0), (2.0, 4.0), (3.0, 6.5)];
        assert!(pearson(&v).unwrap() > 0.99);
        assert!(pearson(&[(1.0, 1.0)]).is_none());
    }

    #[test]
    fn replication_is_deterministic() {
        let cfg = DgpConfig::new(200, 1.0, 5);
        let a = run_replication(&cfg, RadiusSpec::Mean, false, 5).unwrap();
        let b = run_replication(&cfg, RadiusSpec::Mean, false, 5).unwrap();
        assert_eq!(a.pl, b.pl);
        assert_eq!(a.q, b.q);
        assert!(a.fl.is_none());
        let pl = a.pl.unwrap();
        assert!(pl.beta.is_finite());
        assert!(pl.psi > -1.0 && pl.psi < 1.0);
        assert!(a.q >= 90, "q = {}", a.q);
    }

    #[test]
    fn single_rep_mse_is_squared_bias() {
        let report = run_montecarlo(&McConfig { reps: 1, ..small() }).unwrap();
        for row in &report.rows {
            for m in [&row.pl.beta, &row.pl.sigma, &row.pl.psi] {
                assert_eq!(m.mse, m.bias * m.bias);
            }
        }
    }

    #[test]
    fn fl_cap_is_recorded() {
        let cfg = McConfig {
            run_fl: true,
            fl_max_n: 100,
            ..small()
        };
        let report = run_montecarlo(&cfg).unwrap();
        assert!(report.rows[0].fl.is_none());
        assert_eq!(report.rows[0].fl_skipped, 3);
    }

    #[test]
    fn row_count_and_order() {
        let cfg = McConfig {
            phis: vec![0.8, 1.0],
            ns: vec![60, 80],
            reps: 2,
            radius_specs: vec![RadiusSpec::Mean, RadiusSpec::Max],
            ..small()
        };
        let report = run_montecarlo(&cfg).unwrap();
        assert_eq!(report.rows.len(), 8);
        assert_eq!((report.rows[0].phi, report.rows[0].n), (0.8, 60));
        assert_eq!(report.rows[1].radius, RadiusSpec::Max);
        assert_eq!(report.rows[7].seeds, vec![17, 18]);
    }

    #[test]
    fn invalid_configs() {
        assert!(run_montecarlo(&McConfig { reps: 0, ..small() }).is_err());
        assert!(run_montecarlo(&McConfig {
            ns: vec![],
            ..small()
        })
        .is_err());
    }

    #[test]
    fn all_failed_cell() {
        // Two points can never give three couplets.
        let err = run_montecarlo(&McConfig {
            ns: vec![2],
            ..small()
        })
        .unwrap_err();
        assert!(matches!(err, Error::CellFailed { .. }));
    }
}
