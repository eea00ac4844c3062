//! Executes a resolved task and reports the files it wrote.

use std::path::{Path, PathBuf};

use kdtpl::coupling::{pair_points_with, pairing_report, resolve_radius, PairingOptions};
use kdtpl::datagen::simulate_dataset;
use kdtpl::experiments::{buffer_sweep, report, run_montecarlo, timing_benchmark};
use kdtpl::fl::{build_knn_weights, fit_sem_ml};
use kdtpl::io::{
    read_couplets_file, read_points_file, write_couplets, write_file, write_points, write_unpaired,
};
use kdtpl::pl::{extract_paired_sample, solve_pl, sufficient_statistics};
use kdtpl::{Error, Result};

use crate::config::Task;

/// A file produced by a run. Timing files differ between runs.
#[derive(Debug, Clone)]
pub struct Output {
    pub path: PathBuf,
    pub deterministic: bool,
}

fn det(path: PathBuf) -> Output {
    Output {
        path,
        deterministic: true,
    }
}

fn timing(path: PathBuf) -> Output {
    Output {
        path,
        deterministic: false,
    }
}

fn observations(points: &kdtpl::spatial::PointSet) -> Result<(Vec<f64>, Vec<f64>)> {
    match (points.covariates(), points.responses()) {
        (Some(x), Some(y)) => Ok((x, y)),
        _ => Err(Error::InvalidPoints(
            "points file lacks x_cov/y_resp values".into(),
        )),
    }
}

fn write_csv_file(path: &Path, header: &[&str], row: &[String]) -> Result<()> {
    write_file(path, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(header)?;
        c.write_record(row)?;
        c.flush()?;
        Ok(())
    })
}

pub fn execute(task: &Task) -> Result<Vec<Output>> {
    match task {
        Task::Simulate { dgp, out } => {
            let data = simulate_dataset(dgp)?;
            write_file(out, |w| write_points(w, &data.points))?;
            log::info!(
                "simulated {} points, distance scale {}",
                dgp.n,
                data.distance_scale
            );
            Ok(vec![det(out.clone())])
        }
        Task::Pair {
            input,
            radius,
            order,
            min_separation,
            out,
            unpaired_out,
        } => {
            let points = read_points_file(input)?;
            let r = resolve_radius(&points, *radius)?;
            let opts = PairingOptions {
                order: *order,
                min_separation: *min_separation,
            };
            let cs = pair_points_with(&points, r, &opts)?;
            write_file(out, |w| write_couplets(w, &cs))?;
            let mut outputs = vec![det(out.clone())];
            if let Some(path) = unpaired_out {
                write_file(path, |w| write_unpaired(w, &cs))?;
                outputs.push(det(path.clone()));
            }
            let rep = pairing_report(&cs, points.len());
            log::info!("radius {r}: q = {}, pairing rate {:.4}", rep.q, rep.rate);
            Ok(outputs)
        }
        Task::FitPl {
            input,
            couplets,
            out,
        } => {
            let points = read_points_file(input)?;
            let cs = read_couplets_file(couplets, points.len())?;
            let sample = extract_paired_sample(&points, &cs)?;
            let fit = solve_pl(&sufficient_statistics(&sample)?)?;
            let p = fit.params;
            write_csv_file(
                out,
                &[
                    "beta",
                    "sigma2",
                    "psi",
                    "q",
                    "converged",
                    "iterations",
                    "loglik",
                ],
                &[
                    p.beta.to_string(),
                    p.sigma2.to_string(),
                    p.psi.to_string(),
                    fit.q.to_string(),
                    fit.converged.to_string(),
                    fit.iterations.to_string(),
                    fit.loglik.to_string(),
                ],
            )?;
            Ok(vec![det(out.clone())])
        }
        Task::FitFl { input, knn_k, out } => {
            let points = read_points_file(input)?;
            let (x, y) = observations(&points)?;
            let w = build_knn_weights(&points, *knn_k)?;
            let fit = fit_sem_ml(&y, &x, &w)?;
            write_csv_file(
                out,
                &["beta", "sigma2", "rho", "loglik", "converged"],
                &[
                    fit.beta.to_string(),
                    fit.sigma2.to_string(),
                    fit.rho.to_string(),
                    fit.loglik.to_string(),
                    fit.converged.to_string(),
                ],
            )?;
            Ok(vec![det(out.clone())])
        }
        Task::Mc { mc, out_dir } | Task::Buffers { mc, out_dir } => {
            let rep = if matches!(task, Task::Buffers { .. }) {
                buffer_sweep(mc)?
            } else {
                run_montecarlo(mc)?
            };
            let (csv_path, timing_path, json_path) = (
                out_dir.join("report.csv"),
                out_dir.join("timings.csv"),
                out_dir.join("report.json"),
            );
            write_file(&csv_path, |w| report::write_mc_csv(&rep, w))?;
            write_file(&timing_path, |w| report::write_mc_timings_csv(&rep, w))?;
            write_file(&json_path, |w| report::write_json(&rep, w))?;
            for row in &rep.rows {
                if !row.failures.is_empty() {
                    log::warn!(
                        "phi={} n={} radius={}: {} of {} replications failed",
                        row.phi,
                        row.n,
                        row.radius,
                        row.failures.len(),
                        row.reps
                    );
                }
            }
            Ok(vec![det(csv_path), timing(timing_path), timing(json_path)])
        }
        Task::Bench { bench, out_dir } => {
            let rep = timing_benchmark(bench)?;
            let paths = [
                out_dir.join("bench-estimates.csv"),
                out_dir.join("bench-summary.csv"),
                out_dir.join("timing-pl.csv"),
                out_dir.join("timing-fl.csv"),
                out_dir.join("bench.json"),
            ];
            write_file(&paths[0], |w| report::write_bench_estimates_csv(&rep, w))?;
            write_file(&paths[1], |w| report::write_timing_summary_csv(&rep, w))?;
            write_file(&paths[2], |w| report::write_timing_series_csv(&rep.pl, w))?;
            write_file(&paths[3], |w| report::write_timing_series_csv(&rep.fl, w))?;
            write_file(&paths[4], |w| report::write_json(&rep, w))?;
            for t in [&rep.pl, &rep.fl] {
                if let Some(f) = t.fit {
                    log::info!(
                        "{} log-log slope {:.3} (rms residual {:.3})",
                        t.method.name(),
                        f.slope,
                        f.rms_residual
                    );
                }
            }
            let [a, b, c, d, e] = paths;
            Ok(vec![det(a), timing(b), timing(c), timing(d), timing(e)])
        }
    }
}

/// Seeds that determine the outputs of `task`.
pub fn seeds(task: &Task) -> Vec<u64> {
    match task {
        Task::Simulate { dgp, .. } => vec![dgp.seed],
        Task::Pair { order, .. } => match order {
            kdtpl::coupling::ScanOrder::Shuffled(s) => vec![*s],
            kdtpl::coupling::ScanOrder::Ascending => vec![],
        },
        Task::FitPl { .. } | Task::FitFl { .. } => vec![],
        Task::Mc { mc, .. } | Task::Buffers { mc, .. } => (0..mc.reps as u64)
            .map(|r| mc.base_seed.wrapping_add(r))
            .collect(),
        Task::Bench { bench, .. } => vec![bench.seed],
    }
}

/// Directory the run writes into, used for the default manifest location.
pub fn output_dir(task: &Task) -> PathBuf {
    let parent = |p: &Path| p.parent().map(Path::to_path_buf).unwrap_or_default();
    match task {
        Task::Simulate { out, .. }
        | Task::Pair { out, .. }
        | Task::FitPl { out, .. }
        | Task::FitFl { out, .. } => parent(out),
        Task::Mc { out_dir, .. } | Task::Buffers { out_dir, .. } | Task::Bench { out_dir, .. } => {
            out_dir.clone()
        }
    }
}

/// Same task with every output moved into `dir`, keeping file names.
pub fn rebase_outputs(task: &Task, dir: &Path) -> Task {
    let mv = |p: &PathBuf| dir.join(p.file_name().unwrap_or(p.as_os_str()));
    let mut t = task.clone();
    match &mut t {
        Task::Simulate { out, .. } | Task::FitPl { out, .. } | Task::FitFl { out, .. } => {
            *out = mv(out)
        }
        Task::Pair {
            out, unpaired_out, ..
        } => {
            *out = mv(out);
            *unpaired_out = unpaired_out.as_ref().map(mv);
        }
        Task::Mc { out_dir, .. } | Task::Buffers { out_dir, .. } | Task::Bench { out_dir, .. } => {
            *out_dir = dir.to_path_buf()
        }
    }
    t
}
