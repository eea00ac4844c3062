//! CSV and JSON renderings of experiment results.
//!
//! Report CSVs carry only seed-determined values so repeated runs are
//! byte-identical; wall-clock numbers go to the timing CSVs and the JSON.

use std::io::Write;

use super::bench::{MethodTiming, TimingReport};
use super::metrics::Metrics;
use super::montecarlo::McReport;
use crate::error::Result;

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

const METRIC_COLS: [&str; 5] = ["theta", "ave", "bias", "rb", "mse"];

fn metric_header(prefix: &str) -> Vec<String> {
    METRIC_COLS
        .iter()
        .map(|c| format!("{prefix}_{c}"))
        .collect()
}

fn metric_fields(m: Option<&Metrics>) -> Vec<String> {
    match m {
        Some(m) => vec![
            num(m.theta),
            num(m.ave),
            num(m.bias),
            opt(m.rel_bias),
            num(m.mse),
        ],
        None => vec![String::new(); METRIC_COLS.len()],
    }
}

/// One row per `(phi, n, radius)` cell.
pub fn write_mc_csv<W: Write>(report: &McReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "phi",
        "n",
        "radius",
        "reps",
        "succeeded",
        "failed",
        "base_seed",
        "q_mean",
        "q_min",
        "q_max",
        "radius_mean",
        "pl_nonconverged",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for p in ["pl_beta", "pl_sigma", "pl_psi"] {
        header.extend(metric_header(p));
    }
    header.extend([
        "paired_corr_mean".into(),
        "implied_corr_mean".into(),
        "fl_count".into(),
        "fl_skipped".into(),
    ]);
    for p in ["fl_beta", "fl_sigma", "fl_rho"] {
        header.extend(metric_header(p));
    }
    w.write_record(&header)?;
    for r in &report.rows {
        let mut rec = vec![
            num(r.phi),
            r.n.to_string(),
            r.radius.to_string(),
            r.reps.to_string(),
            r.succeeded.to_string(),
            r.failures.len().to_string(),
            r.base_seed.to_string(),
            num(r.q_mean),
            r.q_min.to_string(),
            r.q_max.to_string(),
            num(r.radius_mean),
            r.pl_nonconverged.to_string(),
        ];
        for m in [&r.pl.beta, &r.pl.sigma, &r.pl.psi] {
            rec.extend(metric_fields(Some(m)));
        }
        rec.push(opt(r.paired_corr_mean));
        rec.push(num(r.implied_corr_mean));
        rec.push(r.fl.as_ref().map_or(0, |f| f.count).to_string());
        rec.push(r.fl_skipped.to_string());
        let fl = r.fl.as_ref();
        for m in [
            fl.map(|f| &f.beta),
            fl.map(|f| &f.sigma),
            fl.map(|f| &f.rho),
        ] {
            rec.extend(metric_fields(m));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Median stage timings per cell.
pub fn write_mc_timings_csv<W: Write>(report: &McReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "phi",
        "n",
        "radius",
        "pairing_median",
        "pl_solve_median",
        "fl_median",
    ])?;
    for r in &report.rows {
        w.write_record([
            num(r.phi),
            r.n.to_string(),
            r.radius.to_string(),
            num(r.times.pairing_median),
            num(r.times.pl_solve_median),
            opt(r.times.fl_median),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Estimates on the benchmark datasets; deterministic.
pub fn write_bench_estimates_csv<W: Write>(report: &TimingReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n",
        "seed",
        "radius",
        "q",
        "pl_beta",
        "pl_sigma2",
        "pl_psi",
        "fl_beta",
        "fl_sigma2",
        "fl_rho",
    ])?;
    for e in &report.estimates {
        w.write_record([
            e.n.to_string(),
            e.seed.to_string(),
            num(e.radius),
            e.q.to_string(),
            num(e.pl_beta),
            num(e.pl_sigma2),
            num(e.pl_psi),
            opt(e.fl_beta),
            opt(e.fl_sigma2),
            opt(e.fl_rho),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Plot-ready `n,seconds` medians for one method.
pub fn write_timing_series_csv<W: Write>(timing: &MethodTiming, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "seconds"])?;
    for p in &timing.points {
        w.write_record([p.n.to_string(), num(p.median)])?;
    }
    w.flush()?;
    Ok(())
}

/// Medians, quartiles and the log-log fit for both methods.
pub fn write_timing_summary_csv<W: Write>(report: &TimingReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method",
        "n",
        "median",
        "q1",
        "q3",
        "iqr",
        "slope",
        "rms_residual",
    ])?;
    for t in [&report.pl, &report.fl] {
        for p in &t.points {
            w.write_record([
                t.method.name().to_string(),
                p.n.to_string(),
                num(p.median),
                num(p.q1),
                num(p.q3),
                num(p.iqr()),
                opt(t.fit.map(|f| f.slope)),
                opt(t.fit.map(|f| f.rms_residual)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: serde::Serialize>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| crate::Error::Io(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{run_montecarlo, McConfig};

    #[test]
    fn mc_csv_shape() {
        let cfg = McConfig {
            phis: vec![1.0],
            ns: vec![80],
            reps: 2,
            run_fl: true,
            workers: Some(1),
            ..Default::default()
        };
        let report = run_montecarlo(&cfg).unwrap();
        let mut buf = Vec::new();
        write_mc_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let cols = lines[0].split(',').count();
        assert_eq!(lines[1].split(',').count(), cols);
        assert!(lines[0].starts_with("phi,n,radius,"));
        // rho has no relative bias
        let header: Vec<&str> = lines[0].split(',').collect();
        let row: Vec<&str> = lines[1].split(',').collect();
        let rb = header.iter().position(|h| *h == "fl_rho_rb").unwrap();
        assert_eq!(row[rb], "");

        let mut t = Vec::new();
        write_mc_timings_csv(&report, &mut t).unwrap();
        assert_eq!(String::from_utf8(t).unwrap().lines().count(), 2);
        let mut j = Vec::new();
        write_json(&report, &mut j).unwrap();
        let back: McReport = serde_json::from_slice(&j).unwrap();
        assert_eq!(back.rows.len(), 1);
    }
}
