use std::path::Path;
use std::process::{Command, Output};

fn kdtpl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdtpl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn full_pipeline_writes_everything() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("pts.csv");
    let cpl = dir.path().join("couples.csv");
    let pl = dir.path().join("pl.csv");
    let fl = dir.path().join("fl.csv");

    let out = kdtpl(&[
        "simulate",
        "--n",
        "200",
        "--phi",
        "1",
        "--seed",
        "7",
        "--out",
        p(&pts),
    ]);
    ok(&out);
    let echo: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(echo["dgp"]["n"], 200);
    assert_eq!(echo["dgp"]["beta"], 1.0);
    assert_eq!(echo["command"], "simulate");

    ok(&kdtpl(&[
        "pair",
        "--in",
        p(&pts),
        "--radius",
        "mean+200",
        "--out",
        p(&cpl),
    ]));
    ok(&kdtpl(&[
        "fit-pl",
        "--in",
        p(&pts),
        "--couplets",
        p(&cpl),
        "--out",
        p(&pl),
    ]));
    ok(&kdtpl(&["fit-fl", "--in", p(&pts), "--out", p(&fl)]));

    let text = std::fs::read_to_string(&pl).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "beta,sigma2,psi,q,converged,iterations,loglik"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let beta: f64 = row[0].parse().unwrap();
    assert!((beta - 1.0).abs() < 0.3);
    assert!(row[3].parse::<usize>().unwrap() >= 90);
    let fl_text = std::fs::read_to_string(&fl).unwrap();
    assert!(fl_text.starts_with("beta,sigma2,rho,loglik,converged\n"));

    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("run-manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn mc_without_seed_is_a_usage_error() {
    let out = kdtpl(&["mc", "--out-dir", "nowhere"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = kdtpl(&["bench", "--out-dir", "nowhere"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(kdtpl(&["simulate", "--bogus"]).status.code(), Some(2));
}

#[test]
fn two_couplets_fail_with_machine_readable_error() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("pts.csv");
    ok(&kdtpl(&[
        "simulate",
        "--n",
        "20",
        "--phi",
        "1",
        "--seed",
        "1",
        "--out",
        p(&pts),
    ]));
    let cpl = dir.path().join("c.csv");
    std::fs::write(&cpl, "i,l,dist\n0,1,1.0\n2,3,1.0\n").unwrap();
    let out = kdtpl(&[
        "fit-pl",
        "--in",
        p(&pts),
        "--couplets",
        p(&cpl),
        "--out",
        p(&dir.path().join("f.csv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let line: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(line["error"], "InsufficientCouples");
}

#[test]
fn missing_input_reports_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.csv");
    let out = kdtpl(&[
        "pair",
        "--in",
        p(&missing),
        "--out",
        p(&dir.path().join("c.csv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.csv"));
}

#[test]
fn config_file_precedence_and_strictness() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"n": 30, "phi": 0.8, "seed": 3, "beta": 2.0}"#).unwrap();
    let out = kdtpl(&[
        "--config",
        p(&cfg),
        "simulate",
        "--n",
        "40",
        "--out",
        p(&dir.path().join("a.csv")),
    ]);
    ok(&out);
    let echo: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(echo["dgp"]["n"], 40);
    assert_eq!(echo["dgp"]["phi"], 0.8);
    assert_eq!(echo["dgp"]["beta"], 2.0);

    std::fs::write(&cfg, r#"{"n": 30, "typo": 1}"#).unwrap();
    let out = kdtpl(&[
        "--config",
        p(&cfg),
        "simulate",
        "--out",
        p(&dir.path().join("b.csv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for f in [&a, &b] {
        ok(&kdtpl(&[
            "simulate",
            "--n",
            "150",
            "--phi",
            "1",
            "--seed",
            "11",
            "--out",
            p(f),
        ]));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let (ra, rb) = (dir.path().join("ra"), dir.path().join("rb"));
    for (d, w) in [(&ra, "1"), (&rb, "2")] {
        ok(&kdtpl(&[
            "mc",
            "--seed",
            "9",
            "--ns",
            "60,90",
            "--phis",
            "0.8,1",
            "--reps",
            "3",
            "--workers",
            w,
            "--out-dir",
            p(d),
        ]));
    }
    assert_eq!(
        std::fs::read(ra.join("report.csv")).unwrap(),
        std::fs::read(rb.join("report.csv")).unwrap()
    );
}

#[test]
fn replay_reproduces_digests() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    ok(&kdtpl(&[
        "buffers",
        "--seed",
        "4",
        "--ns",
        "60",
        "--phis",
        "1",
        "--reps",
        "2",
        "--no-fl",
        "--out-dir",
        p(&run),
    ]));
    let out = kdtpl(&[
        "replay",
        "--from",
        p(&run.join("run-manifest.json")),
        "--out-dir",
        p(&dir.path().join("again")),
    ]);
    ok(&out);

    // A tampered digest is caught.
    let path = run.join("run-manifest.json");
    let mut m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    m["outputs"][0]["sha256"] = serde_json::Value::String("0".repeat(64));
    std::fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    let out = kdtpl(&[
        "replay",
        "--from",
        p(&path),
        "--out-dir",
        p(&dir.path().join("third")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("DigestMismatch"));
}

#[test]
fn bench_writes_plot_ready_series() {
    let dir = tempfile::tempdir().unwrap();
    ok(&kdtpl(&[
        "bench",
        "--seed",
        "2",
        "--ns",
        "100,200",
        "--repeats",
        "3",
        "--out-dir",
        p(dir.path()),
    ]));
    for f in [
        "bench-estimates.csv",
        "bench-summary.csv",
        "timing-pl.csv",
        "timing-fl.csv",
        "bench.json",
        "run-manifest.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let series = std::fs::read_to_string(dir.path().join("timing-fl.csv")).unwrap();
    assert_eq!(series.lines().next(), Some("n,seconds"));
    assert_eq!(series.lines().count(), 3);
}
