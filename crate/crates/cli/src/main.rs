mod config;
mod manifest;
mod run;

use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use serde::Serialize;

use config::{resolve, Cli, Command, FileConfig, ReplayArgs, Resolved};
use manifest::{sha256_file, Manifest, MANIFEST_NAME};

fn init_logging(level: &str) {
    let filter = level.parse().unwrap_or(log::LevelFilter::Warn);
    let _ = env_logger::Builder::new().filter_level(filter).try_init();
}

fn init_workers(workers: usize) {
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
    {
        log::debug!("thread pool already configured: {e}");
    }
}

fn echo<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn run_resolved(
    resolved: &Resolved,
    manifest_path: Option<std::path::PathBuf>,
) -> anyhow::Result<()> {
    init_logging(&resolved.log_level);
    init_workers(resolved.workers);
    echo(resolved)?;
    let outputs = run::execute(&resolved.task)?;
    let manifest = Manifest::new(resolved.clone(), run::seeds(&resolved.task), &outputs)?;
    let path = manifest_path.unwrap_or_else(|| run::output_dir(&resolved.task).join(MANIFEST_NAME));
    manifest.write(&path)
}

#[derive(Serialize)]
struct ReplayCheck {
    path: std::path::PathBuf,
    expected: String,
    actual: String,
    matches: bool,
}

fn replay(args: &ReplayArgs, cli: &Cli) -> anyhow::Result<()> {
    let old = Manifest::read(&args.from)?;
    let mut resolved = old.config.clone();
    resolved.task = run::rebase_outputs(&resolved.task, &args.out_dir);
    if let Some(w) = cli.workers {
        resolved.workers = w;
    }
    init_logging(cli.log_level.as_deref().unwrap_or(&resolved.log_level));
    init_workers(resolved.workers);
    echo(&resolved)?;
    let outputs = run::execute(&resolved.task)?;
    let mut checks = Vec::new();
    for (rec, out) in old.outputs.iter().zip(&outputs) {
        if !rec.deterministic {
            continue;
        }
        let actual = sha256_file(&out.path)?;
        checks.push(ReplayCheck {
            path: out.path.clone(),
            matches: actual == rec.sha256,
            expected: rec.sha256.clone(),
            actual,
        });
    }
    echo(&checks)?;
    if let Some(bad) = checks.iter().find(|c| !c.matches) {
        anyhow::bail!(DigestMismatch(bad.path.display().to_string()));
    }
    Ok(())
}

#[derive(Debug)]
struct DigestMismatch(String);

impl std::fmt::Display for DigestMismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "digest of {} differs from the manifest", self.0)
    }
}

impl std::error::Error for DigestMismatch {}

fn error_kind(err: &anyhow::Error) -> &'static str {
    if let Some(e) = err.downcast_ref::<kdtpl::Error>() {
        e.kind()
    } else if err.downcast_ref::<std::io::Error>().is_some() {
        "Io"
    } else if err.downcast_ref::<DigestMismatch>().is_some() {
        "DigestMismatch"
    } else {
        "Config"
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| -> anyhow::Result<()> {
        if let Command::Replay(args) = &cli.command {
            return replay(args, &cli);
        }
        let file = match &cli.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let resolved = resolve(&cli, &file).context("resolving configuration")?;
        run_resolved(&resolved, cli.manifest.clone())
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let line = serde_json::json!({
                "error": error_kind(&err),
                "message": format!("{err:#}"),
            });
            eprintln!("{line}");
            ExitCode::from(1)
        }
    }
}
