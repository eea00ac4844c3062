//! Command-line flags, the optional JSON config file, and their resolution
//! into a fully specified [`Resolved`] command.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use kdtpl::coupling::{RadiusSpec, ScanOrder};
use kdtpl::datagen::{DgpConfig, DistanceScaling};
use kdtpl::experiments::{BenchConfig, McConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "kdtpl",
    version,
    about = "KD-tree pairwise likelihood for spatial error models"
)]
pub struct Cli {
    /// JSON file with default values; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads (defaults to available cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true)]
    pub log_level: Option<String>,
    /// Where to write the run manifest (defaults to the output directory).
    #[arg(long, global = true, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate locations, covariate and correlated responses.
    Simulate(SimulateArgs),
    /// Pair points greedily with the KD-tree.
    Pair(PairArgs),
    /// Closed-form pairwise likelihood fit.
    FitPl(FitPlArgs),
    /// Full maximum likelihood fit of the spatial error model.
    FitFl(FitFlArgs),
    /// Monte Carlo study over phi, n and radius.
    Mc(McArgs),
    /// Monte Carlo study over the standard buffer radii.
    Buffers(McArgs),
    /// Runtime comparison of PL and FL.
    Bench(BenchArgs),
    /// Re-run a manifest and compare output digests.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub domain: Option<f64>,
    /// mean-nn, mean or max.
    #[arg(long)]
    pub scaling: Option<DistanceScaling>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// mean, max, mean+H or a positive number.
    #[arg(long)]
    pub radius: Option<RadiusSpec>,
    /// Scan points in a random order drawn from this seed.
    #[arg(long)]
    pub shuffle_seed: Option<u64>,
    #[arg(long)]
    pub min_separation: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the ids left unpaired.
    #[arg(long)]
    pub unpaired_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitPlArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub couplets: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitFlArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Neighbors per point in the weights matrix.
    #[arg(long, alias = "knn")]
    pub knn_k: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',')]
    pub phis: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Radius specs; ignored by `buffers`.
    #[arg(long, value_delimiter = ',')]
    pub radius: Option<Vec<RadiusSpec>>,
    #[arg(long, alias = "knn")]
    pub knn_k: Option<usize>,
    /// Skip the full likelihood baseline.
    #[arg(long)]
    pub no_fl: bool,
    #[arg(long)]
    pub fl_max_n: Option<usize>,
    /// Seconds of FL time per cell before FL is skipped.
    #[arg(long)]
    pub fl_time_budget: Option<f64>,
    #[arg(long)]
    pub scaling: Option<DistanceScaling>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub radius: Option<RadiusSpec>,
    #[arg(long, alias = "knn")]
    pub knn_k: Option<usize>,
    #[arg(long)]
    pub fl_max_n: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    #[arg(long = "from")]
    pub from: PathBuf,
    /// Directory receiving the regenerated outputs.
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Values accepted in the `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub n: Option<usize>,
    pub phi: Option<f64>,
    pub seed: Option<u64>,
    pub beta: Option<f64>,
    pub sigma: Option<f64>,
    pub domain: Option<f64>,
    pub scaling: Option<DistanceScaling>,
    pub radius: Option<RadiusSpec>,
    pub shuffle_seed: Option<u64>,
    pub min_separation: Option<f64>,
    pub knn_k: Option<usize>,
    pub phis: Option<Vec<f64>>,
    pub ns: Option<Vec<usize>>,
    pub reps: Option<usize>,
    pub radius_specs: Option<Vec<RadiusSpec>>,
    pub run_fl: Option<bool>,
    pub fl_max_n: Option<usize>,
    pub fl_time_budget: Option<f64>,
    pub repeats: Option<usize>,
    pub workers: Option<usize>,
    pub log_level: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// A command with every value filled in.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Task {
    Simulate {
        dgp: DgpConfig,
        out: PathBuf,
    },
    Pair {
        input: PathBuf,
        radius: RadiusSpec,
        order: ScanOrder,
        min_separation: Option<f64>,
        out: PathBuf,
        unpaired_out: Option<PathBuf>,
    },
    FitPl {
        input: PathBuf,
        couplets: PathBuf,
        out: PathBuf,
    },
    FitFl {
        input: PathBuf,
        knn_k: usize,
        out: PathBuf,
    },
    Mc {
        mc: McConfig,
        out_dir: PathBuf,
    },
    Buffers {
        mc: McConfig,
        out_dir: PathBuf,
    },
    Bench {
        bench: BenchConfig,
        out_dir: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Resolved {
    #[serde(flatten)]
    pub task: Task,
    pub workers: usize,
    pub log_level: String,
}

fn mc_config(a: &McArgs, f: &FileConfig, workers: usize, sweep: bool) -> McConfig {
    let d = McConfig::default();
    McConfig {
        phis: a.phis.clone().or(f.phis.clone()).unwrap_or(d.phis),
        ns: a.ns.clone().or(f.ns.clone()).unwrap_or(d.ns),
        reps: a.reps.or(f.reps).unwrap_or(d.reps),
        radius_specs: if sweep {
            RadiusSpec::buffer_sweep()
        } else {
            a.radius
                .clone()
                .or(f.radius_specs.clone())
                .unwrap_or(d.radius_specs)
        },
        knn_k: a.knn_k.or(f.knn_k).unwrap_or(d.knn_k),
        base_seed: a.seed,
        run_fl: if a.no_fl {
            false
        } else {
            f.run_fl.unwrap_or(d.run_fl)
        },
        beta: f.beta.unwrap_or(d.beta),
        sigma: f.sigma.unwrap_or(d.sigma),
        domain: f.domain.unwrap_or(d.domain),
        scaling: a.scaling.or(f.scaling).unwrap_or(d.scaling),
        fl_max_n: a.fl_max_n.or(f.fl_max_n).unwrap_or(d.fl_max_n),
        fl_time_budget: a.fl_time_budget.or(f.fl_time_budget),
        workers: Some(workers),
    }
}

/// Merges flags over the config file over built-in defaults.
pub fn resolve(cli: &Cli, file: &FileConfig) -> anyhow::Result<Resolved> {
    let workers = match cli.workers.or(file.workers) {
        Some(0) => bail!("--workers must be at least 1"),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let log_level = cli
        .log_level
        .clone()
        .or(file.log_level.clone())
        .unwrap_or_else(|| "warn".to_string());
    if log_level.parse::<log::LevelFilter>().is_err() {
        bail!("unknown log level '{log_level}'");
    }
    let task = match &cli.command {
        Command::Simulate(a) => {
            let n = a.n.or(file.n).context("--n is required")?;
            let phi = a.phi.or(file.phi).context("--phi is required")?;
            let seed = a.seed.or(file.seed).context("--seed is required")?;
            let d = DgpConfig::new(n, phi, seed);
            Task::Simulate {
                dgp: DgpConfig {
                    beta: a.beta.or(file.beta).unwrap_or(d.beta),
                    sigma: a.sigma.or(file.sigma).unwrap_or(d.sigma),
                    domain: a.domain.or(file.domain).unwrap_or(d.domain),
                    scaling: a.scaling.or(file.scaling).unwrap_or(d.scaling),
                    ..d
                },
                out: a.out.clone(),
            }
        }
        Command::Pair(a) => Task::Pair {
            input: a.input.clone(),
            radius: a.radius.or(file.radius).unwrap_or(RadiusSpec::Mean),
            order: a
                .shuffle_seed
                .or(file.shuffle_seed)
                .map_or(ScanOrder::Ascending, ScanOrder::Shuffled),
            min_separation: a.min_separation.or(file.min_separation),
            out: a.out.clone(),
            unpaired_out: a.unpaired_out.clone(),
        },
        Command::FitPl(a) => Task::FitPl {
            input: a.input.clone(),
            couplets: a.couplets.clone(),
            out: a.out.clone(),
        },
        Command::FitFl(a) => Task::FitFl {
            input: a.input.clone(),
            knn_k: a.knn_k.or(file.knn_k).unwrap_or(5),
            out: a.out.clone(),
        },
        Command::Mc(a) => Task::Mc {
            mc: mc_config(a, file, workers, false),
            out_dir: a.out_dir.clone(),
        },
        Command::Buffers(a) => Task::Buffers {
            mc: mc_config(a, file, workers, true),
            out_dir: a.out_dir.clone(),
        },
        Command::Bench(a) => {
            let d = BenchConfig::default();
            Task::Bench {
                bench: BenchConfig {
                    ns: a.ns.clone().or(file.ns.clone()).unwrap_or(d.ns),
                    repeats: a.repeats.or(file.repeats).unwrap_or(d.repeats),
                    seed: a.seed,
                    phi: a.phi.or(file.phi).unwrap_or(d.phi),
                    radius: a.radius.or(file.radius).unwrap_or(d.radius),
                    knn_k: a.knn_k.or(file.knn_k).unwrap_or(d.knn_k),
                    scaling: file.scaling.unwrap_or(d.scaling),
                    fl_max_n: a.fl_max_n.or(file.fl_max_n).unwrap_or(d.fl_max_n),
                },
                out_dir: a.out_dir.clone(),
            }
        }
        Command::Replay(_) => bail!("replay takes its configuration from the manifest"),
    };
    Ok(Resolved {
        task,
        workers,
        log_level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("kdtpl").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn simulate_maps_flags() {
        let cli = parse(&[
            "simulate", "--n", "200", "--phi", "1", "--seed", "7", "--out", "pts.csv",
        ]);
        let r = resolve(&cli, &FileConfig::default()).unwrap();
        match r.task {
            Task::Simulate { dgp, .. } => {
                assert_eq!((dgp.n, dgp.phi, dgp.seed), (200, 1.0, 7));
                assert_eq!(dgp.beta, 1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn radius_grammar() {
        let cli = parse(&[
            "pair", "--in", "p.csv", "--radius", "mean+200", "--out", "c.csv",
        ]);
        match resolve(&cli, &FileConfig::default()).unwrap().task {
            Task::Pair { radius, .. } => assert_eq!(radius, RadiusSpec::MeanPlusBuffer(200.0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file: FileConfig =
            serde_json::from_str(r#"{"reps": 7, "ns": [50], "phis": [0.5]}"#).unwrap();
        let cli = parse(&["mc", "--seed", "1", "--ns", "60,70", "--out-dir", "o"]);
        match resolve(&cli, &file).unwrap().task {
            Task::Mc { mc, .. } => {
                assert_eq!(mc.ns, vec![60, 70]);
                assert_eq!(mc.reps, 7);
                assert_eq!(mc.phis, vec![0.5]);
                assert_eq!(mc.knn_k, 5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_config_keys_rejected() {
        assert!(serde_json::from_str::<FileConfig>(r#"{"nn": 3}"#).is_err());
    }

    #[test]
    fn mc_requires_seed() {
        let err = Cli::try_parse_from(["kdtpl", "mc", "--out-dir", "o"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn buffers_use_sweep() {
        let cli = parse(&[
            "buffers",
            "--seed",
            "1",
            "--radius",
            "max",
            "--out-dir",
            "o",
        ]);
        match resolve(&cli, &FileConfig::default()).unwrap().task {
            Task::Buffers { mc, .. } => assert_eq!(mc.radius_specs, RadiusSpec::buffer_sweep()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn resolved_round_trips() {
        let cli = parse(&["bench", "--seed", "3", "--out-dir", "o"]);
        let r = resolve(&cli, &FileConfig::default()).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        let back: Resolved = serde_json::from_str(&json).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }
}
