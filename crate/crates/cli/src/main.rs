use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qlayers::encodings::FeatureMapName;
use qlayers::experiment::{emit_plot_data, run_depth_study, run_feature_map_study, run_single, ExperimentConfig, StudyRun};

/// Hybrid quantum-classical experiment driver.
#[derive(Parser)]
#[command(name = "qlayers", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file; `QLAYERS_*` variables and flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    feature_map: Option<FeatureMapName>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    n_qubits: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    /// Number of synthetic pairs
    #[arg(long)]
    n_pairs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration
    Run(Common),
    /// One run per ansatz depth
    DepthStudy {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        depths: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// One run per feature map
    FmapStudy {
        #[command(flatten)]
        common: Common,
        /// Comma-separated names; all nine when omitted
        #[arg(long, value_delimiter = ',')]
        maps: Vec<String>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Write plot-ready CSVs for a finished run directory
    Plots {
        #[arg(long)]
        out: PathBuf,
    },
}

fn resolve(c: &Common) -> Result<ExperimentConfig> {
    let base = match &c.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    let mut cfg = base.apply_process_env()?;
    if let Some(s) = c.seed {
        cfg.train.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if let Some(f) = c.feature_map {
        cfg.feature_map = f;
    }
    if let Some(d) = c.depth {
        cfg.ansatz_depth = d;
    }
    if let Some(n) = c.n_qubits {
        cfg.n_qubits = n;
    }
    if let Some(e) = c.max_epochs {
        cfg.train.max_epochs = e;
        cfg.train.patience = cfg.train.patience.min(e);
    }
    if let Some(p) = c.patience {
        cfg.train.patience = p;
    }
    if let Some(n) = c.n_pairs {
        cfg.dataset.n_pairs = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(runs: &[StudyRun]) -> ExitCode {
    let mut code = ExitCode::SUCCESS;
    for r in runs {
        match &r.result {
            Ok(m) if m.diverged.is_some() => {
                eprintln!("{}: diverged", r.key);
                code = ExitCode::from(2);
            }
            Ok(m) => {
                let val = m.report.as_ref().map_or(0.0, |x| x.final_val);
                println!("{}: best val {:.4} (epoch {}), final val {val:.4}", r.key, m.best_val, m.best_epoch);
            }
            Err(e) => {
                eprintln!("{}: {e}", r.key);
                code = ExitCode::FAILURE;
            }
        }
    }
    code
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(c) => {
            let cfg = resolve(&c)?;
            let outcome = run_single(&cfg)?;
            if let Some(d) = &outcome.metrics.diverged {
                eprintln!("diverged at epoch {} batch {}: {}", d.epoch, d.batch, d.detail);
                return Ok(ExitCode::from(2));
            }
            println!(
                "{}: best val {:.4} at epoch {}",
                outcome.dir.display(),
                outcome.metrics.best_val,
                outcome.metrics.best_epoch
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::DepthStudy { common, depths, workers } => {
            let cfg = resolve(&common)?;
            Ok(report(&run_depth_study(&cfg, &depths, workers)?))
        }
        Command::FmapStudy { common, maps, workers } => {
            let cfg = resolve(&common)?;
            let names = if maps.is_empty() {
                FeatureMapName::ALL.iter().map(|m| m.as_str().to_string()).collect()
            } else {
                maps
            };
            Ok(report(&run_feature_map_study(&cfg, &names, workers)?))
        }
        Command::Plots { out } => {
            if !out.join("epochs.csv").exists() {
                bail!("{} is not a finished run directory", out.display());
            }
            println!("{}", emit_plot_data(&out)?.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
