use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ictlab_cli::commands::{self, thread_limit, CommandError};
use ictlab_cli::config::{self, parse_method, ExperimentConfig};
use ictlab_core::trainer::SweepTable;

/// Semi-supervised K-point mixup experiments on toy datasets.
///
/// Settings resolve as flag > config file > built-in default.
#[derive(Parser)]
#[command(name = "ictlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured method once per seed.
    Train(Common),
    /// Run the labeled-size by method grid.
    Sweep(Common),
    /// Re-run the probes on a saved network.
    Probe(Common),
    /// Rasterize the decision boundary of a saved network.
    Boundary(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Total training steps.
    #[arg(long)]
    steps: Option<u64>,
    /// Labeled examples; a comma-separated list for sweep.
    #[arg(long, value_delimiter = ',')]
    labels: Vec<usize>,
    /// Method name, optionally with K (erm, mixup, ict, ideal, ict3).
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    /// Network checkpoint for probe and boundary.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Raster cells per axis.
    #[arg(long)]
    resolution: Option<usize>,
}

impl Common {
    fn resolve(&self, sweep: bool) -> Result<ExperimentConfig, CommandError> {
        let mut cfg = match &self.config {
            Some(p) => config::parse_config(p).map_err(|e| CommandError::Usage(e.to_string()))?,
            None => ExperimentConfig::default(),
        };
        let t = &mut cfg.train;
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        if let Some(steps) = self.steps {
            t.total_steps = steps;
        }
        if let Some(name) = &self.method {
            let (m, k) = parse_method(name).map_err(CommandError::Usage)?;
            t.method = m;
            if let Some(k) = k {
                t.k = k;
            }
            if sweep {
                cfg.sweep_methods = vec![(m, k.unwrap_or(t.k))];
            }
        }
        if let Some(k) = self.k {
            t.k = k;
            if sweep {
                for (m, mk) in &mut cfg.sweep_methods {
                    if m.uses_k() {
                        *mk = k;
                    }
                }
            }
        }
        match (sweep, self.labels.as_slice()) {
            (_, []) => {}
            (true, sizes) => cfg.sweep_labels = sizes.to_vec(),
            (false, [n]) => t.dataset.n_labeled = *n,
            (false, _) => {
                return Err(CommandError::Usage(
                    "--labels takes one value outside sweep".into(),
                ))
            }
        }
        if let Some(r) = self.resolution {
            cfg.resolution = r;
        }
        // The single-run seed drives probe and boundary dataset rebuilding.
        cfg.train.seed = cfg.seeds[0];
        config::validate(&cfg)
            .map_err(|(key, msg)| CommandError::Usage(format!("invalid {key}: {msg}")))?;
        Ok(cfg)
    }

    fn checkpoint(&self) -> Result<&Path, CommandError> {
        self.checkpoint
            .as_deref()
            .ok_or_else(|| CommandError::Usage("--checkpoint is required".into()))
    }
}

fn print_table(table: &SweepTable) {
    println!(
        "{:<10} {:>9} {:>8} {:>8} {:>6}",
        "method", "n_labeled", "mean", "sd", "fails"
    );
    for c in &table.cells {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!(
            "{:<10} {:>9} {:>8} {:>8} {:>6}",
            c.label(),
            c.n_labeled,
            fmt(c.mean),
            fmt(c.sd),
            c.failures.len()
        );
        for (seed, e) in &c.failures {
            eprintln!("  seed {seed}: {e}");
        }
    }
}

fn run(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Train(a) => {
            let cfg = a.resolve(false)?;
            print_table(&commands::train(&cfg, &a.out, thread_limit())?);
        }
        Command::Sweep(a) => {
            let cfg = a.resolve(true)?;
            print_table(&commands::sweep(&cfg, &a.out, thread_limit())?);
        }
        Command::Probe(a) => {
            let cfg = a.resolve(false)?;
            let report = commands::probe(a.checkpoint()?, &cfg.train, &a.out)?;
            for r in &report.nonlin {
                println!("layer {} nonlin {:.6}", r.layer, r.score);
            }
            println!(
                "lipschitz mean {:.6} max {:.6}",
                report.lipschitz.mean_ratio, report.lipschitz.max_ratio
            );
        }
        Command::Boundary(a) => {
            let cfg = a.resolve(false)?;
            let r = commands::boundary(a.checkpoint()?, &cfg.train, cfg.resolution, &a.out)?;
            println!(
                "{0}x{0} raster written to {1}",
                r.resolution,
                a.out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
