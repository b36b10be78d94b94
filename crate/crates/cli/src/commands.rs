//! Subcommand implementations, independent of argument parsing.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use ictlab_core::checkpoint;
use ictlab_core::data::SemiSupervisedDataset;
use ictlab_core::probes::nonlinearity;
use ictlab_core::raster::{rasterize_boundary, BoundaryRaster, Bounds};
use ictlab_core::trainer::{
    build_dataset, probe_pairs, run_sweep, RunOutcome, SweepCell, SweepTable,
};
use ictlab_core::{LipschitzEstimate, Network, NonLinRecord, TrainConfig};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::output::{self, OutputError};

pub const THREADS_ENV: &str = "ICT_LAB_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error(transparent)]
    Core(#[from] ictlab_core::Error),
    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, CommandError>;

/// Worker count: `ICT_LAB_THREADS` if set and positive, else the number of
/// available cores.
pub fn thread_limit() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Every point of the dataset, for fitting raster bounds.
pub fn all_points(data: &SemiSupervisedDataset) -> ictlab_core::Result<ictlab_core::Matrix> {
    data.labeled
        .points
        .vstack(&data.unlabeled.points)?
        .vstack(&data.test.points)
}

pub fn boundary_of(
    net: &Network,
    data: &SemiSupervisedDataset,
    resolution: usize,
) -> ictlab_core::Result<BoundaryRaster> {
    rasterize_boundary(net, Bounds::fit(&all_points(data)?)?, resolution)
}

/// Writes the per-run artifacts into `dir` and returns their paths.
pub fn write_run(dir: &Path, run: &RunOutcome, resolution: usize) -> Result<Vec<PathBuf>> {
    output::preflight(dir)?;
    let raster = boundary_of(&run.network, &run.dataset, resolution)?;
    let files: Vec<PathBuf> = [
        output::METRICS_FILE,
        output::NONLIN_FILE,
        output::LIPSCHITZ_FILE,
        output::BOUNDARY_CSV_FILE,
        output::BOUNDARY_PGM_FILE,
        output::CHECKPOINT_FILE,
    ]
    .iter()
    .map(|f| dir.join(f))
    .collect();
    output::write_metrics(&files[0], &run.metrics.records)?;
    output::write_nonlin(&files[1], &run.nonlin.records)?;
    output::write_lipschitz(&files[2], &run.lipschitz)?;
    output::write_boundary_csv(&files[3], &raster)?;
    output::write_pgm(&files[4], &raster, run.dataset.class_count)?;
    checkpoint::save(&run.network, &files[5])?;
    Ok(files)
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub n_labeled: usize,
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub failures: Vec<String>,
}

impl SummaryRow {
    fn from_cell(cell: &SweepCell, seeds: &[u64]) -> Self {
        Self {
            method: cell.label(),
            n_labeled: cell.n_labeled,
            seeds: seeds.to_vec(),
            accuracies: cell.accuracies.iter().map(|(_, a)| *a).collect(),
            mean: cell.mean,
            sd: cell.sd,
            failures: cell
                .failures
                .iter()
                .map(|(s, e)| format!("seed {s}: {e}"))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    /// Output files, relative to the output directory.
    pub files: Vec<String>,
    pub started_unix_seconds: u64,
    pub wall_time_seconds: f64,
}

fn relative(root: &Path, files: &[PathBuf]) -> Vec<String> {
    let mut out: Vec<String> = files
        .iter()
        .map(|f| {
            f.strip_prefix(root)
                .unwrap_or(f)
                .to_string_lossy()
                .replace('\\', "/")
        })
        .collect();
    out.sort();
    out
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Runs the grid and writes each run under `run_dir(cfg)`, then the summary
/// and manifest at the top of `out`.
fn run_grid(
    command: &str,
    cfg: &ExperimentConfig,
    sizes: &[usize],
    out: &Path,
    threads: usize,
    run_dir: impl Fn(&TrainConfig) -> PathBuf + Sync,
) -> Result<SweepTable> {
    output::preflight(out)?;
    let started = unix_now();
    let clock = Instant::now();
    let files = Mutex::new(Vec::new());
    let errors = Mutex::new(Vec::new());
    let table = run_sweep(
        &cfg.train,
        sizes,
        &cfg.sweep_methods,
        &cfg.seeds,
        threads,
        |train, res| {
            if let Ok(run) = res {
                match write_run(&out.join(run_dir(train)), run, cfg.resolution) {
                    Ok(f) => files.lock().unwrap().extend(f),
                    Err(e) => errors.lock().unwrap().push(e),
                }
            }
        },
    );
    if let Some(e) = errors.into_inner().unwrap().into_iter().next() {
        return Err(e);
    }
    let summary = Summary {
        rows: table
            .cells
            .iter()
            .map(|c| SummaryRow::from_cell(c, &cfg.seeds))
            .collect(),
    };
    let summary_path = out.join(output::SUMMARY_FILE);
    output::write_json(&summary_path, &summary)?;
    let mut files = files.into_inner().unwrap();
    files.push(summary_path);
    let manifest = RunManifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        seeds: cfg.seeds.clone(),
        files: relative(out, &files),
        started_unix_seconds: started,
        wall_time_seconds: clock.elapsed().as_secs_f64(),
    };
    output::write_json(&out.join(output::MANIFEST_FILE), &manifest)?;
    Ok(table)
}

/// Trains the configured method once per seed into `out/seed_<s>/`.
pub fn train(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<SweepTable> {
    let single = ExperimentConfig {
        sweep_methods: vec![(cfg.train.method, cfg.train.k)],
        ..cfg.clone()
    };
    run_grid(
        "train",
        &single,
        &[cfg.train.dataset.n_labeled],
        out,
        threads,
        |t| PathBuf::from(format!("seed_{}", t.seed)),
    )
}

/// Runs the labeled-size by method grid into `out/<method>_n<size>/seed_<s>/`.
pub fn sweep(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<SweepTable> {
    run_grid("sweep", cfg, &cfg.sweep_labels, out, threads, |t| {
        PathBuf::from(format!("{}_n{}", t.method_label(), t.dataset.n_labeled))
            .join(format!("seed_{}", t.seed))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub nonlin: Vec<NonLinRecord>,
    pub lipschitz: LipschitzEstimate,
}

/// Re-runs both probes on a checkpoint with the pairs and mixup weights its
/// training run used. Rows are stamped with the config's `total_steps`.
pub fn probe(checkpoint_path: &Path, train: &TrainConfig, out: &Path) -> Result<ProbeReport> {
    output::preflight(out)?;
    let net = checkpoint::load(checkpoint_path)?;
    let data = build_dataset(train)?;
    let (pairs, mut rng) = probe_pairs(train, &data)?;
    let scores = nonlinearity(&net, &pairs, train.alpha, &mut rng)?;
    let nonlin: Vec<NonLinRecord> = scores
        .iter()
        .enumerate()
        .map(|(layer, &score)| NonLinRecord {
            step: train.total_steps,
            layer,
            score,
            pair_count: pairs.len(),
        })
        .collect();
    let lipschitz = ictlab_core::probes::empirical_lipschitz(&net, &pairs)?;
    output::write_nonlin(&out.join(output::NONLIN_FILE), &nonlin)?;
    output::write_lipschitz(&out.join(output::LIPSCHITZ_FILE), &lipschitz)?;
    Ok(ProbeReport { nonlin, lipschitz })
}

/// Rasterizes a checkpoint over the config's dataset extent.
pub fn boundary(
    checkpoint_path: &Path,
    train: &TrainConfig,
    resolution: usize,
    out: &Path,
) -> Result<BoundaryRaster> {
    output::preflight(out)?;
    let net = checkpoint::load(checkpoint_path)?;
    let raster = boundary_of(&net, &build_dataset(train)?, resolution)?;
    output::write_boundary_csv(&out.join(output::BOUNDARY_CSV_FILE), &raster)?;
    output::write_pgm(
        &out.join(output::BOUNDARY_PGM_FILE),
        &raster,
        net.output_dim(),
    )?;
    Ok(raster)
}
