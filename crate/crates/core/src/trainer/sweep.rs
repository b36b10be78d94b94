use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use super::{run_experiment, Method, RunOutcome, TrainConfig};
use crate::error::Result;

/// Sample mean and standard deviation (n - 1 denominator). `None` when empty;
/// a single value has sd 0.
pub fn mean_and_sd(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

/// Final test accuracies of one (method, K, labeled size) cell across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub method: Method,
    pub k: usize,
    pub n_labeled: usize,
    /// `(seed, accuracy)` for seeds that finished, sorted by seed.
    pub accuracies: Vec<(u64, f64)>,
    /// `(seed, message)` for seeds that failed.
    pub failures: Vec<(u64, String)>,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
}

impl SweepCell {
    pub fn label(&self) -> String {
        self.method.label(self.k)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    pub fn cell(&self, method: Method, k: usize, n_labeled: usize) -> Option<&SweepCell> {
        self.cells.iter().find(|c| {
            c.method == method && c.n_labeled == n_labeled && (!method.uses_k() || c.k == k)
        })
    }
}

type Job = (usize, usize, u64);

/// Runs every (method, labeled size, seed) combination of `base` on up to
/// `threads` worker threads. `on_done` sees each finished run. Results do
/// not depend on the thread count.
pub fn run_sweep(
    base: &TrainConfig,
    sizes: &[usize],
    methods: &[(Method, usize)],
    seeds: &[u64],
    threads: usize,
    on_done: impl Fn(&TrainConfig, &Result<RunOutcome>) + Sync,
) -> SweepTable {
    let mut jobs: Vec<Job> = Vec::new();
    for mi in 0..methods.len() {
        for &size in sizes {
            for &seed in seeds {
                jobs.push((mi, size, seed));
            }
        }
    }
    let queue = Mutex::new(jobs.clone().into_iter());
    let results: Mutex<Vec<(Job, std::result::Result<f64, String>)>> = Mutex::new(Vec::new());
    let workers = threads.clamp(1, jobs.len().max(1));

    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let Some(job) = queue.lock().unwrap().next() else {
                    break;
                };
                let (mi, size, seed) = job;
                let (method, k) = methods[mi];
                let mut cfg = base.clone();
                cfg.method = method;
                cfg.k = k;
                cfg.seed = seed;
                cfg.dataset.n_labeled = size;
                let out = run_experiment(&cfg);
                on_done(&cfg, &out);
                let res = match out {
                    Ok(o) => o
                        .metrics
                        .final_test_accuracy
                        .ok_or_else(|| "no training steps".to_string()),
                    Err(e) => Err(e.to_string()),
                };
                results.lock().unwrap().push((job, res));
            });
        }
    });

    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(job, _)| *job);
    let mut table = SweepTable::default();
    for (mi, &(method, k)) in methods.iter().enumerate() {
        for &size in sizes {
            let mut accuracies = Vec::new();
            let mut failures = Vec::new();
            for ((_, _, seed), res) in results
                .iter()
                .filter(|((m, n, _), _)| *m == mi && *n == size)
            {
                match res {
                    Ok(a) => accuracies.push((*seed, *a)),
                    Err(e) => failures.push((*seed, e.clone())),
                }
            }
            let values: Vec<f64> = accuracies.iter().map(|(_, a)| *a).collect();
            let stats = mean_and_sd(&values);
            table.cells.push(SweepCell {
                method,
                k,
                n_labeled: size,
                accuracies,
                failures,
                mean: stats.map(|s| s.0),
                sd: stats.map(|s| s.1),
            });
        }
    }
    table
}
