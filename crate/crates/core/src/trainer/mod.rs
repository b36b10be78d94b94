//! Semi-supervised training: `loss = sup_loss + w_t * unsup_loss` with a
//! linearly ramped consistency weight, baseline selection, probing at a
//! fixed cadence and multi-seed sweeps.

mod config;
mod sweep;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use config::{DatasetKind, DatasetSpec, LambdaSharing, Method, TrainConfig};
pub use sweep::{mean_and_sd, run_sweep, SweepCell, SweepTable};

use crate::data::{
    gen_blobs, gen_three_moons, gen_two_moons, split_semisupervised, SemiSupervisedDataset,
};
use crate::error::{Error, Result};
use crate::mixup::{
    ict_loss, mixup_supervised_batch, one_hot, sample_dirichlet, supervised_loss, Batch,
    DirichletParams, MixWeights,
};
use crate::netcore::{AdamState, GradientSet, Matrix, Network};
use crate::probes::{empirical_lipschitz, nonlinearity, LipschitzEstimate, NonLinProfile, PairSet};
use crate::rng::{stream, Stream, StreamRng};

/// `w_max * min(1, t / (ramp_fraction * total_steps))`.
pub fn consistency_weight(t: u64, cfg: &TrainConfig) -> f64 {
    let ramp = cfg.ramp_fraction * cfg.total_steps as f64;
    if ramp <= 0.0 {
        return cfg.w_max;
    }
    cfg.w_max * (t as f64 / ramp).min(1.0)
}

/// Losses of one update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub w_t: f64,
    pub sup_loss: f64,
    pub unsup_loss: f64,
    pub total: f64,
}

/// One logged training step. `step` counts completed updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub w_t: f64,
    pub sup_loss: f64,
    pub unsup_loss: f64,
    pub total_loss: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub records: Vec<StepRecord>,
    /// Test accuracy after the last update; `None` when no update ran.
    pub final_test_accuracy: Option<f64>,
    pub wall_time_seconds: f64,
}

fn draw_weights<R: Rng + ?Sized>(
    rows: usize,
    k: usize,
    alpha: f64,
    sharing: LambdaSharing,
    rng: &mut R,
) -> Result<Vec<MixWeights>> {
    let params = DirichletParams::new(alpha, k)?;
    match sharing {
        LambdaSharing::PerRow => (0..rows).map(|_| sample_dirichlet(params, rng)).collect(),
        LambdaSharing::PerBatch => Ok(vec![sample_dirichlet(params, rng)?; rows]),
    }
}

/// One Adam update on `sup_loss + w_t * unsup_loss`.
///
/// `labeled` holds one batch, or K batches for mixup. `unlabeled` holds the
/// K batches of the ICT loss and is ignored by the other methods. `rng`
/// supplies the mixup weights.
pub fn train_step<R: Rng + ?Sized>(
    net: &mut Network,
    opt: &mut AdamState,
    cfg: &TrainConfig,
    labeled: &[Batch],
    unlabeled: &[Matrix],
    t: u64,
    rng: &mut R,
) -> Result<StepLosses> {
    let first = labeled
        .first()
        .ok_or_else(|| Error::Parameter("train_step needs a labeled batch".into()))?;
    let mixed;
    let sup_batch = if cfg.method == Method::Mixup {
        let ws = draw_weights(
            first.inputs.rows(),
            labeled.len(),
            cfg.alpha,
            cfg.lambda_sharing,
            rng,
        )?;
        mixed = mixup_supervised_batch(labeled, &ws)?;
        &mixed
    } else {
        first
    };

    let trace = net.trace(&sup_batch.inputs)?;
    let (sup_loss, sup_grad) = supervised_loss(trace.logits(), &sup_batch.targets)?;
    let mut grads = GradientSet::zeros_like(net);
    net.backward_into(&trace, &sup_grad, &mut grads)?;

    let (w_t, unsup_loss) = if cfg.method == Method::Ict {
        let w_t = consistency_weight(t, cfg);
        let rows = unlabeled.first().map_or(0, Matrix::rows);
        let ws = draw_weights(rows, unlabeled.len(), cfg.alpha, cfg.lambda_sharing, rng)?;
        let ict = ict_loss(net, unlabeled, &ws, cfg.ict_options())?;
        if w_t > 0.0 {
            grads.add_scaled(&ict.grads, w_t);
        }
        (w_t, ict.value)
    } else {
        (0.0, 0.0)
    };

    let total = sup_loss + w_t * unsup_loss;
    if !total.is_finite() {
        return Err(Error::Numeric(format!(
            "step {t}: loss is not finite (sup {sup_loss}, unsup {unsup_loss}, w {w_t})"
        )));
    }
    opt.step(net, &grads)
        .map_err(|e| Error::Numeric(format!("step {t}: {e}")))?;
    Ok(StepLosses {
        w_t,
        sup_loss,
        unsup_loss,
        total,
    })
}

/// Minibatch index source. Splits at least as large as the batch are
/// walked in reshuffled epochs; smaller splits are sampled with replacement.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    n: usize,
    batch: usize,
    order: Vec<usize>,
    pos: usize,
}

impl BatchSampler {
    pub fn new(n: usize, batch: usize) -> Self {
        Self {
            n,
            batch,
            order: (0..n).collect(),
            pos: n,
        }
    }

    pub fn next_indices<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<usize> {
        if self.n < self.batch {
            return (0..self.batch)
                .map(|_| rng.random_range(0..self.n))
                .collect();
        }
        if self.pos + self.batch > self.n {
            self.order.shuffle(rng);
            self.pos = 0;
        }
        let out = self.order[self.pos..self.pos + self.batch].to_vec();
        self.pos += self.batch;
        out
    }
}

/// Generates and splits the configured dataset. Uses `dataset.data_seed`
/// when set, otherwise the run seed.
pub fn build_dataset(cfg: &TrainConfig) -> Result<SemiSupervisedDataset> {
    let spec = &cfg.dataset;
    let seed = spec.data_seed.unwrap_or(cfg.seed);
    let mut rng = stream(seed, Stream::Dataset);
    let data = match spec.kind {
        DatasetKind::TwoMoons => gen_two_moons(spec.n_points, spec.noise_sd, &mut rng)?,
        DatasetKind::ThreeMoons => gen_three_moons(spec.n_points, spec.noise_sd, &mut rng)?,
        DatasetKind::Blobs => gen_blobs(spec.n_points, &spec.centers(), spec.noise_sd, &mut rng)?,
    };
    split_semisupervised(
        &data,
        spec.classes(),
        spec.n_labeled,
        spec.n_test,
        spec.sampler,
        &mut stream(seed, Stream::Split),
    )
}

/// Steps (counted in completed updates) at which probes run: every
/// `cadence * total` steps plus the first and last.
pub fn probe_steps(total: u64, cadence: f64) -> Vec<u64> {
    let intervals = (1.0 / cadence).round().max(1.0) as u64;
    let mut steps: Vec<u64> = (0..=intervals)
        .map(|i| ((i as f64 * cadence * total as f64).round() as u64).min(total))
        .collect();
    steps.push(0);
    steps.push(total);
    steps.sort_unstable();
    steps.dedup();
    steps
}

/// The run's probe pairs, drawn from the test split, and the generator
/// state that seeds every probe's mixup weights.
pub fn probe_pairs(
    cfg: &TrainConfig,
    data: &SemiSupervisedDataset,
) -> Result<(PairSet, StreamRng)> {
    let mut rng = stream(cfg.seed, Stream::Probe);
    let pairs = PairSet::sample(&data.test.points, cfg.probe_pairs, &mut rng)?;
    Ok((pairs, rng))
}

pub fn accuracy(net: &Network, points: &Matrix, labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Ok(0.0);
    }
    let pred = net.predict(points)?;
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: TrainConfig,
    pub metrics: RunMetrics,
    pub nonlin: NonLinProfile,
    pub lipschitz: LipschitzEstimate,
    pub network: Network,
    pub dataset: SemiSupervisedDataset,
}

/// Mutable state of one run.
pub struct Experiment {
    cfg: TrainConfig,
    data: SemiSupervisedDataset,
    train_points: Matrix,
    train_targets: Matrix,
    net: Network,
    opt: AdamState,
    labeled_sampler: BatchSampler,
    unlabeled_sampler: Vec<BatchSampler>,
    labeled_rng: StreamRng,
    unlabeled_rng: StreamRng,
    mix_rng: StreamRng,
    pairs: PairSet,
    probe_rng: StreamRng,
    step: u64,
}

impl Experiment {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let data = build_dataset(&cfg)?;
        let classes = data.class_count;
        let (train_points, train_labels) = if cfg.method == Method::Ideal {
            let labels: Vec<usize> = data
                .labeled
                .labels
                .iter()
                .chain(&data.unlabeled.withheld_labels)
                .copied()
                .collect();
            (data.labeled.points.vstack(&data.unlabeled.points)?, labels)
        } else {
            (data.labeled.points.clone(), data.labeled.labels.clone())
        };
        if cfg.method == Method::Ict && data.unlabeled.is_empty() {
            return Err(Error::Parameter(
                "ict needs a non-empty unlabeled split".into(),
            ));
        }
        let train_targets = one_hot(&train_labels, classes)?;
        let net = Network::mlp(2, &cfg.hidden, classes, &mut stream(cfg.seed, Stream::Init));
        let opt = AdamState::new(&net, cfg.adam)?;
        let (pairs, pair_rng) = probe_pairs(&cfg, &data)?;
        let k = if cfg.method.uses_k() { cfg.k } else { 1 };
        Ok(Self {
            labeled_sampler: BatchSampler::new(train_labels.len(), cfg.batch_size),
            unlabeled_sampler: vec![BatchSampler::new(data.unlabeled.len(), cfg.batch_size); k],
            labeled_rng: stream(cfg.seed, Stream::Labeled),
            unlabeled_rng: stream(cfg.seed, Stream::Unlabeled),
            mix_rng: stream(cfg.seed, Stream::Dirichlet),
            probe_rng: pair_rng,
            pairs,
            train_points,
            train_targets,
            net,
            opt,
            data,
            cfg,
            step: 0,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn dataset(&self) -> &SemiSupervisedDataset {
        &self.data
    }

    pub fn probe_pairs(&self) -> &PairSet {
        &self.pairs
    }

    /// Completed updates so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn test_accuracy(&self) -> Result<f64> {
        accuracy(&self.net, &self.data.test.points, &self.data.test.labels)
    }

    /// Per-tap nonlinearity of the current network. Every call uses the same
    /// pairs and the same mixup weights.
    pub fn probe_nonlinearity(&self) -> Result<Vec<f64>> {
        nonlinearity(
            &self.net,
            &self.pairs,
            self.cfg.alpha,
            &mut self.probe_rng.clone(),
        )
    }

    pub fn probe_lipschitz(&self) -> Result<LipschitzEstimate> {
        empirical_lipschitz(&self.net, &self.pairs)
    }

    /// Runs one update and returns its losses.
    pub fn advance(&mut self) -> Result<StepLosses> {
        let k = if self.cfg.method == Method::Mixup {
            self.cfg.k
        } else {
            1
        };
        let labeled: Vec<Batch> = (0..k)
            .map(|_| {
                let idx = self.labeled_sampler.next_indices(&mut self.labeled_rng);
                Batch {
                    inputs: self.train_points.select_rows(&idx),
                    targets: self.train_targets.select_rows(&idx),
                }
            })
            .collect();
        let unlabeled: Vec<Matrix> = if self.cfg.method == Method::Ict {
            self.unlabeled_sampler
                .iter_mut()
                .map(|s| {
                    let idx = s.next_indices(&mut self.unlabeled_rng);
                    self.data.unlabeled.points.select_rows(&idx)
                })
                .collect()
        } else {
            Vec::new()
        };
        let losses = train_step(
            &mut self.net,
            &mut self.opt,
            &self.cfg,
            &labeled,
            &unlabeled,
            self.step,
            &mut self.mix_rng,
        )?;
        self.step += 1;
        Ok(losses)
    }

    /// Trains to `total_steps`, probing on schedule. `observe` sees the
    /// network at every probe step.
    pub fn run(mut self, mut observe: impl FnMut(u64, &Network)) -> Result<RunOutcome> {
        let start = Instant::now();
        let total = self.cfg.total_steps;
        let schedule = probe_steps(total, self.cfg.probe_cadence);
        let mut metrics = RunMetrics::default();
        let mut nonlin = NonLinProfile::default();
        let mut next_probe = schedule.iter().peekable();

        loop {
            if next_probe.peek() == Some(&&self.step) {
                next_probe.next();
                nonlin.push_scores(self.step, &self.probe_nonlinearity()?, self.pairs.len());
                observe(self.step, &self.net);
            }
            if self.step >= total {
                break;
            }
            let losses = self.advance()?;
            if self.step.is_multiple_of(self.cfg.log_every) || self.step == total {
                metrics.records.push(StepRecord {
                    step: self.step,
                    w_t: losses.w_t,
                    sup_loss: losses.sup_loss,
                    unsup_loss: losses.unsup_loss,
                    total_loss: losses.total,
                    test_accuracy: self.test_accuracy()?,
                });
            }
        }
        metrics.final_test_accuracy = metrics.records.last().map(|r| r.test_accuracy);
        let lipschitz = self.probe_lipschitz()?;
        metrics.wall_time_seconds = start.elapsed().as_secs_f64();
        Ok(RunOutcome {
            config: self.cfg,
            metrics,
            nonlin,
            lipschitz,
            network: self.net,
            dataset: self.data,
        })
    }
}

/// Builds, trains and probes one configuration.
pub fn run_experiment(cfg: &TrainConfig) -> Result<RunOutcome> {
    Experiment::new(cfg.clone())?.run(|_, _| {})
}
