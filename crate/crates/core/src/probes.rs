//! Representation probes on frozen networks.
//!
//! * [`nonlinearity`] scores how far each tap is from commuting with mixup:
//!   the mean over held-out pairs of
//!   `D(f̂(Mix(x1, x2)), Mix(f̂(x1), f̂(x2)))`, where `f̂` is the tap output
//!   scaled to unit norm per example. Lower is more linear.
//! * [`empirical_lipschitz`] reports the mean and max of
//!   `‖f(x1) − f(x2)‖ / ‖x1 − x2‖` on the logits.
//!
//! Neither probe mutates the network; given the same pairs and rng seed they
//! are bit-for-bit repeatable.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, shape, Result};
use crate::mixup::{mix_rows, sample_dirichlet, DirichletParams, DistanceKind, MixWeights};
use crate::netcore::{unit_normalize_in_place, Matrix, Network};

/// Number of held-out pairs used per probe invocation.
pub const DEFAULT_PAIR_COUNT: usize = 200;

/// Held-out input pairs, row `i` of `first` paired with row `i` of `second`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub first: Matrix,
    pub second: Matrix,
}

impl PairSet {
    pub fn new(first: Matrix, second: Matrix) -> Result<Self> {
        if first.shape() != second.shape() {
            return Err(shape("pair halves differ in shape"));
        }
        Ok(Self { first, second })
    }

    pub fn from_rows(pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        let a: Vec<&[f64]> = pairs.iter().map(|p| p.0.as_slice()).collect();
        let b: Vec<&[f64]> = pairs.iter().map(|p| p.1.as_slice()).collect();
        Self::new(Matrix::from_rows(&a)?, Matrix::from_rows(&b)?)
    }

    /// Draws `count` pairs of distinct row indices uniformly from `points`.
    pub fn sample<R: Rng + ?Sized>(points: &Matrix, count: usize, rng: &mut R) -> Result<Self> {
        let n = points.rows();
        if n < 2 {
            return Err(param("need at least two points to form pairs"));
        }
        let mut a = Vec::with_capacity(count);
        let mut b = Vec::with_capacity(count);
        for _ in 0..count {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            a.push(i);
            b.push(j);
        }
        Ok(Self {
            first: points.select_rows(&a),
            second: points.select_rows(&b),
        })
    }

    pub fn len(&self) -> usize {
        self.first.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One nonlinearity measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonLinRecord {
    pub step: u64,
    /// Tap label, 0 for the first exposed layer.
    pub layer: usize,
    pub score: f64,
    pub pair_count: usize,
}

/// Time series of per-layer nonlinearity scores.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NonLinProfile {
    pub records: Vec<NonLinRecord>,
}

impl NonLinProfile {
    pub fn push_scores(&mut self, step: u64, scores: &[f64], pair_count: usize) {
        self.records.extend(
            scores
                .iter()
                .enumerate()
                .map(|(layer, &score)| NonLinRecord {
                    step,
                    layer,
                    score,
                    pair_count,
                }),
        );
    }

    /// Scores of one layer in step order.
    pub fn layer_series(&self, layer: usize) -> Vec<(u64, f64)> {
        self.records
            .iter()
            .filter(|r| r.layer == layer)
            .map(|r| (r.step, r.score))
            .collect()
    }

    pub fn layer_count(&self) -> usize {
        self.records.iter().map(|r| r.layer + 1).max().unwrap_or(0)
    }
}

/// Mean and max of the logit-space Lipschitz ratio over sampled pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub mean_ratio: f64,
    pub max_ratio: f64,
    pub pair_count: usize,
    /// Pairs dropped because the two inputs coincide.
    pub skipped: usize,
}

/// Per-tap nonlinearity score. A fresh `λ ~ Dirichlet(alpha, alpha)` is drawn
/// for each pair, in pair order, and shared across taps.
pub fn nonlinearity<R: Rng + ?Sized>(
    net: &Network,
    pairs: &PairSet,
    alpha: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if pairs.is_empty() {
        return Err(param("nonlinearity needs at least one pair"));
    }
    let params = DirichletParams::new(alpha, 2)?;
    let weights = (0..pairs.len())
        .map(|_| sample_dirichlet(params, rng))
        .collect::<Result<Vec<MixWeights>>>()?;
    nonlinearity_with_weights(net, pairs, &weights)
}

/// [`nonlinearity`] with explicit per-pair weights.
pub fn nonlinearity_with_weights(
    net: &Network,
    pairs: &PairSet,
    weights: &[MixWeights],
) -> Result<Vec<f64>> {
    if pairs.is_empty() {
        return Err(param("nonlinearity needs at least one pair"));
    }
    let mixed = mix_rows(weights, &[&pairs.first, &pairs.second])?;
    let t1 = net.trace(&pairs.first)?;
    let t2 = net.trace(&pairs.second)?;
    let tm = net.trace(&mixed)?;
    let d = DistanceKind::SquaredL2Mean;
    let n = pairs.len();

    let scores = (0..t1.tap_count())
        .map(|l| {
            let (a, b, m) = (t1.tap(l), t2.tap(l), tm.tap(l));
            let mut total = 0.0;
            let mut target = vec![0.0; a.cols()];
            let mut fm = vec![0.0; a.cols()];
            let mut fa = vec![0.0; a.cols()];
            let mut fb = vec![0.0; a.cols()];
            for (r, w) in weights.iter().enumerate() {
                fa.copy_from_slice(a.row(r));
                fb.copy_from_slice(b.row(r));
                fm.copy_from_slice(m.row(r));
                unit_normalize_in_place(&mut fa);
                unit_normalize_in_place(&mut fb);
                unit_normalize_in_place(&mut fm);
                let [l1, l2] = [w.as_slice()[0], w.as_slice()[1]];
                for ((t, x), y) in target.iter_mut().zip(&fa).zip(&fb) {
                    *t = l1 * x + l2 * y;
                }
                total += d.eval(&fm, &target);
            }
            total / n as f64
        })
        .collect();
    Ok(scores)
}

/// Empirical Lipschitz ratio of the logits over the given pairs.
/// Coincident pairs are skipped and counted.
pub fn empirical_lipschitz(net: &Network, pairs: &PairSet) -> Result<LipschitzEstimate> {
    if pairs.is_empty() {
        return Err(param("empirical Lipschitz needs at least one pair"));
    }
    let f1 = net.logits(&pairs.first)?;
    let f2 = net.logits(&pairs.second)?;
    let dist = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };

    let mut sum = 0.0;
    let mut max = 0.0f64;
    let mut used = 0;
    for r in 0..pairs.len() {
        let dx = dist(pairs.first.row(r), pairs.second.row(r));
        if dx == 0.0 {
            continue;
        }
        let ratio = dist(f1.row(r), f2.row(r)) / dx;
        sum += ratio;
        max = max.max(ratio);
        used += 1;
    }
    if used == 0 {
        return Err(param("every probe pair is coincident"));
    }
    Ok(LipschitzEstimate {
        mean_ratio: sum / used as f64,
        max_ratio: max,
        pair_count: used,
        skipped: pairs.len() - used,
    })
}
