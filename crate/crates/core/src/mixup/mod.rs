//! Mixup over K points, Dirichlet weight sampling, and the losses built on
//! top of them: cross-entropy against (possibly mixed) soft targets and the
//! ICT_K interpolation-consistency loss.

mod dirichlet;
mod loss;

use serde::{Deserialize, Serialize};

pub use dirichlet::{sample_dirichlet, sample_gamma, sample_log_gamma, DirichletParams};
pub use loss::{
    consistency_distance, ict_loss, one_hot, softmax_rows, supervised_loss, ConsistencySpace,
    IctLoss, IctOptions,
};

use crate::error::{param, shape, Result};
use crate::netcore::Matrix;

/// Tolerance on the simplex constraint `sum(weights) == 1`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// A point on the K-simplex: non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct MixWeights(Vec<f64>);

impl MixWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(param("mix weights need at least one entry"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(param(format!(
                "mix weights must be finite and non-negative: {weights:?}"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(param(format!("mix weights sum to {total}, not 1")));
        }
        Ok(Self(weights))
    }

    /// Equal weights `1/k`.
    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(param("mix weights need at least one entry"));
        }
        Ok(Self(vec![1.0 / k as f64; k]))
    }

    pub(crate) fn from_normalized(weights: Vec<f64>) -> Self {
        debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOLERANCE);
        Self(weights)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Distance used by the consistency loss and the nonlinearity probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// Squared Euclidean distance divided by the vector dimension.
    #[default]
    SquaredL2Mean,
}

impl DistanceKind {
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            DistanceKind::SquaredL2Mean => {
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                if a.is_empty() {
                    0.0
                } else {
                    sq / a.len() as f64
                }
            }
        }
    }

    /// Gradient of `eval` with respect to `a`, scaled by `scale`, added into `out`.
    pub(crate) fn accumulate_grad(self, a: &[f64], b: &[f64], scale: f64, out: &mut [f64]) {
        match self {
            DistanceKind::SquaredL2Mean => {
                let f = 2.0 * scale / a.len() as f64;
                for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                    *o += f * (x - y);
                }
            }
        }
    }
}

/// Convex combination `sum_i weights[i] * points[i]`.
pub fn mix<P: AsRef<[f64]>>(weights: &MixWeights, points: &[P]) -> Result<Vec<f64>> {
    if points.len() != weights.len() {
        return Err(shape(format!(
            "{} points for {} mix weights",
            points.len(),
            weights.len()
        )));
    }
    let dim = points[0].as_ref().len();
    let mut out = vec![0.0; dim];
    for (p, &w) in points.iter().zip(weights.as_slice()) {
        let p = p.as_ref();
        if p.len() != dim {
            return Err(shape(format!(
                "mixed points differ in length: {} vs {dim}",
                p.len()
            )));
        }
        for (o, v) in out.iter_mut().zip(p) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// Row-wise mixup: output row `r` mixes row `r` of every batch with
/// `weights[r]`.
pub fn mix_rows(weights: &[MixWeights], batches: &[&Matrix]) -> Result<Matrix> {
    let first = batches.first().ok_or_else(|| param("no batches to mix"))?;
    let (rows, cols) = first.shape();
    if batches.iter().any(|b| b.shape() != (rows, cols)) {
        return Err(shape("mixed batches differ in shape"));
    }
    if weights.len() != rows {
        return Err(shape(format!(
            "{} weight rows for {rows} batch rows",
            weights.len()
        )));
    }
    let mut out = Matrix::zeros(rows, cols);
    for (r, w) in weights.iter().enumerate() {
        if w.len() != batches.len() {
            return Err(shape(format!(
                "row {r}: {} weights for {} batches",
                w.len(),
                batches.len()
            )));
        }
        let dst = out.row_mut(r);
        for (b, &lam) in batches.iter().zip(w.as_slice()) {
            for (o, v) in dst.iter_mut().zip(b.row(r)) {
                *o += lam * v;
            }
        }
    }
    Ok(out)
}

/// Inputs with per-row target distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Matrix,
    pub targets: Matrix,
}

/// Mixes K labeled batches row by row: `x_m = Mix(x_1..x_K)`,
/// `y_m = Mix(y_1..y_K)`.
pub fn mixup_supervised_batch(examples: &[Batch], weights: &[MixWeights]) -> Result<Batch> {
    let xs: Vec<&Matrix> = examples.iter().map(|b| &b.inputs).collect();
    let ys: Vec<&Matrix> = examples.iter().map(|b| &b.targets).collect();
    Ok(Batch {
        inputs: mix_rows(weights, &xs)?,
        targets: mix_rows(weights, &ys)?,
    })
}
