use serde::{Deserialize, Serialize};

use super::{mix_rows, DistanceKind, MixWeights};
use crate::error::{param, shape, Error, Result};
use crate::netcore::{GradientSet, Matrix, Network};

/// One-hot rows for class indices in `[0, classes)`.
pub fn one_hot(labels: &[usize], classes: usize) -> Result<Matrix> {
    let mut m = Matrix::zeros(labels.len(), classes);
    for (r, &c) in labels.iter().enumerate() {
        if c >= classes {
            return Err(param(format!(
                "label {c} out of range for {classes} classes"
            )));
        }
        m[(r, c)] = 1.0;
    }
    Ok(m)
}

pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    out
}

/// Mean cross-entropy between `softmax(logits)` and target distributions.
/// Returns the loss and its gradient at the logits.
pub fn supervised_loss(logits: &Matrix, targets: &Matrix) -> Result<(f64, Matrix)> {
    if logits.shape() != targets.shape() {
        return Err(shape(format!(
            "logits {:?} vs targets {:?}",
            logits.shape(),
            targets.shape()
        )));
    }
    let rows = logits.rows();
    if rows == 0 {
        return Err(param("cross-entropy over an empty batch"));
    }
    for (r, t) in targets.iter_rows().enumerate() {
        let total: f64 = t.iter().sum();
        if t.iter().any(|v| v.is_nan() || *v < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Contract(format!(
                "target row {r} is not a probability distribution (sum {total})"
            )));
        }
    }
    let mut grad = Matrix::zeros(rows, logits.cols());
    let mut loss = 0.0;
    for r in 0..rows {
        let z = logits.row(r);
        let t = targets.row(r);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let g = grad.row_mut(r);
        for c in 0..z.len() {
            if t[c] > 0.0 {
                loss -= t[c] * (z[c] - lse);
            }
            g[c] = ((z[c] - lse).exp() - t[c]) / rows as f64;
        }
    }
    Ok((loss / rows as f64, grad))
}

/// Output space in which consistency is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencySpace {
    #[default]
    Logits,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IctOptions {
    pub distance: DistanceKind,
    pub space: ConsistencySpace,
    /// Treat the mixture of individual predictions as a constant target.
    pub stop_gradient: bool,
}

/// Value and parameter gradient of the ICT_K loss.
#[derive(Debug, Clone)]
pub struct IctLoss {
    pub value: f64,
    pub grads: GradientSet,
}

/// Mean over rows of `D(mixed_out[r], Mix_r(outputs[..][r]))`, together with
/// the gradient at `mixed_out` and at every entry of `outputs`.
pub fn consistency_distance(
    mixed_out: &Matrix,
    outputs: &[&Matrix],
    weights: &[MixWeights],
    distance: DistanceKind,
) -> Result<(f64, Matrix, Vec<Matrix>)> {
    let target = mix_rows(weights, outputs)?;
    if target.shape() != mixed_out.shape() {
        return Err(shape("mixed output and mixed predictions differ in shape"));
    }
    let rows = mixed_out.rows();
    let scale = 1.0 / rows as f64;
    let mut value = 0.0;
    let mut g_mixed = Matrix::zeros(rows, mixed_out.cols());
    for r in 0..rows {
        value += distance.eval(mixed_out.row(r), target.row(r));
        distance.accumulate_grad(mixed_out.row(r), target.row(r), scale, g_mixed.row_mut(r));
    }
    // d/d target = -d/d mixed_out for a distance of a difference
    let g_outputs = (0..outputs.len())
        .map(|k| {
            let mut g = Matrix::zeros(rows, mixed_out.cols());
            for (r, w) in weights.iter().enumerate() {
                let lam = w.as_slice()[k];
                for (o, v) in g.row_mut(r).iter_mut().zip(g_mixed.row(r)) {
                    *o = -lam * v;
                }
            }
            g
        })
        .collect();
    Ok((value * scale, g_mixed, g_outputs))
}

/// Backpropagates a gradient taken with respect to `softmax(logits)`.
fn softmax_backward(probs: &Matrix, grad: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(probs.rows(), probs.cols());
    for r in 0..probs.rows() {
        let p = probs.row(r);
        let g = grad.row(r);
        let dot: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
        for (o, (pi, gi)) in out.row_mut(r).iter_mut().zip(p.iter().zip(g)) {
            *o = pi * (gi - dot);
        }
    }
    out
}

/// ICT_K loss `D(f(Mix(u_1..u_K)), Mix(f(u_1)..f(u_K)))` averaged over rows,
/// with gradients through both branches unless `stop_gradient` is set.
pub fn ict_loss(
    net: &Network,
    unlabeled: &[Matrix],
    weights: &[MixWeights],
    opts: IctOptions,
) -> Result<IctLoss> {
    if unlabeled.len() < 2 {
        return Err(param(format!(
            "ICT needs K >= 2 batches, got {}",
            unlabeled.len()
        )));
    }
    let batch_refs: Vec<&Matrix> = unlabeled.iter().collect();
    let mixed_in = mix_rows(weights, &batch_refs)?;

    let mixed_trace = net.trace(&mixed_in)?;
    let traces = unlabeled
        .iter()
        .map(|u| net.trace(u))
        .collect::<Result<Vec<_>>>()?;

    let to_space = |m: &Matrix| match opts.space {
        ConsistencySpace::Logits => m.clone(),
        ConsistencySpace::Softmax => softmax_rows(m),
    };
    let mixed_out = to_space(mixed_trace.logits());
    let outs: Vec<Matrix> = traces.iter().map(|t| to_space(t.logits())).collect();
    let out_refs: Vec<&Matrix> = outs.iter().collect();
    let (value, g_mixed, g_outs) =
        consistency_distance(&mixed_out, &out_refs, weights, opts.distance)?;

    let back = |out: &Matrix, g: Matrix| match opts.space {
        ConsistencySpace::Logits => g,
        ConsistencySpace::Softmax => softmax_backward(out, &g),
    };
    let mut grads = GradientSet::zeros_like(net);
    net.backward_into(&mixed_trace, &back(&mixed_out, g_mixed), &mut grads)?;
    if !opts.stop_gradient {
        for ((trace, out), g) in traces.iter().zip(&outs).zip(g_outs) {
            net.backward_into(trace, &back(out, g), &mut grads)?;
        }
    }
    Ok(IctLoss { value, grads })
}
