//! Synthetic 2-D datasets and semi-supervised splits.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, shape, Result};
use crate::netcore::Matrix;

/// Attempts the random sampler makes to cover every class.
pub const COVERAGE_ATTEMPTS: usize = 100;

/// Points with class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub points: Matrix,
    pub labels: Vec<usize>,
}

impl LabeledSet {
    pub fn new(points: Matrix, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if points.rows() != labels.len() {
            return Err(shape(format!(
                "{} points but {} labels",
                points.rows(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(param(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        Ok(Self { points, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn subset(&self, indices: &[usize]) -> LabeledSet {
        LabeledSet {
            points: self.points.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Unlabeled points. The generating labels are kept aside for the
/// fully supervised reference run and for export; training methods other
/// than that reference never read them.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledSet {
    pub points: Matrix,
    pub withheld_labels: Vec<usize>,
}

impl UnlabeledSet {
    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Labeled, unlabeled and held-out test splits of one dataset, with the
/// source row index of every member.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiSupervisedDataset {
    pub labeled: LabeledSet,
    pub unlabeled: UnlabeledSet,
    pub test: LabeledSet,
    pub class_count: usize,
    pub labeled_indices: Vec<usize>,
    pub unlabeled_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    #[default]
    Random,
    /// Farthest-point greedy selection.
    Diverse,
}

/// Per-class counts for `n` points over `classes`: the first `n % classes`
/// classes get one extra point.
fn class_sizes(n: usize, classes: usize) -> Vec<usize> {
    (0..classes)
        .map(|c| n / classes + usize::from(c < n % classes))
        .collect()
}

fn arc_points<R: Rng + ?Sized>(
    count: usize,
    arc: impl Fn(f64) -> (f64, f64),
    noise_sd: f64,
    rng: &mut R,
    out: &mut Vec<f64>,
) {
    for i in 0..count {
        let t = if count > 1 {
            PI * i as f64 / (count - 1) as f64
        } else {
            0.0
        };
        let (x, y) = arc(t);
        let (nx, ny) = if noise_sd > 0.0 {
            (
                noise_sd * rng.sample::<f64, _>(StandardNormal),
                noise_sd * rng.sample::<f64, _>(StandardNormal),
            )
        } else {
            (0.0, 0.0)
        };
        out.push(x + nx);
        out.push(y + ny);
    }
}

type Arc = fn(f64) -> (f64, f64);

pub(crate) const TWO_MOON_ARCS: [Arc; 2] =
    [|t| (t.cos(), t.sin()), |t| (1.0 - t.cos(), 0.5 - t.sin())];

pub(crate) const THREE_MOON_ARCS: [Arc; 3] = [
    |t| (t.cos(), t.sin()),
    |t| (1.0 - t.cos(), 0.5 - t.sin()),
    |t| (t.cos() + 0.5, t.sin() - 1.0),
];

fn moons<R: Rng + ?Sized>(
    arcs: &[Arc],
    n: usize,
    noise_sd: f64,
    rng: &mut R,
) -> Result<LabeledSet> {
    if n < arcs.len() {
        return Err(param(format!(
            "need at least {} points, got {n}",
            arcs.len()
        )));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(param(format!(
            "noise_sd must be non-negative, got {noise_sd}"
        )));
    }
    let sizes = class_sizes(n, arcs.len());
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for (class, (&arc, &count)) in arcs.iter().zip(&sizes).enumerate() {
        arc_points(count, arc, noise_sd, rng, &mut data);
        labels.extend(std::iter::repeat_n(class, count));
    }
    LabeledSet::new(Matrix::from_vec(n, 2, data)?, labels, arcs.len())
}

/// Two interleaved half circles: class 0 on `(cos t, sin t)`, class 1 on
/// `(1 - cos t, 0.5 - sin t)`, `t` evenly spaced over `[0, π]`, plus
/// isotropic Gaussian noise.
pub fn gen_two_moons<R: Rng + ?Sized>(n: usize, noise_sd: f64, rng: &mut R) -> Result<LabeledSet> {
    moons(&TWO_MOON_ARCS, n, noise_sd, rng)
}

/// The two moons plus a third arc `(cos t + 0.5, sin t - 1)` below them.
pub fn gen_three_moons<R: Rng + ?Sized>(
    n: usize,
    noise_sd: f64,
    rng: &mut R,
) -> Result<LabeledSet> {
    moons(&THREE_MOON_ARCS, n, noise_sd, rng)
}

/// Isotropic Gaussian blobs, one per center.
pub fn gen_blobs<R: Rng + ?Sized>(
    n: usize,
    centers: &[[f64; 2]],
    sd: f64,
    rng: &mut R,
) -> Result<LabeledSet> {
    let classes = centers.len();
    if classes < 2 {
        return Err(param("blobs need at least two centers"));
    }
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(param(format!("blob sd must be positive, got {sd}")));
    }
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for (class, (center, count)) in centers.iter().zip(class_sizes(n, classes)).enumerate() {
        for _ in 0..count {
            data.push(center[0] + sd * rng.sample::<f64, _>(StandardNormal));
            data.push(center[1] + sd * rng.sample::<f64, _>(StandardNormal));
        }
        labels.extend(std::iter::repeat_n(class, count));
    }
    LabeledSet::new(Matrix::from_vec(n, 2, data)?, labels, classes)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Farthest-point greedy subset of size `k`, in selection order.
///
/// Starts from the point farthest from the centroid, then repeatedly adds
/// the point whose distance to its nearest chosen point is largest. Ties
/// go to the lowest index.
pub fn sample_diverse(points: &Matrix, k: usize) -> Result<Vec<usize>> {
    let n = points.rows();
    if k > n {
        return Err(param(format!("cannot choose {k} of {n} points")));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut centroid = vec![0.0; points.cols()];
    for row in points.iter_rows() {
        for (c, v) in centroid.iter_mut().zip(row) {
            *c += v / n as f64;
        }
    }
    let argmax = |scores: &[f64], taken: &[bool]| {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if !taken[i] && best.is_none_or(|b| scores[i] > scores[b]) {
                best = Some(i);
            }
        }
        best.expect("k <= n leaves a candidate")
    };

    let mut taken = vec![false; n];
    let from_centroid: Vec<f64> = points
        .iter_rows()
        .map(|r| squared_distance(r, &centroid))
        .collect();
    let first = argmax(&from_centroid, &taken);
    taken[first] = true;
    let mut chosen = vec![first];
    let mut nearest: Vec<f64> = points
        .iter_rows()
        .map(|r| squared_distance(r, points.row(first)))
        .collect();
    while chosen.len() < k {
        let next = argmax(&nearest, &taken);
        taken[next] = true;
        chosen.push(next);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(squared_distance(points.row(i), points.row(next)));
        }
    }
    Ok(chosen)
}

fn covers_classes(labels: &[usize], indices: &[usize], classes: usize) -> bool {
    let mut seen = vec![false; classes];
    for &i in indices {
        seen[labels[i]] = true;
    }
    seen.into_iter().all(|s| s)
}

/// Splits `data` into test, labeled and unlabeled parts.
///
/// The test set is drawn uniformly first; the labeled subset comes from the
/// remainder via `sampler`; everything left is unlabeled.
pub fn split_semisupervised<R: Rng + ?Sized>(
    data: &LabeledSet,
    classes: usize,
    n_labeled: usize,
    n_test: usize,
    sampler: Sampler,
    rng: &mut R,
) -> Result<SemiSupervisedDataset> {
    let n = data.len();
    if n_labeled == 0 {
        return Err(param("the labeled split needs at least one point"));
    }
    if n_labeled + n_test > n {
        return Err(param(format!(
            "{n_labeled} labeled + {n_test} test points exceed the {n} available"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut test_indices = order[..n_test].to_vec();
    test_indices.sort_unstable();
    let mut pool = order[n_test..].to_vec();
    pool.sort_unstable();

    let picks: Vec<usize> = match sampler {
        Sampler::Diverse => sample_diverse(&data.points.select_rows(&pool), n_labeled)?,
        Sampler::Random => {
            let pool_labels: Vec<usize> = pool.iter().map(|&i| data.labels[i]).collect();
            let mut attempt = 0;
            loop {
                let pick: Vec<usize> =
                    rand::seq::index::sample(rng, pool.len(), n_labeled).into_vec();
                attempt += 1;
                if n_labeled < classes
                    || covers_classes(&pool_labels, &pick, classes)
                    || attempt >= COVERAGE_ATTEMPTS
                {
                    break pick;
                }
            }
        }
    };
    let mut is_labeled = vec![false; pool.len()];
    for &p in &picks {
        is_labeled[p] = true;
    }
    let labeled_indices: Vec<usize> = picks.iter().map(|&p| pool[p]).collect();
    let unlabeled_indices: Vec<usize> = pool
        .iter()
        .zip(&is_labeled)
        .filter(|(_, &l)| !l)
        .map(|(&i, _)| i)
        .collect();

    let unlabeled = data.subset(&unlabeled_indices);
    Ok(SemiSupervisedDataset {
        labeled: data.subset(&labeled_indices),
        unlabeled: UnlabeledSet {
            points: unlabeled.points,
            withheld_labels: unlabeled.labels,
        },
        test: data.subset(&test_indices),
        class_count: classes,
        labeled_indices,
        unlabeled_indices,
        test_indices,
    })
}
