use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Sampler;
use crate::error::{param, Error, Result};
use crate::mixup::{ConsistencySpace, DistanceKind, IctOptions};
use crate::netcore::AdamConfig;

/// Training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Cross-entropy on the labeled split only.
    Erm,
    /// Cross-entropy on K-point mixed labeled examples.
    Mixup,
    /// Cross-entropy plus the ramped ICT_K loss on the unlabeled split.
    Ict,
    /// Cross-entropy on labeled and unlabeled splits with their true labels.
    Ideal,
}

impl Method {
    pub fn uses_k(self) -> bool {
        matches!(self, Method::Mixup | Method::Ict)
    }

    /// Short name with K appended where it matters, e.g. `ict3`.
    pub fn label(self, k: usize) -> String {
        match self {
            Method::Erm => "erm".into(),
            Method::Ideal => "ideal".into(),
            Method::Mixup => format!("mixup{k}"),
            Method::Ict => format!("ict{k}"),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Erm => "erm",
            Method::Mixup => "mixup",
            Method::Ict => "ict",
            Method::Ideal => "ideal",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "erm" => Ok(Method::Erm),
            "mixup" | "mixup_k" => Ok(Method::Mixup),
            "ict" | "ict_k" => Ok(Method::Ict),
            "ideal" => Ok(Method::Ideal),
            other => Err(param(format!(
                "unknown method {other:?} (expected erm, mixup, ict or ideal)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    #[default]
    TwoMoons,
    ThreeMoons,
    Blobs,
}

impl DatasetKind {
    pub fn default_classes(self) -> usize {
        match self {
            DatasetKind::TwoMoons => 2,
            DatasetKind::ThreeMoons => 3,
            DatasetKind::Blobs => 3,
        }
    }
}

/// Whether each batch row gets its own mixup weights or the batch shares one draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSharing {
    #[default]
    PerRow,
    PerBatch,
}

/// Which toy dataset to generate and how to split it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub n_points: usize,
    /// Arc noise for moons; blob standard deviation for blobs.
    pub noise_sd: f64,
    /// Blob centers; empty selects three centers on a triangle.
    pub blob_centers: Vec<[f64; 2]>,
    pub n_labeled: usize,
    pub n_test: usize,
    pub sampler: Sampler,
    /// Seed for generation and splitting; the run seed when absent.
    pub data_seed: Option<u64>,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            kind: DatasetKind::TwoMoons,
            n_points: 1500,
            noise_sd: 0.1,
            blob_centers: Vec::new(),
            n_labeled: 3,
            n_test: 300,
            sampler: Sampler::Random,
            data_seed: None,
        }
    }
}

impl DatasetSpec {
    pub fn centers(&self) -> Vec<[f64; 2]> {
        if self.blob_centers.is_empty() {
            vec![[-1.0, 0.0], [1.0, 0.0], [0.0, 1.5]]
        } else {
            self.blob_centers.clone()
        }
    }

    pub fn classes(&self) -> usize {
        match self.kind {
            DatasetKind::Blobs => self.centers().len(),
            k => k.default_classes(),
        }
    }
}

/// Every hyperparameter of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    /// Points per mixup; ignored by erm and ideal.
    pub k: usize,
    /// Symmetric Dirichlet concentration for mixup weights.
    pub alpha: f64,
    pub w_max: f64,
    /// Fraction of `total_steps` over which the consistency weight ramps up.
    pub ramp_fraction: f64,
    pub total_steps: u64,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Probe interval as a fraction of `total_steps`.
    pub probe_cadence: f64,
    pub probe_pairs: usize,
    /// Interval, in steps, between metric records.
    pub log_every: u64,
    pub hidden: Vec<usize>,
    pub dataset: DatasetSpec,
    pub distance: DistanceKind,
    pub consistency_space: ConsistencySpace,
    pub stop_gradient: bool,
    pub lambda_sharing: LambdaSharing,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Ict,
            k: 2,
            alpha: 0.5,
            w_max: 100.0,
            ramp_fraction: 0.4,
            total_steps: 10_000,
            batch_size: 128,
            adam: AdamConfig::default(),
            seed: 0,
            probe_cadence: 0.05,
            probe_pairs: crate::probes::DEFAULT_PAIR_COUNT,
            log_every: 50,
            hidden: vec![128, 128],
            dataset: DatasetSpec::default(),
            distance: DistanceKind::SquaredL2Mean,
            consistency_space: ConsistencySpace::Logits,
            stop_gradient: false,
            lambda_sharing: LambdaSharing::PerRow,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.method.uses_k() && self.k < 2 {
            return Err(param(format!(
                "k must be at least 2 for {}, got {}",
                self.method, self.k
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(param(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.w_max >= 0.0 && self.w_max.is_finite()) {
            return Err(param(format!(
                "w_max must be non-negative, got {}",
                self.w_max
            )));
        }
        if !(self.ramp_fraction > 0.0 && self.ramp_fraction <= 1.0) {
            return Err(param(format!(
                "ramp_fraction must lie in (0, 1], got {}",
                self.ramp_fraction
            )));
        }
        if self.batch_size == 0 {
            return Err(param("batch_size must be positive"));
        }
        if !(self.probe_cadence > 0.0 && self.probe_cadence <= 1.0) {
            return Err(param(format!(
                "probe_cadence must lie in (0, 1], got {}",
                self.probe_cadence
            )));
        }
        if self.probe_pairs == 0 {
            return Err(param("probe_pairs must be positive"));
        }
        if self.log_every == 0 {
            return Err(param("log_every must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(param("hidden widths must be positive"));
        }
        self.adam.validate()?;
        let d = &self.dataset;
        if !(d.noise_sd >= 0.0 && d.noise_sd.is_finite()) {
            return Err(param(format!(
                "noise_sd must be non-negative, got {}",
                d.noise_sd
            )));
        }
        if d.kind == DatasetKind::Blobs && d.noise_sd == 0.0 {
            return Err(param("blob noise_sd must be positive"));
        }
        if d.n_labeled == 0 {
            return Err(param("n_labeled must be positive"));
        }
        if d.n_labeled + d.n_test > d.n_points {
            return Err(param(format!(
                "n_labeled + n_test ({}) exceeds n_points ({})",
                d.n_labeled + d.n_test,
                d.n_points
            )));
        }
        if d.n_test < 2 {
            return Err(param("n_test must be at least 2 to form probe pairs"));
        }
        Ok(())
    }

    pub fn ict_options(&self) -> IctOptions {
        IctOptions {
            distance: self.distance,
            space: self.consistency_space,
            stop_gradient: self.stop_gradient,
        }
    }

    pub fn method_label(&self) -> String {
        self.method.label(self.k)
    }
}
