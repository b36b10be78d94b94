//! Semi-supervised learning lab built around K-point mixup.
//!
//! The crate provides a small dense network engine ([`netcore`]), the mixup
//! operation with Dirichlet weights and the ICT_K consistency loss
//! ([`mixup`]), two representation probes ([`probes`]), synthetic toy
//! datasets with labeled-subset samplers ([`data`]), and the training loop
//! that ties them together ([`trainer`]).
//!
//! Every run is driven by a single 64-bit seed. Consumers draw from
//! independent ChaCha streams derived from it (see [`rng`]), so results are
//! reproducible bit for bit.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod mixup;
pub mod netcore;
pub mod probes;
pub mod raster;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};

pub use netcore::{AdamState, GradientSet, Layer, Matrix, Network};

pub use mixup::{DirichletParams, DistanceKind, MixWeights};
pub use probes::{LipschitzEstimate, NonLinProfile, NonLinRecord};
pub use trainer::{Method, RunMetrics, TrainConfig};
