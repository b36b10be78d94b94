use serde::{Deserialize, Serialize};

use super::network::{GradientSet, Network};
use crate::error::{param, Error, Result};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(param(format!("lr must be positive, got {}", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(param(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(param(format!(
                "adam_epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Moment accumulators and step count for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: GradientSet,
    second: GradientSet,
    step: u64,
}

impl AdamState {
    pub fn new(net: &Network, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            first: GradientSet::zeros_like(net),
            second: GradientSet::zeros_like(net),
            step: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &GradientSet {
        &self.first
    }

    pub fn second_moment(&self) -> &GradientSet {
        &self.second
    }

    /// Applies one bias-corrected Adam update to `net`. The network is left
    /// untouched if any gradient entry is non-finite.
    pub fn step(&mut self, net: &mut Network, grads: &GradientSet) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::Numeric("gradient contains NaN or infinity".into()));
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);

        let params = net.param_slices_mut();
        let moments = self.first.slices_mut().zip(self.second.slices_mut());
        for ((p, g), (m, v)) in params.zip(grads.slices()).zip(moments) {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
