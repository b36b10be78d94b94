//! Symmetric Dirichlet weights from Marsaglia–Tsang gamma variates.
//!
//! Each weight is a normalized Gamma(alpha, 1) draw. Shapes below one use
//! the boost `Gamma(a) = Gamma(a + 1) * U^(1/a)`. For small `alpha` that
//! power underflows, so the variates are carried as logarithms and
//! normalized with a log-sum-exp.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::MixWeights;
use crate::error::{param, Result};

/// Symmetric Dirichlet(alpha, ..., alpha) over `k` weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletParams {
    pub alpha: f64,
    pub k: usize,
}

impl DirichletParams {
    pub fn new(alpha: f64, k: usize) -> Result<Self> {
        let p = Self { alpha, k };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(param(format!(
                "dirichlet alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.k == 0 {
            return Err(param("dirichlet order K must be at least 1"));
        }
        Ok(())
    }

    /// Analytic variance of each marginal weight.
    pub fn marginal_variance(&self) -> f64 {
        let k = self.k as f64;
        (1.0 / k) * (1.0 - 1.0 / k) / (k * self.alpha + 1.0)
    }
}

/// Uniform draw in (0, 1].
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// `ln X` for `X ~ Gamma(shape, 1)`.
pub fn sample_log_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let boosted = sample_log_gamma(shape + 1.0, rng);
        return boosted + open_unit(rng).ln() / shape;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = open_unit(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return (d * v).ln();
        }
    }
}

/// `X ~ Gamma(shape, 1)`.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    sample_log_gamma(shape, rng).exp()
}

/// Draws one point of the K-simplex from the symmetric Dirichlet.
pub fn sample_dirichlet<R: Rng + ?Sized>(
    params: DirichletParams,
    rng: &mut R,
) -> Result<MixWeights> {
    params.validate()?;
    if params.k == 1 {
        return MixWeights::new(vec![1.0]);
    }
    let logs: Vec<f64> = (0..params.k)
        .map(|_| sample_log_gamma(params.alpha, rng))
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(MixWeights::from_normalized(w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn single_weight_is_one() {
        let mut rng = stream(0, Stream::Dirichlet);
        for alpha in [0.1, 1.0, 7.0] {
            let w = sample_dirichlet(DirichletParams { alpha, k: 1 }, &mut rng).unwrap();
            assert_eq!(w.as_slice(), &[1.0]);
        }
    }

    #[test]
    fn rejects_non_positive_alpha() {
        let mut rng = stream(0, Stream::Dirichlet);
        for alpha in [0.0, -1.0, f64::NAN] {
            assert!(sample_dirichlet(DirichletParams { alpha, k: 2 }, &mut rng).is_err());
        }
        assert!(DirichletParams::new(0.5, 0).is_err());
    }

    #[test]
    fn two_point_moments_at_half_alpha() {
        let mut rng = stream(11, Stream::Dirichlet);
        let params = DirichletParams::new(0.5, 2).unwrap();
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_dirichlet(params, &mut rng).unwrap().as_slice()[0])
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
        assert!((var - 0.125).abs() < 0.01, "var {var}");
        assert!((params.marginal_variance() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn gamma_mean_matches_shape() {
        // E[Gamma(a, 1)] = a, Var = a
        let mut rng = stream(3, Stream::Dirichlet);
        for shape in [0.1, 0.5, 1.0, 2.0, 9.5] {
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| sample_gamma(shape, &mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            let se = (shape / n as f64).sqrt();
            assert!(
                (mean - shape).abs() < 5.0 * se,
                "shape {shape}: mean {mean}"
            );
            assert!(
                (var - shape).abs() / shape < 0.05,
                "shape {shape}: var {var}"
            );
        }
    }

    #[test]
    fn tiny_alpha_stays_on_simplex() {
        let mut rng = stream(5, Stream::Dirichlet);
        let params = DirichletParams::new(0.01, 5).unwrap();
        for _ in 0..1000 {
            let w = sample_dirichlet(params, &mut rng).unwrap();
            let s: f64 = w.as_slice().iter().sum();
            assert!((s - 1.0).abs() <= 1e-12);
            assert!(w.as_slice().iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }
}
