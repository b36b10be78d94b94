//! Dense feedforward engine: matrices, layers with forward taps, exact
//! reverse-mode gradients and the Adam optimizer.

mod adam;
pub mod gradcheck;
mod matrix;
mod network;

pub use adam::{AdamConfig, AdamState};
pub use matrix::Matrix;
pub use network::{AffineGrad, GradientSet, Layer, Network, Trace};

/// Norms at or below this are treated as zero by [`unit_normalize`].
pub const NORM_EPSILON: f64 = 1e-12;

/// Scales `v` to unit Euclidean norm; vectors with norm `<= NORM_EPSILON`
/// map to zero.
pub fn unit_normalize(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    unit_normalize_in_place(&mut out);
    out
}

pub fn unit_normalize_in_place(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= NORM_EPSILON {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        let v = unit_normalize(&[3.0, 4.0]);
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
        assert_eq!(unit_normalize(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(unit_normalize(&[5.0]), vec![1.0]);
        assert_eq!(unit_normalize(&[1e-13, 0.0]), vec![0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn normalized_norm_is_zero_or_one(v in prop::collection::vec(-1e6f64..1e6, 1..32)) {
            let n = unit_normalize(&v).iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(n == 0.0 || (n - 1.0).abs() <= 1e-12);
        }
    }
}
