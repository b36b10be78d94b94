//! Central finite differences for checking analytic gradients.

use rand::Rng;

use crate::error::Result;

use super::{Layer, Matrix, Network};

/// ReLU net with 1 to `max_affine` affine layers of width 1 to `max_width`,
/// uniform weights and biases in [-1, 1], taps after every ReLU and at the
/// logits.
pub fn random_net<R: Rng + ?Sized>(
    input_dim: usize,
    output_dim: usize,
    max_affine: usize,
    max_width: usize,
    rng: &mut R,
) -> Network {
    let depth = rng.random_range(1..=max_affine);
    let mut layers = Vec::new();
    let mut taps = Vec::new();
    let mut fan_in = input_dim;
    for i in 0..depth {
        let out = if i + 1 == depth {
            output_dim
        } else {
            rng.random_range(1..=max_width)
        };
        let weight = (0..out * fan_in)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let bias = (0..out).map(|_| rng.random_range(-1.0..1.0)).collect();
        let weight = Matrix::from_vec(out, fan_in, weight).expect("sized");
        layers.push(Layer::affine(weight, bias).expect("sized"));
        if i + 1 < depth {
            layers.push(Layer::Relu);
        }
        taps.push(layers.len() - 1);
        fan_in = out;
    }
    Network::new(input_dim, layers, taps).expect("dimensions compose")
}

/// Central differences of a loss at every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericGradient {
    /// In [`Network::param_slices`] order.
    pub values: Vec<f64>,
    /// Some perturbation flipped a ReLU on a watched batch, so the loss is
    /// not differentiable within the step and `values` is not a valid oracle.
    pub kink_crossed: bool,
}

/// Central-difference gradient of `loss`. `watch` lists the batches `loss`
/// feeds through the network; they are checked for ReLU flips.
pub fn numeric_gradient(
    net: &Network,
    h: f64,
    watch: &[&Matrix],
    loss: impl Fn(&Network) -> Result<f64>,
) -> Result<NumericGradient> {
    let pattern = |n: &Network| {
        watch
            .iter()
            .map(|b| n.relu_pattern(b))
            .collect::<Result<Vec<_>>>()
    };
    let base = pattern(net)?;
    let mut kink_crossed = false;
    let mut probe = net.clone();
    let sizes: Vec<usize> = net.param_slices().map(<[f64]>::len).collect();
    let mut out = Vec::with_capacity(sizes.iter().sum());
    for (s, &len) in sizes.iter().enumerate() {
        for i in 0..len {
            let orig = net.param_slices().nth(s).expect("slice")[i];
            let set =
                |net: &mut Network, v: f64| net.param_slices_mut().nth(s).expect("slice")[i] = v;
            set(&mut probe, orig + h);
            let up = loss(&probe)?;
            kink_crossed |= pattern(&probe)? != base;
            set(&mut probe, orig - h);
            let down = loss(&probe)?;
            kink_crossed |= pattern(&probe)? != base;
            set(&mut probe, orig);
            out.push((up - down) / (2.0 * h));
        }
    }
    Ok(NumericGradient {
        values: out,
        kink_crossed,
    })
}

/// `|a - b| / max(|a| + |b|, floor)` over whole vectors.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "gradient lengths differ");
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()) + norm(&mut b.iter().copied());
    diff / scale.max(floor)
}
