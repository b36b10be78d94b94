use rand::Rng;

use super::matrix::{gemm, Matrix, Op};
use crate::error::{param, shape, Result};

/// One stage of a feedforward network.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// `y = x W^T + b` with `W` shaped `out x in`.
    Affine {
        weight: Matrix,
        bias: Vec<f64>,
    },
    Relu,
}

impl Layer {
    pub fn affine(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(shape(format!(
                "bias of length {} for a weight with {} output rows",
                bias.len(),
                weight.rows()
            )));
        }
        Ok(Layer::Affine { weight, bias })
    }

    /// He-uniform weights, zero bias.
    pub fn he_uniform<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let limit = (6.0 / input as f64).sqrt();
        let data = (0..input * output)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Layer::Affine {
            weight: Matrix::from_vec(output, input, data).expect("sized above"),
            bias: vec![0.0; output],
        }
    }

    fn output_dim(&self, input: usize) -> Result<usize> {
        match self {
            Layer::Affine { weight, .. } if weight.cols() == input => Ok(weight.rows()),
            Layer::Affine { weight, .. } => Err(shape(format!(
                "affine layer expects {} inputs, got {input}",
                weight.cols()
            ))),
            Layer::Relu => Ok(input),
        }
    }
}

/// Layered feedforward model exposing the outputs of selected layers
/// ("taps"). The last tap is always the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
    taps: Vec<usize>,
}

/// Activations recorded by a forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `acts[0]` is the input batch, `acts[i + 1]` the output of layer `i`.
    acts: Vec<Matrix>,
    taps: Vec<usize>,
}

impl Trace {
    pub fn logits(&self) -> &Matrix {
        self.acts.last().expect("a trace holds at least the input")
    }

    pub fn input(&self) -> &Matrix {
        &self.acts[0]
    }

    /// Output of the `label`-th tap.
    pub fn tap(&self, label: usize) -> &Matrix {
        &self.acts[self.taps[label] + 1]
    }

    pub fn tap_count(&self) -> usize {
        self.taps.len()
    }
}

/// Per-parameter gradients of a [`Network`], one entry per affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub(crate) params: Vec<AffineGrad>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineGrad {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl GradientSet {
    pub fn zeros_like(net: &Network) -> Self {
        let params = net
            .layers
            .iter()
            .filter_map(|l| match l {
                Layer::Affine { weight, bias } => Some(AffineGrad {
                    weight: Matrix::zeros(weight.rows(), weight.cols()),
                    bias: vec![0.0; bias.len()],
                }),
                Layer::Relu => None,
            })
            .collect();
        Self { params }
    }

    pub fn layers(&self) -> &[AffineGrad] {
        &self.params
    }

    /// Parameter slices in the order weight, bias for each affine layer.
    pub fn slices(&self) -> impl Iterator<Item = &[f64]> {
        self.params
            .iter()
            .flat_map(|p| [p.weight.as_slice(), p.bias.as_slice()])
    }

    pub(crate) fn slices_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.params
            .iter_mut()
            .flat_map(|p| [p.weight.as_mut_slice(), p.bias.as_mut_slice()])
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.slices().flatten().copied().collect()
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &GradientSet, scale: f64) {
        for (a, b) in self.slices_mut().zip(other.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slices().flatten().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.slices().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Network {
    /// Assembles a network. `taps` lists layer positions whose outputs are
    /// exposed; it must be strictly increasing and end at the last layer.
    pub fn new(input_dim: usize, layers: Vec<Layer>, taps: Vec<usize>) -> Result<Self> {
        if layers.is_empty() {
            return Err(param("a network needs at least one layer"));
        }
        let mut dim = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            dim = layer
                .output_dim(dim)
                .map_err(|e| shape(format!("layer {i}: {e}")))?;
        }
        if taps.last() != Some(&(layers.len() - 1)) {
            return Err(param("the final tap must be the logits layer"));
        }
        if taps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(param("tap indices must be strictly increasing"));
        }
        Ok(Self {
            input_dim,
            layers,
            taps,
        })
    }

    /// ReLU MLP with He-uniform weights and zero biases. Taps sit after every
    /// ReLU and at the logits.
    pub fn mlp<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        output_dim: usize,
        rng: &mut R,
    ) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() * 2 + 1);
        let mut taps = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = input_dim;
        for &width in hidden {
            layers.push(Layer::he_uniform(fan_in, width, rng));
            layers.push(Layer::Relu);
            taps.push(layers.len() - 1);
            fan_in = width;
        }
        layers.push(Layer::he_uniform(fan_in, output_dim, rng));
        taps.push(layers.len() - 1);
        Self::new(input_dim, layers, taps).expect("mlp dimensions compose")
    }

    /// Chain of affine layers with no activation; every layer is a tap.
    pub fn linear(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        let taps = (0..layers.len()).collect();
        Self::new(input_dim, layers, taps)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers
            .iter()
            .fold(self.input_dim, |d, l| l.output_dim(d).expect("validated"))
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn taps(&self) -> &[usize] {
        &self.taps
    }

    pub fn parameter_count(&self) -> usize {
        self.param_slices().map(<[f64]>::len).sum()
    }

    /// Parameter slices in the order weight, bias for each affine layer.
    pub fn param_slices(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| match l {
            Layer::Affine { weight, bias } => vec![weight.as_slice(), bias.as_slice()],
            Layer::Relu => vec![],
        })
    }

    pub fn param_slices_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers.iter_mut().flat_map(|l| match l {
            Layer::Affine { weight, bias } => vec![weight.as_mut_slice(), bias.as_mut_slice()],
            Layer::Relu => vec![],
        })
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.input_dim {
            return Err(shape(format!(
                "batch has {} columns, network expects {}",
                batch.cols(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Runs the batch through every layer, keeping all activations.
    pub fn trace(&self, batch: &Matrix) -> Result<Trace> {
        self.check_input(batch)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(batch.clone());
        for layer in &self.layers {
            let next = apply(layer, acts.last().expect("non-empty"));
            acts.push(next);
        }
        let trace = Trace {
            acts,
            taps: self.taps.clone(),
        };
        trace.logits().ensure_finite("network output")?;
        Ok(trace)
    }

    /// Which ReLU inputs are positive, layer by layer, row-major.
    pub fn relu_pattern(&self, batch: &Matrix) -> Result<Vec<bool>> {
        let trace = self.trace(batch)?;
        Ok(self
            .layers
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, Layer::Relu))
            .flat_map(|(i, _)| trace.acts[i].as_slice().iter().map(|&v| v > 0.0))
            .collect())
    }

    /// Logits and the output of every tap (the last tap equals the logits).
    pub fn forward(&self, batch: &Matrix) -> Result<(Matrix, Vec<Matrix>)> {
        let trace = self.trace(batch)?;
        let taps = (0..trace.tap_count())
            .map(|l| trace.tap(l).clone())
            .collect();
        Ok((trace.logits().clone(), taps))
    }

    /// Logits only, without retaining intermediate activations.
    pub fn logits(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_input(batch)?;
        let mut x = batch.clone();
        for layer in &self.layers {
            x = apply(layer, &x);
        }
        x.ensure_finite("network output")?;
        Ok(x)
    }

    pub fn predict(&self, batch: &Matrix) -> Result<Vec<usize>> {
        Ok(self.logits(batch)?.argmax_rows())
    }

    /// Gradients of a scalar loss given its gradient at the logits.
    pub fn backward(&self, batch: &Matrix, loss_grad: &Matrix) -> Result<GradientSet> {
        let trace = self.trace(batch)?;
        let mut grads = GradientSet::zeros_like(self);
        self.backward_into(&trace, loss_grad, &mut grads)?;
        Ok(grads)
    }

    /// Backpropagates `loss_grad` through a recorded trace and adds the
    /// parameter gradients into `grads`.
    pub fn backward_into(
        &self,
        trace: &Trace,
        loss_grad: &Matrix,
        grads: &mut GradientSet,
    ) -> Result<()> {
        if loss_grad.shape() != trace.logits().shape() {
            return Err(shape(format!(
                "loss gradient is {:?}, logits are {:?}",
                loss_grad.shape(),
                trace.logits().shape()
            )));
        }
        let mut g = loss_grad.clone();
        let mut slot = grads.params.len();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.acts[i];
            match layer {
                Layer::Relu => {
                    for (gv, &x) in g.as_mut_slice().iter_mut().zip(input.as_slice()) {
                        if x <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                }
                Layer::Affine { weight, .. } => {
                    slot -= 1;
                    let pg = &mut grads.params[slot];
                    gemm(1.0, &g, Op::T, input, Op::N, 1.0, &mut pg.weight);
                    for row in g.iter_rows() {
                        for (b, v) in pg.bias.iter_mut().zip(row) {
                            *b += v;
                        }
                    }
                    if i > 0 {
                        let mut gx = Matrix::zeros(g.rows(), weight.cols());
                        gemm(1.0, &g, Op::N, weight, Op::N, 0.0, &mut gx);
                        g = gx;
                    }
                }
            }
        }
        Ok(())
    }
}

fn apply(layer: &Layer, x: &Matrix) -> Matrix {
    match layer {
        Layer::Affine { weight, bias } => {
            let mut y = Matrix::zeros(x.rows(), weight.rows());
            for r in 0..y.rows() {
                y.row_mut(r).copy_from_slice(bias);
            }
            gemm(1.0, x, Op::N, weight, Op::T, 1.0, &mut y);
            y
        }
        Layer::Relu => x.map(|v| v.max(0.0)),
    }
}
