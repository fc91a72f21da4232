//! Trainable parameters and small multi-layer perceptrons.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numeric::matrix::{relu, relu_backward, Matrix};

/// Learning-rate group a parameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    /// The per-point visual encoder.
    Visual,
    /// Everything else.
    Other,
}

/// A trainable matrix with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
    pub group: ParamGroup,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Param { name: name.into(), value, grad, group: ParamGroup::Other }
    }

    pub fn with_group(mut self, group: ParamGroup) -> Self {
        self.group = group;
        self
    }

    /// Uniform init in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn uniform(name: impl Into<String>, rows: usize, cols: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut value = Matrix::zeros(rows, cols);
        for v in value.data_mut() {
            *v = rng.random_range(-bound..=bound);
        }
        Param::new(name, value)
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().fill(0.0);
    }
}

/// Per-layer activation choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

/// Layer widths plus activation per layer.
#[derive(Debug, Clone)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl MlpSpec {
    /// `widths = [in, h1, ..., out]` with one activation per affine layer.
    pub fn new(widths: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Precondition("mlp needs at least one layer".into()));
        }
        if activations.len() != widths.len() - 1 {
            return Err(Error::Precondition(format!(
                "mlp with {} layers needs {} activations, got {}",
                widths.len() - 1,
                widths.len() - 1,
                activations.len()
            )));
        }
        Ok(MlpSpec { widths, activations })
    }

    /// Hidden layers use relu, the final layer is linear.
    pub fn relu_tower(widths: Vec<usize>) -> Result<Self> {
        let n = widths.len().saturating_sub(1);
        let mut acts = vec![Activation::Relu; n];
        if let Some(last) = acts.last_mut() {
            *last = Activation::Identity;
        }
        MlpSpec::new(widths, acts)
    }
}

/// An MLP with owned weights and biases.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub spec: MlpSpec,
    /// `(weight in x out, bias 1 x out)` per affine layer.
    pub layers: Vec<(Param, Param)>,
}

/// Forward activations needed by the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input to each affine layer.
    inputs: Vec<Matrix>,
    /// Pre-activation output of each affine layer.
    preacts: Vec<Matrix>,
}

impl Mlp {
    pub fn init(name: &str, spec: MlpSpec, rng: &mut ChaCha8Rng) -> Self {
        let mut layers = Vec::new();
        for l in 0..spec.widths.len() - 1 {
            let (fan_in, fan_out) = (spec.widths[l], spec.widths[l + 1]);
            let w = Param::uniform(format!("{name}.{l}.w"), fan_in, fan_out, fan_in, rng);
            let b = Param::uniform(format!("{name}.{l}.b"), 1, fan_out, fan_in, rng);
            layers.push((w, b));
        }
        Mlp { spec, layers }
    }

    /// All-zero weights and biases (used by ablations that freeze a path).
    pub fn zeros(name: &str, spec: MlpSpec) -> Self {
        let mut layers = Vec::new();
        for l in 0..spec.widths.len() - 1 {
            let (fan_in, fan_out) = (spec.widths[l], spec.widths[l + 1]);
            let w = Param::new(format!("{name}.{l}.w"), Matrix::zeros(fan_in, fan_out));
            let b = Param::new(format!("{name}.{l}.b"), Matrix::zeros(1, fan_out));
            layers.push((w, b));
        }
        Mlp { spec, layers }
    }

    pub fn input_width(&self) -> usize {
        self.spec.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.spec.widths.last().unwrap()
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, MlpCache)> {
        if x.cols() != self.input_width() {
            return Err(Error::Dimension(format!(
                "mlp expects {} input columns, got {}",
                self.input_width(),
                x.cols()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for (l, (w, b)) in self.layers.iter().enumerate() {
            let mut pre = cur.matmul(&w.value)?;
            for i in 0..pre.rows() {
                let row = pre.row_mut(i);
                for (v, bv) in row.iter_mut().zip(b.value.row(0)) {
                    *v += bv;
                }
            }
            inputs.push(cur);
            let out = match self.spec.activations[l] {
                Activation::Relu => relu(&pre),
                Activation::Identity => pre.clone(),
            };
            preacts.push(pre);
            cur = out;
        }
        Ok((cur, MlpCache { inputs, preacts }))
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, d_out: &Matrix, cache: &MlpCache) -> Result<Matrix> {
        let mut d = d_out.clone();
        for l in (0..self.layers.len()).rev() {
            let d_pre = match self.spec.activations[l] {
                Activation::Relu => relu_backward(&cache.preacts[l], &d),
                Activation::Identity => d,
            };
            let x = &cache.inputs[l];
            let (w, b) = &mut self.layers[l];
            w.grad.add_assign(&x.transpose().matmul(&d_pre)?)?;
            // Bias gradient: column sums of d_pre.
            for i in 0..d_pre.rows() {
                let row = d_pre.row(i);
                let g = b.grad.row_mut(0);
                for (gv, dv) in g.iter_mut().zip(row.iter()) {
                    *gv += dv;
                }
            }
            d = d_pre.matmul_nt(&w.value)?;
        }
        Ok(d)
    }
}
