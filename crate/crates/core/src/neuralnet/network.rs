use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu(a) => {
                if z > 0.0 {
                    z
                } else {
                    a * z
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative in terms of the pre-activation `z` and output `a = f(z)`.
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(alpha) => {
                if z > 0.0 {
                    1.0
                } else {
                    alpha
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fully connected layer: `a = f(x W + b)` with `W` of shape `(inputs, outputs)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }

    fn pre_activation(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x * &self.weights;
        for (j, mut col) in z.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.bias[j]);
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    pub layers: Vec<DenseLayer>,
}

/// Intermediate values of one forward pass, consumed by [`DenseNetwork::backward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `activations[0]` is the input batch; `activations[l + 1]` the output of layer `l`.
    pub activations: Vec<DMatrix<f64>>,
    pub pre_activations: Vec<DMatrix<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &DMatrix<f64> {
        self.activations.last().expect("trace holds the input at least")
    }
}

/// Parameter gradients laid out like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(DMatrix<f64>, DVector<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNetwork) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| (DMatrix::zeros(l.inputs(), l.outputs()), DVector::zeros(l.outputs())))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            *w += ow;
            *b += ob;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn norm(&self) -> f64 {
        self.layers.iter().map(|(w, b)| w.norm_squared() + b.norm_squared()).sum::<f64>().sqrt()
    }
}

impl DenseNetwork {
    /// Glorot-uniform weights, zero biases. `sizes` has one more entry than `activations`.
    pub fn new(sizes: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return Err(Error::domain(format!(
                "{} layer sizes need {} activations, got {}",
                sizes.len(),
                sizes.len().saturating_sub(1),
                activations.len()
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::domain("layer sizes must be positive"));
        }
        let mut rng = seed::rng(seed);
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                DenseLayer {
                    weights: DMatrix::from_fn(w[0], w[1], |_, _| rng.random_range(-limit..limit)),
                    bias: DVector::zeros(w[1]),
                    activation,
                }
            })
            .collect();
        Ok(DenseNetwork { layers })
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::domain("network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::domain("consecutive layer dimensions are incompatible"));
            }
        }
        if layers.iter().any(|l| l.bias.len() != l.outputs()) {
            return Err(Error::domain("bias length differs from layer width"));
        }
        Ok(DenseNetwork { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").outputs()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(DenseLayer::outputs));
        s
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn check_input(&self, batch: &DMatrix<f64>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::domain(format!(
                "batch has {} columns, network expects {}",
                batch.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Batch rows are samples.
    pub fn forward(&self, batch: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_input(batch)?;
        let mut a = batch.clone();
        for layer in &self.layers {
            let f = layer.activation;
            a = layer.pre_activation(&a).map(|z| f.apply(z));
        }
        Ok(a)
    }

    pub fn forward_trace(&self, batch: &DMatrix<f64>) -> Result<ForwardTrace> {
        self.check_input(batch)?;
        let mut activations = vec![batch.clone()];
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let f = layer.activation;
            let z = layer.pre_activation(activations.last().expect("input pushed"));
            activations.push(z.map(|v| f.apply(v)));
            pre_activations.push(z);
        }
        Ok(ForwardTrace { activations, pre_activations })
    }

    /// Reverse-mode pass. `loss_grad` is dLoss/dOutput for each batch row.
    /// Returns parameter gradients and dLoss/dInput.
    pub fn backward(&self, trace: &ForwardTrace, loss_grad: &DMatrix<f64>) -> Result<(Gradients, DMatrix<f64>)> {
        if trace.pre_activations.len() != self.layers.len() || loss_grad.shape() != trace.output().shape() {
            return Err(Error::domain(format!(
                "upstream gradient {:?} does not match network output {:?}",
                loss_grad.shape(),
                trace.output().shape()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = loss_grad.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let f = layer.activation;
            let z = &trace.pre_activations[l];
            let a = &trace.activations[l + 1];
            let mut delta = upstream;
            for ((d, &zv), &av) in delta.iter_mut().zip(z.iter()).zip(a.iter()) {
                *d *= f.derivative(zv, av);
            }
            let dw = trace.activations[l].transpose() * &delta;
            let db = DVector::from_iterator(delta.ncols(), delta.column_iter().map(|c| c.sum()));
            upstream = &delta * layer.weights.transpose();
            grads.push((dw, db));
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, upstream))
    }

    /// Flattened parameter access, weights (row-major) then bias, layer by layer.
    pub(crate) fn parameter_mut(&mut self, mut index: usize) -> &mut f64 {
        for layer in &mut self.layers {
            let (rows, cols) = layer.weights.shape();
            if index < rows * cols {
                return &mut layer.weights[(index / cols, index % cols)];
            }
            index -= rows * cols;
            if index < cols {
                return &mut layer.bias[index];
            }
            index -= cols;
        }
        panic!("parameter index out of range");
    }
}

impl Gradients {
    pub(crate) fn parameter(&self, mut index: usize) -> f64 {
        for (w, b) in &self.layers {
            let (rows, cols) = w.shape();
            if index < rows * cols {
                return w[(index / cols, index % cols)];
            }
            index -= rows * cols;
            if index < cols {
                return b[index];
            }
            index -= cols;
        }
        panic!("parameter index out of range");
    }
}

/// JSON layout: layer sizes, activation tags, row-major weights and biases.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl From<&DenseNetwork> for NetworkDocument {
    fn from(net: &DenseNetwork) -> Self {
        NetworkDocument {
            layer_sizes: net.layer_sizes(),
            activations: net.layers.iter().map(|l| l.activation).collect(),
            weights: net
                .layers
                .iter()
                .map(|l| {
                    let (r, c) = l.weights.shape();
                    (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).map(|ij| l.weights[ij]).collect()
                })
                .collect(),
            biases: net.layers.iter().map(|l| l.bias.iter().copied().collect()).collect(),
        }
    }
}

impl TryFrom<NetworkDocument> for DenseNetwork {
    type Error = Error;

    fn try_from(doc: NetworkDocument) -> Result<Self> {
        let n = doc.activations.len();
        if doc.layer_sizes.len() != n + 1 || doc.weights.len() != n || doc.biases.len() != n {
            return Err(Error::Config("network document has inconsistent layer counts".into()));
        }
        let mut layers = Vec::with_capacity(n);
        for l in 0..n {
            let (rows, cols) = (doc.layer_sizes[l], doc.layer_sizes[l + 1]);
            if doc.weights[l].len() != rows * cols || doc.biases[l].len() != cols {
                return Err(Error::Config(format!("layer {l} parameter arrays have the wrong length")));
            }
            if doc.weights[l].iter().chain(&doc.biases[l]).any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("layer {l} has non-finite parameters")));
            }
            layers.push(DenseLayer {
                weights: DMatrix::from_row_slice(rows, cols, &doc.weights[l]),
                bias: DVector::from_vec(doc.biases[l].clone()),
                activation: doc.activations[l],
            });
        }
        DenseNetwork::from_layers(layers)
    }
}

impl DenseNetwork {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NetworkDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDocument = serde_json::from_str(text)?;
        doc.try_into()
    }
}
