//! Small fully connected feed-forward networks.
//!
//! Each neuron takes the weighted sum of the previous layer's outputs, adds
//! its bias and applies the layer activation; the output function is the
//! identity throughout. Parameters are trained full-batch with scaled
//! conjugate gradients and early stopping.

mod grad;
mod io;
mod train;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use grad::gradient;
pub use io::{load_model, save_model};
pub use train::{
    scg_train, split_data, DataSplit, EarlyStopping, EpochRecord, HistorySummary, ScgParams,
    StopReason, TrainConfig, TrainOutcome,
};

/// Floor applied to probabilities inside the logarithm of the cross-entropy.
pub const CE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Softmax,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Mse,
    Ce,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub n_input: usize,
    pub hidden: Vec<usize>,
    pub n_output: usize,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl Topology {
    pub fn new(
        n_input: usize,
        hidden: &[usize],
        n_output: usize,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        let t = Topology {
            n_input,
            hidden: hidden.to_vec(),
            n_output,
            hidden_activation,
            output_activation,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_input == 0 || self.n_output == 0 {
            return Err(Error::Validation(
                "input and output sizes must be >= 1".into(),
            ));
        }
        if self.hidden.len() > 2 {
            return Err(Error::Validation(format!(
                "at most two hidden layers, got {}",
                self.hidden.len()
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Validation(
                "hidden layers need at least one neuron".into(),
            ));
        }
        if self.hidden_activation == Activation::Softmax {
            return Err(Error::Validation(
                "softmax is only supported on the output layer".into(),
            ));
        }
        Ok(())
    }

    /// `(n_in, n_out, activation)` of every layer.
    pub fn layer_shapes(&self) -> Vec<(usize, usize, Activation)> {
        let mut sizes = vec![self.n_input];
        sizes.extend(&self.hidden);
        sizes.push(self.n_output);
        (0..sizes.len() - 1)
            .map(|i| {
                let act = if i + 2 == sizes.len() {
                    self.output_activation
                } else {
                    self.hidden_activation
                };
                (sizes[i], sizes[i + 1], act)
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o, _)| i * o + o).sum()
    }
}

/// One layer: `O = act(W O_prev + B)`, `W` stored out × in.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn n_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub cost: Option<CostKind>,
    #[serde(default)]
    pub history_summary: Option<HistorySummary>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    topology: Topology,
    layers: Vec<Layer>,
    pub meta: ModelMeta,
}

/// Apply an activation in place to each row of `z`.
pub(crate) fn activate(act: Activation, z: &mut Array2<f64>) {
    match act {
        Activation::Identity => {}
        Activation::Tanh => z.mapv_inplace(f64::tanh),
        Activation::Softmax => {
            for mut row in z.rows_mut() {
                let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                row.mapv_inplace(|v| (v - max).exp());
                let sum = row.sum();
                row /= sum;
            }
        }
    }
}

impl Network {
    /// Build from explicit layers, checking they chain and match `topology`.
    pub fn from_layers(topology: Topology, layers: Vec<Layer>) -> Result<Self> {
        topology.validate()?;
        let shapes = topology.layer_shapes();
        if shapes.len() != layers.len() {
            return Err(Error::Validation(format!(
                "topology has {} layers, got {}",
                shapes.len(),
                layers.len()
            )));
        }
        for (i, ((n_in, n_out, act), l)) in shapes.iter().zip(&layers).enumerate() {
            if l.n_in() != *n_in || l.n_out() != *n_out || l.biases.len() != *n_out {
                return Err(Error::Validation(format!(
                    "layer {i}: expected {n_out}x{n_in} weights and {n_out} biases, got {}x{} and {}",
                    l.n_out(),
                    l.n_in(),
                    l.biases.len()
                )));
            }
            if l.activation != *act {
                return Err(Error::Validation(format!(
                    "layer {i}: activation {:?} differs from topology",
                    l.activation
                )));
            }
        }
        Ok(Network {
            topology,
            layers,
            meta: ModelMeta::default(),
        })
    }

    pub fn zeros(topology: &Topology) -> Result<Self> {
        let layers = topology
            .layer_shapes()
            .into_iter()
            .map(|(i, o, activation)| Layer {
                weights: Array2::zeros((o, i)),
                biases: Array1::zeros(o),
                activation,
            })
            .collect();
        Network::from_layers(topology.clone(), layers)
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn n_input(&self) -> usize {
        self.topology.n_input
    }

    pub fn n_output(&self) -> usize {
        self.topology.n_output
    }

    pub fn param_count(&self) -> usize {
        self.topology.param_count()
    }

    /// Flat parameter vector: per layer, weights row-major then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.biases.iter());
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                p.len()
            )));
        }
        let mut at = 0;
        for l in &mut self.layers {
            for w in l.weights.iter_mut() {
                *w = p[at];
                at += 1;
            }
            for b in l.biases.iter_mut() {
                *b = p[at];
                at += 1;
            }
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.n_input() {
            return Err(Error::invalid(format!(
                "expected {} inputs, got {}",
                self.n_input(),
                input.len()
            )));
        }
        let x = Array2::from_shape_vec((1, input.len()), input.to_vec()).expect("shape matches");
        Ok(self.forward_batch(&x)?.row(0).to_vec())
    }

    /// Forward pass over the rows of `inputs`.
    pub fn forward_batch(&self, inputs: &Array2<f64>) -> Result<Array2<f64>> {
        if inputs.ncols() != self.n_input() {
            return Err(Error::invalid(format!(
                "expected {} input columns, got {}",
                self.n_input(),
                inputs.ncols()
            )));
        }
        let mut a = inputs.to_owned();
        for l in &self.layers {
            let mut z = a.dot(&l.weights.t());
            z += &l.biases;
            activate(l.activation, &mut z);
            a = z;
        }
        Ok(a)
    }
}

/// Uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
pub fn init_weights<R: Rng + ?Sized>(topology: &Topology, rng: &mut R) -> Result<Network> {
    let mut net = Network::zeros(topology)?;
    for l in &mut net.layers {
        let limit = (6.0 / (l.n_in() + l.n_out()) as f64).sqrt();
        for w in l.weights.iter_mut() {
            *w = rng.random_range(-limit..=limit);
        }
    }
    Ok(net)
}

fn check_lengths(o: &[f64], t: &[f64]) -> Result<()> {
    if o.len() != t.len() || o.is_empty() {
        return Err(Error::invalid(format!(
            "output length {} vs target length {}",
            o.len(),
            t.len()
        )));
    }
    Ok(())
}

/// `(1/N) sum (T_i - O_i)^2`.
pub fn cost_mse(o: &[f64], t: &[f64]) -> Result<f64> {
    check_lengths(o, t)?;
    Ok(o.iter().zip(t).map(|(o, t)| (t - o) * (t - o)).sum::<f64>() / o.len() as f64)
}

/// `-(1/N) sum T_i ln(max(O_i, 1e-12))`.
pub fn cost_cross_entropy(o: &[f64], t: &[f64]) -> Result<f64> {
    check_lengths(o, t)?;
    Ok(-o
        .iter()
        .zip(t)
        .map(|(o, t)| t * o.max(CE_FLOOR).ln())
        .sum::<f64>()
        / o.len() as f64)
}

impl CostKind {
    pub(crate) fn row_cost(self, o: ArrayView1<f64>, t: ArrayView1<f64>) -> f64 {
        let n = o.len() as f64;
        match self {
            CostKind::Mse => o.iter().zip(t).map(|(o, t)| (t - o) * (t - o)).sum::<f64>() / n,
            CostKind::Ce => {
                -o.iter()
                    .zip(t)
                    .map(|(o, t)| t * o.max(CE_FLOOR).ln())
                    .sum::<f64>()
                    / n
            }
        }
    }

    /// Mean over rows of the per-sample cost.
    pub fn batch_cost(self, outputs: &Array2<f64>, targets: &Array2<f64>) -> Result<f64> {
        if outputs.dim() != targets.dim() || outputs.nrows() == 0 {
            return Err(Error::invalid(format!(
                "outputs {:?} vs targets {:?}",
                outputs.dim(),
                targets.dim()
            )));
        }
        let total: f64 = outputs
            .axis_iter(Axis(0))
            .zip(targets.axis_iter(Axis(0)))
            .map(|(o, t)| self.row_cost(o, t))
            .sum();
        Ok(total / outputs.nrows() as f64)
    }
}

/// Inputs and targets as row-aligned matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
}

impl Samples {
    pub fn new(inputs: Array2<f64>, targets: Array2<f64>) -> Result<Self> {
        if inputs.nrows() != targets.nrows() {
            return Err(Error::invalid(format!(
                "{} input rows vs {} target rows",
                inputs.nrows(),
                targets.nrows()
            )));
        }
        Ok(Samples { inputs, targets })
    }

    pub fn from_rows(inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Self> {
        let to_matrix = |rows: &[Vec<f64>], what: &str| -> Result<Array2<f64>> {
            let cols = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != cols) {
                return Err(Error::invalid(format!("ragged {what} rows")));
            }
            Ok(Array2::from_shape_vec((rows.len(), cols), rows.concat()).expect("shape matches"))
        };
        Samples::new(to_matrix(inputs, "input")?, to_matrix(targets, "target")?)
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, idx: &[usize]) -> Samples {
        Samples {
            inputs: self.inputs.select(Axis(0), idx),
            targets: self.targets.select(Axis(0), idx),
        }
    }

    /// One-hot targets for class labels `1..=n_classes`.
    pub fn one_hot(labels: &[usize], n_classes: usize) -> Result<Array2<f64>> {
        let mut t = Array2::zeros((labels.len(), n_classes));
        for (i, &c) in labels.iter().enumerate() {
            if !(1..=n_classes).contains(&c) {
                return Err(Error::invalid(format!("class {c} outside 1..={n_classes}")));
            }
            t[[i, c - 1]] = 1.0;
        }
        Ok(t)
    }
}

/// Index of the largest component; the first wins a tie.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
