//! A small fully-connected network of logistic units trained one element at
//! a time.
//!
//! Besides the usual weight gradient, the network exposes the gradient with
//! respect to its *inputs*, which is what lets latent vectors be learned by
//! the same backpropagation pass. Both gradients follow the classic
//! convention where a unit's error term is `(target - out) * f'(net)`, so
//! they are the derivatives of `(target - out)^2 / 2`.
//!
//! Forward, backprop and gradient extraction share scratch buffers inside the
//! model: a single instance must run them as one sequence at a time.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard deviation of the initial weights.
pub const INIT_STD: f64 = 0.01;

#[inline]
pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Derivative of the logistic function expressed through its output.
#[inline]
pub fn logistic_slope(activation: f64) -> f64 {
    activation * (1.0 - activation)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub inputs: usize,
    pub hidden: Vec<usize>,
    pub outputs: usize,
}

impl Topology {
    pub fn new(inputs: usize, hidden: Vec<usize>, outputs: usize) -> Result<Self> {
        let t = Topology { inputs, hidden, outputs };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs == 0 || self.outputs == 0 || self.hidden.contains(&0) {
            return Err(Error::arg(format!("every layer needs at least one unit: {self:?}")));
        }
        Ok(())
    }

    /// Layer sizes from input to output.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.hidden.len() + 2);
        s.push(self.inputs);
        s.extend(&self.hidden);
        s.push(self.outputs);
        s
    }

    pub fn hidden_layers(&self) -> usize {
        self.hidden.len()
    }

    pub fn weight_count(&self) -> usize {
        self.sizes().windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }
}

/// Weights feeding one layer. `weights[j * inputs + i]` is the weight from
/// unit `i` of the previous layer to unit `j` of this one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    #[inline]
    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.weights[to * self.inputs + from]
    }

    #[inline]
    fn row(&self, to: usize) -> &[f64] {
        &self.weights[to * self.inputs..(to + 1) * self.inputs]
    }

    #[inline]
    fn net(&self, to: usize, input: &[f64]) -> f64 {
        self.bias[to] + dot(self.row(to), input)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
enum Stage {
    #[default]
    Idle,
    /// Forward pass done; `Some(c)` when only output `c` was computed.
    Forward(Option<usize>),
    /// Error terms populated for a presentation of output `c`.
    Deltas(usize),
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    input: Vec<f64>,
    net: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    stage: Stage,
}

impl Scratch {
    fn for_topology(t: &Topology) -> Self {
        let sizes = t.sizes();
        let per_layer = || sizes[1..].iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>();
        Scratch {
            input: vec![0.0; t.inputs],
            net: per_layer(),
            act: per_layer(),
            delta: per_layer(),
            stage: Stage::Idle,
        }
    }
}

/// Gradient of the presented element's error with respect to every weight
/// and bias, laid out like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGradient {
    pub layers: Vec<Layer>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "ModelFile", try_from = "ModelFile")]
pub struct MlpModel {
    topology: Topology,
    layers: Vec<Layer>,
    scratch: Scratch,
}

impl PartialEq for MlpModel {
    fn eq(&self, other: &Self) -> bool {
        self.topology == other.topology && self.layers == other.layers
    }
}

/// On-disk form: weights row-major per layer (`[to][from]`), biases per layer.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    topology: Topology,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl From<MlpModel> for ModelFile {
    fn from(m: MlpModel) -> Self {
        ModelFile {
            topology: m.topology,
            weights: m.layers.iter().map(|l| l.weights.clone()).collect(),
            biases: m.layers.into_iter().map(|l| l.bias).collect(),
        }
    }
}

impl TryFrom<ModelFile> for MlpModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let mut m = MlpModel::zeros(f.topology)?;
        if f.weights.len() != m.layers.len() || f.biases.len() != m.layers.len() {
            return Err(Error::Schema("layer count does not match topology".into()));
        }
        for ((layer, w), b) in m.layers.iter_mut().zip(f.weights).zip(f.biases) {
            if w.len() != layer.weights.len() || b.len() != layer.bias.len() {
                return Err(Error::Schema("weight shape does not match topology".into()));
            }
            layer.weights = w;
            layer.bias = b;
        }
        Ok(m)
    }
}

impl MlpModel {
    /// A network with every weight and bias zero.
    pub fn zeros(topology: Topology) -> Result<Self> {
        topology.validate()?;
        let sizes = topology.sizes();
        let layers = sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        let scratch = Scratch::for_topology(&topology);
        Ok(MlpModel {
            topology,
            layers,
            scratch,
        })
    }

    /// Draws every weight and bias from `Normal(0, 0.01)`, layer by layer.
    pub fn init<R: Rng + ?Sized>(topology: Topology, rng: &mut R) -> Result<Self> {
        let mut m = Self::zeros(topology)?;
        let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
        for layer in &mut m.layers {
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = normal.sample(rng);
            }
        }
        Ok(m)
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.scratch.stage = Stage::Idle;
        &mut self.layers
    }

    pub fn inputs(&self) -> usize {
        self.topology.inputs
    }

    pub fn outputs(&self) -> usize {
        self.topology.outputs
    }

    /// Net input of every unit in layer `layer` (0 = first non-input layer)
    /// from the last forward pass.
    pub fn net_inputs(&self, layer: usize) -> &[f64] {
        &self.scratch.net[layer]
    }

    pub fn activations(&self, layer: usize) -> &[f64] {
        &self.scratch.act[layer]
    }

    pub fn deltas(&self, layer: usize) -> &[f64] {
        &self.scratch.delta[layer]
    }

    fn load_input(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.topology.inputs {
            return Err(Error::arg(format!(
                "input has {} values, network expects {}",
                v.len(),
                self.topology.inputs
            )));
        }
        self.scratch.input.copy_from_slice(v);
        Ok(())
    }

    fn propagate_hidden(&mut self) {
        let hidden = self.layers.len() - 1;
        for k in 0..hidden {
            let (prev, rest) = self.scratch.act.split_at_mut(k);
            let input: &[f64] = if k == 0 { &self.scratch.input } else { &prev[k - 1] };
            let layer = &self.layers[k];
            for j in 0..layer.outputs {
                let net = layer.net(j, input);
                self.scratch.net[k][j] = net;
                rest[0][j] = logistic(net);
            }
        }
    }

    fn last_input(&self) -> &[f64] {
        let last = self.layers.len() - 1;
        if last == 0 {
            &self.scratch.input
        } else {
            &self.scratch.act[last - 1]
        }
    }

    /// Full forward pass; returns the output activations.
    pub fn forward(&mut self, v: &[f64]) -> Result<&[f64]> {
        self.load_input(v)?;
        self.propagate_hidden();
        let last = self.layers.len() - 1;
        for j in 0..self.topology.outputs {
            let net = self.layers[last].net(j, self.last_input());
            self.scratch.net[last][j] = net;
            self.scratch.act[last][j] = logistic(net);
        }
        self.scratch.stage = Stage::Forward(None);
        Ok(&self.scratch.act[last])
    }

    /// Forward pass that computes every hidden unit but only output `c`.
    pub fn forward_single_output(&mut self, v: &[f64], c: usize) -> Result<f64> {
        if c >= self.topology.outputs {
            return Err(Error::arg(format!(
                "output index {c} out of range for {} outputs",
                self.topology.outputs
            )));
        }
        self.load_input(v)?;
        self.propagate_hidden();
        let last = self.layers.len() - 1;
        let net = self.layers[last].net(c, self.last_input());
        let out = logistic(net);
        self.scratch.net[last][c] = net;
        self.scratch.act[last][c] = out;
        self.scratch.stage = Stage::Forward(Some(c));
        Ok(out)
    }

    /// Computes error terms for a presentation of output `c` with `target`.
    /// Every other output unit gets a zero error term.
    pub fn backprop_deltas(&mut self, c: usize, target: f64) -> Result<()> {
        match self.scratch.stage {
            Stage::Forward(None) if c < self.topology.outputs => {}
            Stage::Forward(Some(p)) if p == c => {}
            Stage::Forward(_) => {
                return Err(Error::State(format!("output {c} was not computed by the last forward pass")))
            }
            _ => return Err(Error::State("backprop requires a forward pass first".into())),
        }
        let last = self.layers.len() - 1;
        let s = &mut self.scratch;
        s.delta[last].fill(0.0);
        let out = s.act[last][c];
        s.delta[last][c] = (target - out) * logistic_slope(out);

        if last > 0 {
            // Only output c carries error into the last hidden layer.
            let layer = &self.layers[last];
            let dc = s.delta[last][c];
            for i in 0..layer.inputs {
                s.delta[last - 1][i] = layer.weight(i, c) * dc * logistic_slope(s.act[last - 1][i]);
            }
            for k in (0..last - 1).rev() {
                let above = &self.layers[k + 1];
                let (lower, upper) = s.delta.split_at_mut(k + 1);
                for i in 0..above.inputs {
                    let mut sum = 0.0;
                    for (j, dj) in upper[0].iter().enumerate() {
                        sum += above.weight(i, j) * dj;
                    }
                    lower[k][i] = sum * logistic_slope(s.act[k][i]);
                }
            }
        }
        s.stage = Stage::Deltas(c);
        Ok(())
    }

    fn presented(&self) -> Result<usize> {
        match self.scratch.stage {
            Stage::Deltas(c) => Ok(c),
            _ => Err(Error::State("error terms have not been computed".into())),
        }
    }

    /// `g[i][j] = -delta_j * alpha_i`, with `alpha = 1` for bias terms.
    pub fn weight_gradient(&self) -> Result<WeightGradient> {
        self.presented()?;
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(k, layer)| {
                let input = if k == 0 { &self.scratch.input } else { &self.scratch.act[k - 1] };
                let delta = &self.scratch.delta[k];
                let mut g = Layer::zeros(layer.inputs, layer.outputs);
                for j in 0..layer.outputs {
                    for i in 0..layer.inputs {
                        g.weights[j * layer.inputs + i] = -delta[j] * input[i];
                    }
                    g.bias[j] = -delta[j];
                }
                g
            })
            .collect();
        Ok(WeightGradient { layers })
    }

    /// Gradient with respect to the inputs. With no hidden layers only the
    /// weights into the presented output take part, `h_i = -w_{i,c} delta_c`;
    /// otherwise `h_i = -sum_j w_{i,j} delta_j` over the first hidden layer.
    /// Biases are not fed by the input and never contribute.
    pub fn input_gradient(&self) -> Result<Vec<f64>> {
        let mut h = vec![0.0; self.topology.inputs];
        self.input_gradient_into(&mut h)?;
        Ok(h)
    }

    pub fn input_gradient_into(&self, h: &mut [f64]) -> Result<()> {
        let c = self.presented()?;
        if h.len() != self.topology.inputs {
            return Err(Error::arg("input gradient buffer has the wrong length"));
        }
        if self.topology.hidden.is_empty() {
            self.single_into(c, h);
        } else {
            self.summed_into(h);
        }
        Ok(())
    }

    /// Input gradient through the one presented output unit.
    pub fn input_gradient_single(&self, c: usize) -> Vec<f64> {
        let mut h = vec![0.0; self.topology.inputs];
        self.single_into(c, &mut h);
        h
    }

    /// Input gradient summed over every unit the inputs feed.
    pub fn input_gradient_summed(&self) -> Vec<f64> {
        let mut h = vec![0.0; self.topology.inputs];
        self.summed_into(&mut h);
        h
    }

    fn single_into(&self, c: usize, h: &mut [f64]) {
        let layer = &self.layers[0];
        let dc = self.scratch.delta[0][c];
        for (i, hi) in h.iter_mut().enumerate() {
            *hi = -(layer.weight(i, c) * dc);
        }
    }

    fn summed_into(&self, h: &mut [f64]) {
        let layer = &self.layers[0];
        let delta = &self.scratch.delta[0];
        for (i, hi) in h.iter_mut().enumerate() {
            let mut sum = 0.0;
            for (j, dj) in delta.iter().enumerate() {
                sum += layer.weight(i, j) * dj;
            }
            *hi = -sum;
        }
    }

    /// Forward pass that leaves the scratch state alone.
    pub fn predict(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.topology.inputs {
            return Err(Error::arg(format!(
                "input has {} values, network expects {}",
                v.len(),
                self.topology.inputs
            )));
        }
        let mut current = v.to_vec();
        for layer in &self.layers {
            current = (0..layer.outputs).map(|j| logistic(layer.net(j, &current))).collect();
        }
        Ok(current)
    }

    /// `W <- W - eta * (g + lambda * W)` for an explicit gradient.
    pub fn apply_gradient(&mut self, g: &WeightGradient, eta: f64, lambda: f64) {
        for (layer, gl) in self.layers.iter_mut().zip(&g.layers) {
            for (w, gw) in layer.weights.iter_mut().zip(&gl.weights) {
                *w -= eta * (gw + lambda * *w);
            }
            for (b, gb) in layer.bias.iter_mut().zip(&gl.bias) {
                *b -= eta * (gb + lambda * *b);
            }
        }
    }

    /// Same update as [`weight_gradient`](Self::weight_gradient) followed by
    /// [`apply_gradient`](Self::apply_gradient), without materializing `g`.
    /// With `lambda == 0`, units with a zero error term are skipped.
    pub fn descend(&mut self, eta: f64, lambda: f64) -> Result<()> {
        self.presented()?;
        let s = &self.scratch;
        for (k, layer) in self.layers.iter_mut().enumerate() {
            let input: &[f64] = if k == 0 { &s.input } else { &s.act[k - 1] };
            let delta = &s.delta[k];
            let n_in = layer.inputs;
            for j in 0..layer.outputs {
                let dj = delta[j];
                if dj == 0.0 && lambda == 0.0 {
                    continue;
                }
                let row = &mut layer.weights[j * n_in..(j + 1) * n_in];
                for (w, a) in row.iter_mut().zip(input) {
                    *w -= eta * (-dj * a + lambda * *w);
                }
                let b = &mut layer.bias[j];
                *b -= eta * (-dj + lambda * *b);
            }
        }
        Ok(())
    }

    /// Squared error of output `c` for input `v`, halved to match the
    /// gradient convention. Runs a full forward pass.
    pub fn half_squared_error(&mut self, v: &[f64], c: usize, target: f64) -> Result<f64> {
        let out = self.forward(v)?[c];
        Ok(0.5 * (target - out) * (target - out))
    }
}
