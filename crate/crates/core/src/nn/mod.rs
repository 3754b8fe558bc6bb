//! Small fully-connected networks with hand-written backpropagation.
//!
//! Parameters of a network live in one flat [`ParamVector`]; per layer the
//! weight matrix (row-major, `outputs x inputs`) is followed by the bias
//! vector. Gradients use the same layout so optimizers and target blending
//! work on plain slices.

mod adam;
pub mod checkpoint;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

pub use adam::{adam_step, clip_global_norm, global_norm, AdamState};

/// Hidden sizes used by every value/policy network unless overridden.
pub const DEFAULT_HIDDEN: [usize; 3] = [128, 64, 32];

const HEAD_INIT_SCALE: f64 = 3e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputActivation {
    Identity,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
}

impl LayerShape {
    fn len(self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

/// Flat parameter storage plus the shapes it encodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    shapes: Vec<LayerShape>,
}

impl ParamVector {
    pub fn zeros(shapes: Vec<LayerShape>) -> Self {
        let len = shapes.iter().map(|s| s.len()).sum();
        Self {
            values: vec![0.0; len],
            shapes,
        }
    }

    /// Rebuilds from a flat array, checking the length against the shapes.
    pub fn from_flat(shapes: Vec<LayerShape>, values: Vec<f64>) -> Result<Self> {
        let expected: usize = shapes.iter().map(|s| s.len()).sum();
        if values.len() != expected {
            return Err(domain(format!(
                "flat parameter array has {} values, shapes need {expected}",
                values.len()
            )));
        }
        Ok(Self { values, shapes })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.values
    }

    /// Moves these parameters toward `online`: `self <- rate * online + (1 - rate) * self`.
    pub fn blend_from(&mut self, online: &ParamVector, rate: f64) -> Result<()> {
        if self.shapes != online.shapes {
            return Err(domain("cannot blend parameter vectors of different shapes"));
        }
        if !(0.0..=1.0).contains(&rate) {
            return Err(domain(format!("blend rate {rate} outside [0, 1]")));
        }
        for (t, o) in self.values.iter_mut().zip(&online.values) {
            *t = rate * o + (1.0 - rate) * *t;
        }
        Ok(())
    }

    /// Order-sensitive checksum of the raw bits, handy for freeze checks.
    pub fn checksum(&self) -> u64 {
        self.values.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, v| {
            (h ^ v.to_bits()).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }
}

/// Soft target update, returning the blended copy of `target`.
pub fn soft_update(target: &ParamVector, online: &ParamVector, rate: f64) -> Result<ParamVector> {
    let mut out = target.clone();
    out.blend_from(online, rate)?;
    Ok(out)
}

/// Multilayer perceptron with ReLU hidden layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    params: ParamVector,
    output: OutputActivation,
}

/// Per-layer activations recorded by a forward pass; index 0 is the input.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

fn shapes_for(dims: &[usize]) -> Result<Vec<LayerShape>> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(domain(format!("invalid layer dims {dims:?}")));
    }
    Ok(dims
        .windows(2)
        .map(|w| LayerShape {
            inputs: w[0],
            outputs: w[1],
        })
        .collect())
}

/// Dot product with four independent accumulators.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Mlp {
    /// Random initialization: He-normal weights on ReLU layers, small uniform
    /// weights on the output layer, zero biases.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], output: OutputActivation, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(dims, output)?;
        let n_layers = net.params.shapes.len();
        let mut offset = 0;
        for (l, shape) in net.params.shapes.clone().into_iter().enumerate() {
            let n_w = shape.inputs * shape.outputs;
            let weights = &mut net.params.values[offset..offset + n_w];
            if l + 1 < n_layers {
                let std = (2.0 / shape.inputs as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("positive std");
                weights.iter_mut().for_each(|w| *w = normal.sample(rng));
            } else {
                weights
                    .iter_mut()
                    .for_each(|w| *w = rng.random_range(-HEAD_INIT_SCALE..=HEAD_INIT_SCALE));
            }
            offset += shape.len();
        }
        Ok(net)
    }

    pub fn zeros(dims: &[usize], output: OutputActivation) -> Result<Self> {
        Ok(Self {
            params: ParamVector::zeros(shapes_for(dims)?),
            output,
        })
    }

    pub fn from_params(params: ParamVector, output: OutputActivation) -> Result<Self> {
        if params.shapes.is_empty() || params.shapes.windows(2).any(|w| w[0].outputs != w[1].inputs) {
            return Err(domain("layer shapes are not chain-consistent"));
        }
        Ok(Self { params, output })
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.params.shapes[0].inputs];
        dims.extend(self.params.shapes.iter().map(|s| s.outputs));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.params.shapes[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.params.shapes.last().expect("non-empty").outputs
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamVector {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(domain(format!(
                "input has {} features, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(input)?.activations.pop().expect("output layer"))
    }

    /// Forward pass keeping every layer's activations for backpropagation.
    pub fn trace(&self, input: &[f64]) -> Result<Trace> {
        self.check_input(input)?;
        let n_layers = self.params.shapes.len();
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(input.to_vec());
        let mut offset = 0;
        for (l, shape) in self.params.shapes.iter().enumerate() {
            let n_w = shape.inputs * shape.outputs;
            let weights = &self.params.values[offset..offset + n_w];
            let biases = &self.params.values[offset + n_w..offset + shape.len()];
            let x = &activations[l];
            let last = l + 1 == n_layers;
            let out: Vec<f64> = weights
                .chunks_exact(shape.inputs)
                .zip(biases)
                .map(|(row, b)| {
                    let z = b + dot(row, x);
                    match (last, self.output) {
                        (false, _) => z.max(0.0),
                        (true, OutputActivation::Identity) => z,
                        (true, OutputActivation::Sigmoid) => sigmoid(z),
                    }
                })
                .collect();
            activations.push(out);
            offset += shape.len();
        }
        Ok(Trace { activations })
    }

    /// Adds `d(upstream . output) / d(params)` for the traced input into `grad`.
    pub fn accumulate_gradient(&self, trace: &Trace, upstream: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        debug_assert_eq!(upstream.len(), self.output_dim());
        let n_layers = self.params.shapes.len();
        let out = trace.output();
        let mut delta: Vec<f64> = match self.output {
            OutputActivation::Identity => upstream.to_vec(),
            OutputActivation::Sigmoid => upstream.iter().zip(out).map(|(g, y)| g * y * (1.0 - y)).collect(),
        };
        let mut offset = self.params.len();
        for l in (0..n_layers).rev() {
            let shape = self.params.shapes[l];
            let n_w = shape.inputs * shape.outputs;
            offset -= shape.len();
            let x = &trace.activations[l];
            {
                let (gw, gb) = grad[offset..offset + shape.len()].split_at_mut(n_w);
                for ((row, gbo), &d) in gw.chunks_exact_mut(shape.inputs).zip(gb).zip(&delta) {
                    if d == 0.0 {
                        continue;
                    }
                    *gbo += d;
                    for (g, xi) in row.iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
            }
            if l > 0 {
                let weights = &self.params.values[offset..offset + n_w];
                let mut prev = vec![0.0; shape.inputs];
                for (row, &d) in weights.chunks_exact(shape.inputs).zip(&delta) {
                    if d == 0.0 {
                        continue;
                    }
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += w * d;
                    }
                }
                for (p, xi) in prev.iter_mut().zip(x) {
                    if *xi <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
    }

    /// Parameter gradient of `upstream . forward(input)`.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        let trace = self.trace(input)?;
        if upstream.len() != self.output_dim() {
            return Err(domain(format!(
                "upstream gradient has {} entries, network outputs {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        let mut grad = vec![0.0; self.params.len()];
        self.accumulate_gradient(&trace, upstream, &mut grad);
        Ok(grad)
    }

    /// Soft-updates these parameters toward `online`.
    pub fn soft_update_from(&mut self, online: &Mlp, rate: f64) -> Result<()> {
        self.params.blend_from(&online.params, rate)
    }

    pub fn is_finite(&self) -> bool {
        self.params.values.iter().all(|v| v.is_finite())
    }
}

/// Builds a randomly initialized network; see [`Mlp::new`].
pub fn init_params<R: Rng + ?Sized>(dims: &[usize], output: OutputActivation, rng: &mut R) -> Result<Mlp> {
    Mlp::new(dims, output, rng)
}

/// `[input, hidden..., output]` layer sizes.
pub fn layer_dims(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(input);
    dims.extend_from_slice(hidden);
    dims.push(output);
    dims
}
