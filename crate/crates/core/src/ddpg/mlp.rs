use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Tanh,
    Linear,
}

/// Dense layer; `weights` is row-major `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    /// `y = x Wᵀ + b` for a row-major batch.
    fn affine(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let mut y = Vec::with_capacity(batch * self.outputs);
        for row in x.chunks_exact(self.inputs).take(batch) {
            for (w, b) in self.weights.chunks_exact(self.inputs).zip(&self.biases) {
                y.push(b + dot(w, row));
            }
        }
        y
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fully connected network with rectifier hidden units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub output: OutputActivation,
}

/// Post-activation values of every layer for one batch; `acts[0]` is the
/// input.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub batch: usize,
    pub acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("input layer present")
    }
}

impl Mlp {
    /// Glorot-uniform hidden layers and a final layer drawn from ±3e-3, so
    /// initial outputs sit near zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output: OutputActivation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let n = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = if i + 1 == n {
                    3e-3
                } else {
                    (6.0 / (fan_in + fan_out) as f64).sqrt()
                };
                let mut layer = Layer::zeros(fan_in, fan_out);
                for v in layer.weights.iter_mut() {
                    *v = rng.gen_range(-limit..limit);
                }
                if i + 1 == n {
                    for v in layer.biases.iter_mut() {
                        *v = rng.gen_range(-limit..limit);
                    }
                }
                layer
            })
            .collect();
        Self { layers, output }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Zero-valued network of the same shape, used for gradients.
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs, l.outputs))
                .collect(),
            output: self.output,
        }
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.sizes() == other.sizes()
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|v| v.is_finite())
    }

    pub fn forward_cached(&self, x: &[f64], batch: usize) -> ForwardCache {
        debug_assert_eq!(x.len(), batch * self.input_dim());
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = layer.affine(acts.last().expect("previous activation"), batch);
            if i < last {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            } else if self.output == OutputActivation::Tanh {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(y);
        }
        ForwardCache { batch, acts }
    }

    pub fn forward(&self, x: &[f64], batch: usize) -> Vec<f64> {
        self.forward_cached(x, batch).acts.pop().expect("output")
    }

    /// Backpropagates `grad_out` (dLoss/dOutput, batch × outputs). Parameter
    /// gradients are accumulated into `grads` when given; the gradient with
    /// respect to the input batch is returned.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &[f64], mut grads: Option<&mut Mlp>) -> Vec<f64> {
        let batch = cache.batch;
        let last = self.layers.len() - 1;
        let mut delta = grad_out.to_vec();
        if self.output == OutputActivation::Tanh {
            for (d, y) in delta.iter_mut().zip(cache.output()) {
                *d *= 1.0 - y * y;
            }
        }
        for i in (0..=last).rev() {
            let layer = &self.layers[i];
            let input = &cache.acts[i];
            if let Some(g) = grads.as_deref_mut() {
                let gl = &mut g.layers[i];
                for (d_row, x_row) in delta
                    .chunks_exact(layer.outputs)
                    .zip(input.chunks_exact(layer.inputs))
                    .take(batch)
                {
                    for ((gw, gb), &d) in gl
                        .weights
                        .chunks_exact_mut(layer.inputs)
                        .zip(gl.biases.iter_mut())
                        .zip(d_row)
                    {
                        if d == 0.0 {
                            continue;
                        }
                        *gb += d;
                        for (w, x) in gw.iter_mut().zip(x_row) {
                            *w += d * x;
                        }
                    }
                }
            }
            let mut grad_in = vec![0.0; batch * layer.inputs];
            for (d_row, g_row) in delta
                .chunks_exact(layer.outputs)
                .zip(grad_in.chunks_exact_mut(layer.inputs))
            {
                for (w, &d) in layer.weights.chunks_exact(layer.inputs).zip(d_row) {
                    if d == 0.0 {
                        continue;
                    }
                    for (g, wv) in g_row.iter_mut().zip(w) {
                        *g += d * wv;
                    }
                }
            }
            if i > 0 {
                for (g, a) in grad_in.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            delta = grad_in;
        }
        delta
    }
}

/// `target ← τ·online + (1−τ)·target`, element-wise.
pub fn soft_update(online: &Mlp, target: &mut Mlp, tau: f64) -> Result<()> {
    if !online.same_shape(target) {
        return Err(Error::ShapeMismatch(format!(
            "online {:?} vs target {:?}",
            online.sizes(),
            target.sizes()
        )));
    }
    for (t, o) in target.params_mut().zip(online.params()) {
        *t = tau * o + (1.0 - tau) * *t;
    }
    Ok(())
}

/// Adam optimizer holding first and second moments for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        let n = net.num_params();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    /// One descent step along `grads`.
    pub fn step(&mut self, net: &mut Mlp, grads: &Mlp) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let step = self.lr * c2.sqrt() / c1;
        for (((p, g), m), v) in net
            .params_mut()
            .zip(grads.params())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= step * *m / (v.sqrt() + self.eps * c2.sqrt());
        }
    }
}
