//! Float reference MLP and its SGD trainer.
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::mnist::Dataset;
use crate::error::{shape_err, Error, Result};
use crate::nonideality::{keyed_rng, RngDomain};

/// Fully connected layer; `weights` is row-major `outputs x inputs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    pub fn weight(&self, out: usize, inp: usize) -> f32 {
        self.weights[out * self.inputs + inp]
    }

    pub fn row(&self, out: usize) -> &[f32] {
        &self.weights[out * self.inputs..(out + 1) * self.inputs]
    }

    fn validate(&self) -> Result<()> {
        if self.inputs == 0 || self.outputs == 0 {
            return Err(Error::Config("layer dimensions must be at least 1".into()));
        }
        if self.weights.len() != self.inputs * self.outputs || self.bias.len() != self.outputs {
            return Err(shape_err("layer parameters", self.inputs * self.outputs + self.outputs, self.weights.len() + self.bias.len()));
        }
        if self.weights.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn apply(&self, x: &[f32], out: &mut [f32]) {
        for (o, y) in out.iter_mut().enumerate() {
            *y = self.bias[o] + self.row(o).iter().zip(x).map(|(w, v)| w * v).sum::<f32>();
        }
    }
}

/// ReLU hidden layers followed by a linear output layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloatMlp {
    pub layers: Vec<DenseLayer>,
}

impl FloatMlp {
    /// He-initialized network with the given layer widths.
    pub fn init(widths: &[usize], seed: u64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Config(format!("invalid layer widths {widths:?}")));
        }
        let mut rng = keyed_rng(seed, RngDomain::Training, 0, 0);
        let layers = widths
            .windows(2)
            .map(|w| {
                let normal = Normal::new(0.0f32, (2.0 / w[0] as f32).sqrt()).expect("finite std");
                let mut layer = DenseLayer::zeros(w[0], w[1]);
                layer.weights.iter_mut().for_each(|v| *v = normal.sample(&mut rng));
                layer
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("model has no layers".into()));
        }
        for pair in self.layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(shape_err("layer inputs", pair[0].outputs, pair[1].inputs));
            }
        }
        self.layers.iter().try_for_each(DenseLayer::validate)
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs
    }

    /// Input vector of every layer followed by the output logits.
    pub fn trace(&self, x: &[f32]) -> Vec<Vec<f32>> {
        let mut acts = vec![x.to_vec()];
        for (l, layer) in self.layers.iter().enumerate() {
            let mut y = vec![0.0; layer.outputs];
            layer.apply(acts.last().expect("nonempty"), &mut y);
            if l + 1 < self.layers.len() {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(y);
        }
        acts
    }

    pub fn logits(&self, x: &[f32]) -> Vec<f32> {
        self.trace(x).pop().expect("nonempty")
    }

    pub fn predict(&self, x: &[f32]) -> usize {
        argmax(&self.logits(x))
    }

    pub fn accuracy(&self, data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let correct = (0..data.len()).filter(|&i| self.predict(&data.input(i)) == data.label(i) as usize).count();
        correct as f64 / data.len() as f64
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax<T: PartialOrd + Copy>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Mini-batch SGD settings for the reference model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { hidden: 72, epochs: 20, batch_size: 32, learning_rate: 0.05 }
    }
}

/// Trains a one-hidden-layer softmax classifier with plain SGD.
pub fn train_mlp(data: &Dataset, classes: usize, cfg: &TrainConfig, seed: u64) -> Result<FloatMlp> {
    if data.is_empty() || cfg.batch_size == 0 || cfg.hidden == 0 || classes < 2 {
        return Err(Error::Config("training needs data, a batch size, hidden units and two classes".into()));
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(Error::Config("learning rate must be positive".into()));
    }
    if let Some(i) = (0..data.len()).find(|&i| data.label(i) as usize >= classes) {
        return Err(Error::Data(format!("label {} of sample {i} exceeds {classes} classes", data.label(i))));
    }
    let n_in = data.image_len();
    let mut model = FloatMlp::init(&[n_in, cfg.hidden, classes], seed)?;
    let mut rng = keyed_rng(seed, RngDomain::Training, 1, 0);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grads = [DenseLayer::zeros(n_in, cfg.hidden), DenseLayer::zeros(cfg.hidden, classes)];
    let mut hidden = vec![0.0f32; cfg.hidden];
    let mut out = vec![0.0f32; classes];
    let mut d_hidden = vec![0.0f32; cfg.hidden];

    for _ in 0..cfg.epochs {
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        for batch in order.chunks(cfg.batch_size) {
            for g in grads.iter_mut() {
                g.weights.fill(0.0);
                g.bias.fill(0.0);
            }
            for &s in batch {
                let x = data.input(s);
                let nz: Vec<usize> = (0..n_in).filter(|&k| x[k] != 0.0).collect();
                let (l1, l2) = (&model.layers[0], &model.layers[1]);
                for (h, v) in hidden.iter_mut().enumerate() {
                    let row = l1.row(h);
                    *v = (l1.bias[h] + nz.iter().map(|&k| row[k] * x[k]).sum::<f32>()).max(0.0);
                }
                l2.apply(&hidden, &mut out);
                softmax_in_place(&mut out);
                out[data.label(s) as usize] -= 1.0;

                d_hidden.fill(0.0);
                for (o, &d) in out.iter().enumerate() {
                    grads[1].bias[o] += d;
                    let gw = &mut grads[1].weights[o * cfg.hidden..(o + 1) * cfg.hidden];
                    for (h, g) in gw.iter_mut().enumerate() {
                        *g += d * hidden[h];
                        d_hidden[h] += d * l2.weights[o * cfg.hidden + h];
                    }
                }
                for h in 0..cfg.hidden {
                    if hidden[h] <= 0.0 {
                        continue;
                    }
                    let d = d_hidden[h];
                    grads[0].bias[h] += d;
                    let gw = &mut grads[0].weights[h * n_in..(h + 1) * n_in];
                    for &k in &nz {
                        gw[k] += d * x[k];
                    }
                }
            }
            let step = cfg.learning_rate / batch.len() as f32;
            for (layer, g) in model.layers.iter_mut().zip(&grads) {
                layer.weights.iter_mut().zip(&g.weights).for_each(|(w, d)| *w -= step * d);
                layer.bias.iter_mut().zip(&g.bias).for_each(|(b, d)| *b -= step * d);
            }
        }
    }
    model.validate()?;
    Ok(model)
}

fn softmax_in_place(v: &mut [f32]) {
    let max = v.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    v.iter_mut().for_each(|x| *x /= sum);
}
