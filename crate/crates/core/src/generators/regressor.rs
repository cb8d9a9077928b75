use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;

const FORMAT: &str = "olpi-residual-regressor";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Start from all-zero weights; an untrained zero network is constant.
    #[serde(default)]
    pub zero_init: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            hidden: vec![32, 32],
            epochs: 60,
            batch_size: 32,
            learning_rate: 3e-3,
            zero_init: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Dense {
    inputs: usize,
    outputs: usize,
    /// row-major, `outputs × inputs`
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Dense {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let mut acc = self.biases[o];
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            out.push(acc);
        }
    }
}

/// Feedforward network with tanh hidden layers and a linear output layer.
/// Inputs and outputs are scaled per coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regressor {
    format: String,
    version: u32,
    pub input_scale: Vec<f64>,
    pub output_scale: Vec<f64>,
    layers: Vec<Dense>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Regressor {
    pub fn new(
        input_scale: Vec<f64>,
        output_scale: Vec<f64>,
        hidden: &[usize],
        zero_init: bool,
        rng: &mut StreamRng,
    ) -> Self {
        let mut sizes = vec![input_scale.len()];
        sizes.extend_from_slice(hidden);
        sizes.push(output_scale.len());
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                let std = (2.0 / (inputs + outputs) as f64).sqrt();
                let weights = (0..inputs * outputs)
                    .map(|_| {
                        if zero_init {
                            0.0
                        } else {
                            std * rng.sample::<f64, _>(StandardNormal)
                        }
                    })
                    .collect();
                Dense {
                    inputs,
                    outputs,
                    weights,
                    biases: vec![0.0; outputs],
                }
            })
            .collect();
        Regressor {
            format: FORMAT.into(),
            version: VERSION,
            input_scale,
            output_scale,
            layers,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_scale.len()
    }

    pub fn output_dim(&self) -> usize {
        self.output_scale.len()
    }

    /// Evaluates the network on raw (unscaled) input, returning raw output.
    pub fn predict(&self, input: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = input
            .iter()
            .zip(&self.input_scale)
            .map(|(v, s)| v / s)
            .collect();
        let mut y = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&x, &mut y);
            if i < last {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(&mut x, &mut y);
        }
        x.iter_mut()
            .zip(&self.output_scale)
            .for_each(|(v, s)| *v *= s);
        x
    }

    fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Mean-squared-error fit of raw targets by mini-batch Adam.
    /// Returns the per-epoch mean loss in scaled output units.
    pub fn train(
        &mut self,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
        config: &TrainingConfig,
        rng: &mut StreamRng,
    ) -> Result<Vec<f64>> {
        assert_eq!(inputs.len(), targets.len());
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        let xs: Vec<Vec<f64>> = inputs
            .iter()
            .map(|x| x.iter().zip(&self.input_scale).map(|(v, s)| v / s).collect())
            .collect();
        let ys: Vec<Vec<f64>> = targets
            .iter()
            .map(|y| y.iter().zip(&self.output_scale).map(|(v, s)| v / s).collect())
            .collect();

        let mut adam = Adam {
            m: vec![0.0; self.param_count()],
            v: vec![0.0; self.param_count()],
            t: 0,
        };
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mut history = Vec::with_capacity(config.epochs);
        let batch = config.batch_size.max(1);
        for epoch in 0..config.epochs {
            order.shuffle(rng);
            let mut total = 0.0;
            for chunk in order.chunks(batch) {
                let mut grad = vec![0.0; self.param_count()];
                for &i in chunk {
                    total += self.backprop(&xs[i], &ys[i], &mut grad);
                }
                let scale = 1.0 / chunk.len() as f64;
                grad.iter_mut().for_each(|g| *g *= scale);
                self.adam_step(&mut adam, &grad, config.learning_rate);
            }
            let loss = total / xs.len() as f64;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch, loss });
            }
            history.push(loss);
        }
        Ok(history)
    }

    /// Accumulates d(loss)/d(params) for one scaled sample into `grad`;
    /// returns the sample loss ½‖ŷ − y‖².
    fn backprop(&self, x: &[f64], y: &[f64], grad: &mut [f64]) -> f64 {
        let last = self.layers.len() - 1;
        let mut acts: Vec<Vec<f64>> = vec![x.to_vec()];
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::new();
            layer.forward(acts.last().expect("input"), &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
        }
        let pred = acts.last().expect("output");
        let mut delta: Vec<f64> = pred.iter().zip(y).map(|(p, t)| p - t).collect();
        let loss = 0.5 * delta.iter().map(|d| d * d).sum::<f64>();

        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.weights.len() + l.biases.len();
        }
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &acts[i];
            let base = offsets[i];
            for o in 0..layer.outputs {
                let d = delta[o];
                let row = base + o * layer.inputs;
                for (j, a) in input.iter().enumerate() {
                    grad[row + j] += d * a;
                }
                grad[base + layer.weights.len() + o] += d;
            }
            if i > 0 {
                let mut back = vec![0.0; layer.inputs];
                for o in 0..layer.outputs {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (b, w) in back.iter_mut().zip(row) {
                        *b += w * delta[o];
                    }
                }
                // tanh' = 1 − a²
                for (b, a) in back.iter_mut().zip(input) {
                    *b *= 1.0 - a * a;
                }
                delta = back;
            }
        }
        loss
    }

    fn adam_step(&mut self, adam: &mut Adam, grad: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        adam.t += 1;
        let c1 = 1.0 - B1.powi(adam.t);
        let c2 = 1.0 - B2.powi(adam.t);
        let mut idx = 0;
        for layer in &mut self.layers {
            for p in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                let g = grad[idx];
                adam.m[idx] = B1 * adam.m[idx] + (1.0 - B1) * g;
                adam.v[idx] = B2 * adam.v[idx] + (1.0 - B2) * g * g;
                *p -= lr * (adam.m[idx] / c1) / ((adam.v[idx] / c2).sqrt() + EPS);
                idx += 1;
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Regressor = serde_json::from_str(text)?;
        if r.format != FORMAT {
            return Err(Error::schema("format", format!("expected `{FORMAT}`")));
        }
        if r.version != VERSION {
            return Err(Error::schema("version", format!("unsupported version {}", r.version)));
        }
        let mut prev = r.input_scale.len();
        for (i, l) in r.layers.iter().enumerate() {
            if l.inputs != prev
                || l.weights.len() != l.inputs * l.outputs
                || l.biases.len() != l.outputs
            {
                return Err(Error::schema(format!("layers[{i}]"), "inconsistent shape"));
            }
            prev = l.outputs;
        }
        if r.layers.is_empty() || prev != r.output_scale.len() {
            return Err(Error::schema("layers", "output width does not match output_scale"));
        }
        Ok(r)
    }
}
