//! Independent oracles shared by the integration and acceptance tests. Nothing
//! here calls into the production forward/backward code paths.
#![allow(dead_code)]

use sddpg_core::lif::LifConfig;
use sddpg_core::nn::Dense;
use sddpg_core::stbp::PseudoGradConfig;

/// Plain nested-loop interpreter of the LIF forward recurrence on one sample.
/// Returns the output spike counts and every voltage, indexed `[t][k][i]`.
pub fn interpret_forward(layers: &[Dense], inputs: &[Vec<f64>], cfg: &LifConfig) -> (Vec<f64>, Vec<Vec<Vec<f64>>>) {
    let widths: Vec<usize> = layers.iter().map(|l| l.weights.nrows()).collect();
    let mut c: Vec<Vec<f64>> = widths.iter().map(|&n| vec![0.0; n]).collect();
    let mut v = c.clone();
    let mut o = c.clone();
    let mut count = vec![0.0; *widths.last().unwrap()];
    let mut voltages = Vec::new();
    for x in inputs {
        let mut below = x.clone();
        let mut vt = Vec::new();
        for (k, layer) in layers.iter().enumerate() {
            let mut spikes = vec![0.0; widths[k]];
            for i in 0..widths[k] {
                let mut drive = layer.bias[i];
                for (j, &s) in below.iter().enumerate() {
                    drive += layer.weights[[i, j]] * s;
                }
                c[k][i] = cfg.d_c * c[k][i] + drive;
                v[k][i] = cfg.d_v * v[k][i] * (1.0 - o[k][i]) + c[k][i];
                spikes[i] = if v[k][i] > cfg.v_th { 1.0 } else { 0.0 };
            }
            o[k] = spikes.clone();
            vt.push(v[k].clone());
            below = spikes;
        }
        for (n, s) in count.iter_mut().zip(&o[layers.len() - 1]) {
            *n += s;
        }
        voltages.push(vt);
    }
    (count, voltages)
}

#[derive(Clone, Copy)]
enum Op {
    Leaf,
    Add(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    /// Heaviside step whose derivative is the stored surrogate value.
    Spike(usize, f64),
}

/// Minimal scalar reverse-mode tape.
#[derive(Default)]
pub struct Tape {
    ops: Vec<Op>,
    values: Vec<f64>,
}

impl Tape {
    pub fn leaf(&mut self, v: f64) -> usize {
        self.push(Op::Leaf, v)
    }
    fn push(&mut self, op: Op, v: f64) -> usize {
        self.ops.push(op);
        self.values.push(v);
        self.values.len() - 1
    }
    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }
    pub fn add(&mut self, a: usize, b: usize) -> usize {
        let v = self.values[a] + self.values[b];
        self.push(Op::Add(a, b), v)
    }
    pub fn mul(&mut self, a: usize, b: usize) -> usize {
        let v = self.values[a] * self.values[b];
        self.push(Op::Mul(a, b), v)
    }
    pub fn scale(&mut self, a: usize, s: f64) -> usize {
        let v = self.values[a] * s;
        self.push(Op::Scale(a, s), v)
    }
    pub fn spike(&mut self, a: usize, v_th: f64, pg: &PseudoGradConfig) -> usize {
        let x = self.values[a];
        let d = if (x - v_th).abs() < pg.a2 { pg.a1 } else { 0.0 };
        self.push(Op::Spike(a, d), if x > v_th { 1.0 } else { 0.0 })
    }
    /// Adjoint of every node given seeds on output nodes.
    pub fn backward(&self, seeds: &[(usize, f64)]) -> Vec<f64> {
        let mut g = vec![0.0; self.values.len()];
        for &(i, s) in seeds {
            g[i] += s;
        }
        for i in (0..self.values.len()).rev() {
            let gi = g[i];
            if gi == 0.0 {
                continue;
            }
            match self.ops[i] {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    g[a] += gi;
                    g[b] += gi;
                }
                Op::Mul(a, b) => {
                    g[a] += gi * self.values[b];
                    g[b] += gi * self.values[a];
                }
                Op::Scale(a, s) => g[a] += gi * s,
                Op::Spike(a, d) => g[a] += gi * d,
            }
        }
        g
    }
}

/// Unrolls the LIF recurrence on a tape and differentiates
/// `L = Σ_i grad_action[i] · SpikeCount_i(T) / T` w.r.t. every weight and bias.
pub fn tape_gradients(
    layers: &[Dense],
    inputs: &[Vec<f64>],
    grad_action: &[f64],
    cfg: &LifConfig,
    pg: &PseudoGradConfig,
) -> Vec<Dense> {
    let mut tape = Tape::default();
    let w_ids: Vec<Vec<Vec<usize>>> = layers
        .iter()
        .map(|l| {
            (0..l.weights.nrows())
                .map(|i| (0..l.weights.ncols()).map(|j| tape.leaf(l.weights[[i, j]])).collect())
                .collect()
        })
        .collect();
    let b_ids: Vec<Vec<usize>> = layers
        .iter()
        .map(|l| l.bias.iter().map(|&b| tape.leaf(b)).collect())
        .collect();
    let zero = tape.leaf(0.0);
    let mut c: Vec<Vec<usize>> = layers.iter().map(|l| vec![zero; l.weights.nrows()]).collect();
    let mut v = c.clone();
    let mut o_val: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.weights.nrows()]).collect();
    let mut outputs = Vec::new();
    for x in inputs {
        let mut below: Vec<usize> = x.iter().map(|&s| tape.leaf(s)).collect();
        for (k, layer) in layers.iter().enumerate() {
            let mut spikes = Vec::new();
            for i in 0..layer.weights.nrows() {
                let mut drive = b_ids[k][i];
                for (j, &s) in below.iter().enumerate() {
                    let p = tape.mul(w_ids[k][i][j], s);
                    drive = tape.add(drive, p);
                }
                let decayed_c = tape.scale(c[k][i], cfg.d_c);
                c[k][i] = tape.add(decayed_c, drive);
                // reset gate enters as a constant
                let gate = tape.leaf(1.0 - o_val[k][i]);
                let decayed_v = tape.scale(v[k][i], cfg.d_v);
                let gated = tape.mul(decayed_v, gate);
                v[k][i] = tape.add(gated, c[k][i]);
                let s = tape.spike(v[k][i], cfg.v_th, pg);
                o_val[k][i] = tape.value(s);
                spikes.push(s);
            }
            below = spikes;
        }
        outputs.push(below);
    }
    let horizon = inputs.len() as f64;
    let seeds: Vec<(usize, f64)> = outputs
        .iter()
        .flat_map(|row| row.iter().enumerate().map(|(i, &id)| (id, grad_action[i] / horizon)))
        .collect();
    let g = tape.backward(&seeds);
    layers
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let mut d = Dense::zeros(l.weights.ncols(), l.weights.nrows());
            for i in 0..l.weights.nrows() {
                for j in 0..l.weights.ncols() {
                    d.weights[[i, j]] = g[w_ids[k][i][j]];
                }
                d.bias[i] = g[b_ids[k][i]];
            }
            d
        })
        .collect()
}

/// Central finite difference of `f` at `x` along coordinate `i`.
pub fn central_diff(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[i] += h;
    xm[i] -= h;
    (f(&xp) - f(&xm)) / (2.0 * h)
}

/// Relative error with an absolute floor for gradients that vanish.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Plain-loop ReLU MLP evaluation; `action` is concatenated to the input of
/// layer `action_layer`. The last layer is linear and has one output.
pub fn mlp_q(layers: &[Dense], action_layer: usize, state: &[f64], action: &[f64]) -> f64 {
    let mut h = state.to_vec();
    let last = layers.len() - 1;
    for (k, l) in layers.iter().enumerate() {
        if k == action_layer {
            h.extend_from_slice(action);
        }
        let mut out = vec![0.0; l.weights.nrows()];
        for i in 0..out.len() {
            let mut s = l.bias[i];
            for (j, x) in h.iter().enumerate() {
                s += l.weights[[i, j]] * x;
            }
            out[i] = if k == last { s } else { s.max(0.0) };
        }
        h = out;
    }
    h[0]
}
