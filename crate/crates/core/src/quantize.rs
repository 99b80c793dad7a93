//! Fixed-point deployment: per-layer rescaling to 8-bit integer weights and
//! an integer-drive inference engine, plus conversion of a dense actor into a
//! spiking one.

use ndarray::{Array1, Array2, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{deep_actor_forward_batch, DeepActorParams};
use crate::error::{Error, Result};
use crate::lif::{poisson_encode_batch, san_forward, LifConfig, SanParams, SpikeTrain};
use crate::nn::Dense;

/// Largest weight magnitude of a signed 8-bit synapse.
pub const W_MAX_INT: i32 = 127;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<i8>,
    pub bias: Vec<i32>,
    pub v_th: i32,
    /// Scale applied to the float weights, bias and threshold.
    pub ratio: f64,
}

impl QuantizedLayer {
    fn weight(&self, out: usize, inp: usize) -> i32 {
        self.weights[out * self.inputs + inp] as i32
    }

    /// The weights mapped back to float scale, `W_q / r`.
    pub fn dequantized(&self) -> Dense {
        let w = Array2::from_shape_fn((self.outputs, self.inputs), |(o, i)| self.weight(o, i) as f64 / self.ratio);
        let b = Array1::from_iter(self.bias.iter().map(|&b| b as f64 / self.ratio));
        Dense { weights: w, bias: b }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedSan {
    pub layers: Vec<QuantizedLayer>,
    /// Decays and timestep count as in training; the threshold is per layer.
    pub lif: LifConfig,
}

/// Rescales every layer by `r = w_max_int / max|W|`, rounding weights,
/// biases and the threshold to integers.
pub fn quantize_san(params: &SanParams, lif: &LifConfig, w_max_int: i32) -> Result<QuantizedSan> {
    if !(1..=W_MAX_INT).contains(&w_max_int) {
        return Err(Error::Config(format!("integer weight bound {w_max_int} outside 1..={W_MAX_INT}")));
    }
    lif.validate()?;
    let mut layers = Vec::with_capacity(params.layers.len());
    for (k, layer) in params.layers.iter().enumerate() {
        let max = layer.weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        if max == 0.0 || !max.is_finite() {
            return Err(Error::DegenerateLayer { layer: k });
        }
        let ratio = w_max_int as f64 / max;
        let to_int = |x: f64, what: &str| -> Result<i32> {
            let q = (ratio * x).round();
            if q.abs() > i32::MAX as f64 {
                return Err(Error::Overflow(format!("layer {k} {what} {x} does not fit 32 bits at ratio {ratio}")));
            }
            Ok(q as i32)
        };
        let weights = layer
            .weights
            .iter()
            .map(|&w| to_int(w, "weight").map(|q| q.clamp(-w_max_int, w_max_int) as i8))
            .collect::<Result<Vec<_>>>()?;
        let bias = layer.bias.iter().map(|&b| to_int(b, "bias")).collect::<Result<Vec<_>>>()?;
        let v_th = to_int(lif.v_th, "threshold")?;
        if v_th <= 0 {
            return Err(Error::DegenerateLayer { layer: k });
        }
        layers.push(QuantizedLayer { inputs: layer.inputs(), outputs: layer.outputs(), weights, bias, v_th, ratio });
    }
    Ok(QuantizedSan { layers, lif: *lif })
}

/// Output of the integer engine with every layer's spikes.
#[derive(Debug, Clone)]
pub struct QuantizedTrace {
    /// `spikes[t][k]`: `batch × width` spikes of layer `k` at step `t`.
    pub spikes: Vec<Vec<Array2<f64>>>,
    pub action: Array2<f64>,
}

/// Integer synaptic drive `Σ W_q·o + b_q` per neuron, checked for overflow.
fn integer_drive(layer: &QuantizedLayer, input: &Array2<f64>) -> Result<Array2<f64>> {
    let batch = input.nrows();
    let mut out = Array2::zeros((batch, layer.outputs));
    for b in 0..batch {
        let active: Vec<usize> = (0..layer.inputs).filter(|&i| input[[b, i]] != 0.0).collect();
        for o in 0..layer.outputs {
            let mut acc: i32 = layer.bias[o];
            for &i in &active {
                acc = acc
                    .checked_add(layer.weight(o, i))
                    .ok_or_else(|| Error::Overflow(format!("synaptic drive of neuron {o} overflows")))?;
            }
            out[[b, o]] = acc as f64;
        }
    }
    Ok(out)
}

pub fn quantized_forward_trace(q: &QuantizedSan, train: &SpikeTrain) -> Result<QuantizedTrace> {
    let lif = &q.lif;
    if train.timesteps() != lif.timesteps {
        return Err(Error::Shape(format!("spike train has {} timesteps, model expects {}", train.timesteps(), lif.timesteps)));
    }
    if q.layers.first().is_none_or(|l| l.inputs != train.channels()) {
        return Err(Error::Shape("spike train width does not match the model input".into()));
    }
    let batch = train.batch();
    let mut c: Vec<Array2<f64>> = q.layers.iter().map(|l| Array2::zeros((batch, l.outputs))).collect();
    let mut v = c.clone();
    let mut o = c.clone();
    let mut count = Array2::zeros((batch, q.layers.last().unwrap().outputs));
    let mut spikes = Vec::with_capacity(lif.timesteps);
    for frame in train.frames() {
        let mut step = Vec::with_capacity(q.layers.len());
        for (k, layer) in q.layers.iter().enumerate() {
            let input = if k == 0 { frame } else { &step[k - 1] };
            let drive = integer_drive(layer, input)?;
            c[k] = &c[k] * lif.d_c + &drive;
            let th = layer.v_th as f64;
            let (d_v, ck) = (lif.d_v, &c[k]);
            Zip::from(&mut v[k]).and(&mut o[k]).and(ck).for_each(|v, o, &c| {
                *v = d_v * *v * (1.0 - *o) + c;
                *o = if *v > th { 1.0 } else { 0.0 };
            });
            step.push(o[k].clone());
        }
        count += step.last().unwrap();
        spikes.push(step);
    }
    Ok(QuantizedTrace { spikes, action: count / lif.timesteps as f64 })
}

pub fn quantized_forward(q: &QuantizedSan, train: &SpikeTrain) -> Result<Array2<f64>> {
    Ok(quantized_forward_trace(q, train)?.action)
}

impl crate::eval::Policy for QuantizedSan {
    fn act(&self, observation: &[f64], rng: &mut ChaCha8Rng) -> Result<[f64; 2]> {
        let train = crate::lif::poisson_encode(observation, self.lif.timesteps, rng)?;
        let a = quantized_forward(self, &train)?;
        Ok([a[[0, 0]], a[[0, 1]]])
    }
}

/// Options of the dense-to-spiking conversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvertConfig {
    /// Rescale each layer by the activation statistics of the calibration set
    /// and linearize the output squash around zero.
    pub normalize: bool,
    /// Multipliers tried for every layer, one layer at a time.
    pub grid: Vec<f64>,
    /// Seed of the encoder noise shared by every candidate.
    pub seed: u64,
}

impl Default for ConvertConfig {
    fn default() -> Self {
        ConvertConfig { normalize: true, grid: vec![0.5, 0.625, 0.75, 0.875, 1.0, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0], seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct Conversion {
    pub params: SanParams,
    /// Chosen multiplier per layer.
    pub factors: Vec<f64>,
    /// Mean absolute action error on the calibration set.
    pub error: f64,
    /// Every candidate tried, with its error.
    pub evaluated: Vec<(Vec<f64>, f64)>,
}

/// Mean absolute difference between spiking and reference actions, using
/// the encoder noise of `seed`.
pub fn conversion_error(san: &SanParams, lif: &LifConfig, states: &Array2<f64>, reference: &Array2<f64>, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = poisson_encode_batch(states, lif.timesteps, &mut rng)?;
    let (_, action) = san_forward(san, &train, lif)?;
    Ok((&action - reference).mapv(f64::abs).mean().unwrap_or(0.0))
}

/// Per-layer base weights before the grid multipliers.
fn base_layers(deep: &DeepActorParams, lif: &LifConfig, states: &Array2<f64>, normalize: bool) -> Result<Vec<Dense>> {
    if !normalize {
        return Ok(deep.layers.clone());
    }
    let cache = deep_actor_forward_batch(deep, states)?;
    let depth = deep.layers.len();
    let mut prev_scale = 1.0;
    let mut out = Vec::with_capacity(depth);
    for (k, layer) in deep.layers.iter().enumerate() {
        let mut l = layer.clone();
        if k + 1 < depth {
            let lambda = cache.hidden(k).iter().fold(0.0f64, |m, &x| m.max(x));
            let lambda = if lambda > 0.0 { lambda } else { 1.0 };
            l.weights *= prev_scale / lambda * lif.v_th;
            l.bias *= lif.v_th / lambda;
            prev_scale = lambda;
        } else {
            // sigmoid(z) ≈ 0.5 + z/4 near zero
            l.weights *= prev_scale * 0.25 * lif.v_th;
            l.bias.mapv_inplace(|b| (0.25 * b + 0.5) * lif.v_th);
        }
        out.push(l);
    }
    Ok(out)
}

/// Converts a dense actor into a spiking actor for `lif`, picking each layer's
/// multiplier from `cfg.grid` by coordinate search on the calibration error.
pub fn dnn_snn_convert(deep: &DeepActorParams, lif: &LifConfig, calibration: &Array2<f64>, cfg: &ConvertConfig) -> Result<Conversion> {
    if calibration.nrows() == 0 {
        return Err(Error::EmptyBatch);
    }
    if cfg.grid.is_empty() || cfg.grid.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(Error::Config("conversion grid must hold positive factors".into()));
    }
    lif.validate()?;
    let reference = deep_actor_forward_batch(deep, calibration)?.action().clone();
    let base = base_layers(deep, lif, calibration, cfg.normalize)?;
    let build = |factors: &[f64]| -> Result<SanParams> {
        let layers = base
            .iter()
            .zip(factors)
            .map(|(l, &f)| {
                let mut l = l.clone();
                l.scale(f);
                l
            })
            .collect();
        SanParams::new(layers)
    };
    let mut factors = vec![1.0; base.len()];
    if !cfg.grid.contains(&1.0) {
        factors.fill(cfg.grid[0]);
    }
    let mut best = conversion_error(&build(&factors)?, lif, calibration, &reference, cfg.seed)?;
    let mut evaluated = vec![(factors.clone(), best)];
    for k in 0..base.len() {
        for &g in &cfg.grid {
            let mut trial = factors.clone();
            trial[k] = g;
            if trial == factors {
                continue;
            }
            let err = conversion_error(&build(&trial)?, lif, calibration, &reference, cfg.seed)?;
            evaluated.push((trial.clone(), err));
            if err < best {
                best = err;
                factors = trial;
            }
        }
    }
    Ok(Conversion { params: build(&factors)?, factors, error: best, evaluated })
}
