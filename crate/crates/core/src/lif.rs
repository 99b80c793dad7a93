//! Two-state leaky integrate-and-fire dynamics for the spiking actor network:
//! Poisson rate encoding, per-layer current/voltage updates and spike-count
//! action decoding.
//!
//! All state is batched: every vector quantity is stored as a `batch × width`
//! matrix so one forward pass can evaluate many observations at once.

use ndarray::{Array1, Array2, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{check_chain, Dense};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifConfig {
    /// Firing threshold.
    pub v_th: f64,
    /// Current decay factor.
    pub d_c: f64,
    /// Voltage decay factor.
    pub d_v: f64,
    /// Simulation timesteps per inference.
    pub timesteps: usize,
}

impl LifConfig {
    pub fn new(v_th: f64, d_c: f64, d_v: f64, timesteps: usize) -> Result<Self> {
        let cfg = LifConfig { v_th, d_c, d_v, timesteps };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Threshold 0.5, current decay 0.5, voltage decay 0.75.
    pub fn with_timesteps(timesteps: usize) -> Self {
        LifConfig { v_th: 0.5, d_c: 0.5, d_v: 0.75, timesteps }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_th > 0.0 && self.v_th.is_finite()) {
            return Err(Error::Config(format!("v_th must be positive, got {}", self.v_th)));
        }
        for (name, d) in [("d_c", self.d_c), ("d_v", self.d_v)] {
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {d}")));
            }
        }
        if self.timesteps == 0 {
            return Err(Error::Config("timesteps must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for LifConfig {
    fn default() -> Self {
        LifConfig::with_timesteps(5)
    }
}

/// Weights and biases of the spiking actor network, input layer first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanParams {
    pub layers: Vec<Dense>,
}

impl SanParams {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        check_chain(&layers)?;
        if !layers.iter().all(Dense::is_finite) {
            return Err(Error::NumericFault("non-finite network parameter".into()));
        }
        Ok(SanParams { layers })
    }

    /// `sizes` lists widths from the input channels to the output layer.
    pub fn random<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        check_sizes(sizes)?;
        let layers = sizes.windows(2).map(|w| Dense::uniform(w[0], w[1], rng)).collect();
        Ok(SanParams { layers })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        check_sizes(sizes)?;
        let layers = sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(SanParams { layers })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].inputs()];
        sizes.extend(self.layers.iter().map(Dense::outputs));
        sizes
    }

    pub fn input_channels(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, Dense::outputs)
    }

    /// Encodes one observation, runs the network and returns the rate-decoded action.
    pub fn act<R: Rng + ?Sized>(&self, observation: &[f64], cfg: &LifConfig, rng: &mut R) -> Result<Vec<f64>> {
        let train = poisson_encode(observation, cfg.timesteps, rng)?;
        let (_, action) = san_forward(self, &train, cfg)?;
        Ok(action.row(0).to_vec())
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::Shape(format!("invalid layer sizes {sizes:?}")));
    }
    Ok(())
}

/// State of one layer at one timestep. `v` holds the voltage compared against
/// the threshold at this step; the reset of firing neurons is applied through
/// the `(1 − o)` gate when the next step decays the voltage.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub c: Array2<f64>,
    pub v: Array2<f64>,
    pub o: Array2<f64>,
}

impl LayerState {
    pub fn rest(batch: usize, width: usize) -> Self {
        LayerState {
            c: Array2::zeros((batch, width)),
            v: Array2::zeros((batch, width)),
            o: Array2::zeros((batch, width)),
        }
    }

    /// Voltage after the reset of neurons that fired at this step.
    pub fn effective_voltage(&self) -> Array2<f64> {
        &self.v * &self.o.mapv(|o| 1.0 - o)
    }
}

/// Binary input spikes: one `batch × channels` frame per timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrain {
    frames: Vec<Array2<f64>>,
}

impl SpikeTrain {
    pub fn new(frames: Vec<Array2<f64>>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::Shape("spike train has no timesteps".into()));
        };
        let dim = first.dim();
        for f in &frames {
            if f.dim() != dim {
                return Err(Error::Shape("spike frames differ in shape".into()));
            }
            if f.iter().any(|&x| x != 0.0 && x != 1.0) {
                return Err(Error::InvalidInput("spike entries must be 0 or 1".into()));
            }
        }
        Ok(SpikeTrain { frames })
    }

    pub fn timesteps(&self) -> usize {
        self.frames.len()
    }

    pub fn batch(&self) -> usize {
        self.frames[0].nrows()
    }

    pub fn channels(&self) -> usize {
        self.frames[0].ncols()
    }

    pub fn frames(&self) -> &[Array2<f64>] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &Array2<f64> {
        &self.frames[t]
    }
}

/// Bernoulli rate encoding of a single observation with values in `[0, 1]`.
pub fn poisson_encode<R: Rng + ?Sized>(state: &[f64], timesteps: usize, rng: &mut R) -> Result<SpikeTrain> {
    let states = Array2::from_shape_vec((1, state.len()), state.to_vec())
        .map_err(|e| Error::Shape(e.to_string()))?;
    poisson_encode_batch(&states, timesteps, rng)
}

/// Bernoulli rate encoding of a `batch × channels` matrix. Draws are taken in
/// timestep-major, then row-major order.
pub fn poisson_encode_batch<R: Rng + ?Sized>(
    states: &Array2<f64>,
    timesteps: usize,
    rng: &mut R,
) -> Result<SpikeTrain> {
    if timesteps == 0 {
        return Err(Error::Config("timesteps must be at least 1".into()));
    }
    if let Some(bad) = states.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidInput(format!("encoder channel value {bad} outside [0, 1]")));
    }
    let frames = (0..timesteps)
        .map(|_| states.mapv(|p| if rng.random::<f64>() < p { 1.0 } else { 0.0 }))
        .collect();
    Ok(SpikeTrain { frames })
}

/// One timestep of one layer:
/// `c(t) = d_c·c(t−1) + W·o_in(t) + b`,
/// `v(t) = d_v·v(t−1)·(1 − o(t−1)) + c(t)`,
/// `o(t) = [v(t) > v_th]`.
pub fn lif_layer_step(
    prev: &LayerState,
    input_spikes: &Array2<f64>,
    layer: &Dense,
    cfg: &LifConfig,
) -> Result<LayerState> {
    if input_spikes.ncols() != layer.inputs() || prev.c.dim() != (input_spikes.nrows(), layer.outputs()) {
        return Err(Error::Shape(format!(
            "layer {}→{} cannot take input {:?} with state {:?}",
            layer.inputs(),
            layer.outputs(),
            input_spikes.dim(),
            prev.c.dim()
        )));
    }
    let mut c = layer.affine(input_spikes);
    c.scaled_add(cfg.d_c, &prev.c);
    let mut v = Array2::zeros(c.raw_dim());
    let mut o = Array2::zeros(c.raw_dim());
    let (d_v, v_th) = (cfg.d_v, cfg.v_th);
    let mut finite = true;
    Zip::from(&mut v)
        .and(&mut o)
        .and(&c)
        .and(&prev.v)
        .and(&prev.o)
        .for_each(|v, o, &c, &pv, &po| {
            *v = d_v * pv * (1.0 - po) + c;
            finite &= v.is_finite();
            *o = if *v > v_th { 1.0 } else { 0.0 };
        });
    if !finite {
        return Err(Error::NumericFault("non-finite current or voltage".into()));
    }
    Ok(LayerState { c, v, o })
}

/// Every layer state of a forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Input spike frames, one per timestep.
    pub inputs: Vec<Array2<f64>>,
    /// `states[t][k]`: state of layer `k` at timestep `t` (both zero-based).
    pub states: Vec<Vec<LayerState>>,
    /// Output spike count after the final timestep.
    pub spike_count: Array2<f64>,
}

impl ForwardTrace {
    pub fn timesteps(&self) -> usize {
        self.states.len()
    }

    pub fn batch(&self) -> usize {
        self.spike_count.nrows()
    }

    /// Spike matrix of layer `k` at step `t`, where `k == 0` denotes the input.
    pub fn spikes(&self, t: usize, k: usize) -> &Array2<f64> {
        if k == 0 {
            &self.inputs[t]
        } else {
            &self.states[t][k - 1].o
        }
    }
}

/// Runs the network for `cfg.timesteps` steps and returns the trace together
/// with `Action = SpikeCount(T) / T` (`batch × outputs`).
pub fn san_forward(params: &SanParams, train: &SpikeTrain, cfg: &LifConfig) -> Result<(ForwardTrace, Array2<f64>)> {
    if train.timesteps() != cfg.timesteps {
        return Err(Error::Shape(format!(
            "spike train has {} timesteps, config expects {}",
            train.timesteps(),
            cfg.timesteps
        )));
    }
    if train.channels() != params.input_channels() {
        return Err(Error::Shape(format!(
            "spike train has {} channels, network expects {}",
            train.channels(),
            params.input_channels()
        )));
    }
    let batch = train.batch();
    let rest: Vec<LayerState> = params.layers.iter().map(|l| LayerState::rest(batch, l.outputs())).collect();
    let mut states: Vec<Vec<LayerState>> = Vec::with_capacity(cfg.timesteps);
    let mut spike_count = Array2::zeros((batch, params.output_width()));
    for frame in train.frames() {
        let prev = states.last().unwrap_or(&rest);
        let mut step: Vec<LayerState> = Vec::with_capacity(params.layers.len());
        for (k, layer) in params.layers.iter().enumerate() {
            let input: &Array2<f64> = if k == 0 { frame } else { &step[k - 1].o };
            let next = lif_layer_step(&prev[k], input, layer, cfg)?;
            step.push(next);
        }
        spike_count += &step.last().unwrap().o;
        states.push(step);
    }
    let action = &spike_count / cfg.timesteps as f64;
    let trace = ForwardTrace { inputs: train.frames().to_vec(), states, spike_count };
    Ok((trace, action))
}

/// Affine map of rate-decoded actions to wheel speeds.
pub fn decode_action(action: [f64; 2], v_min: f64, v_max: f64) -> Result<(f64, f64)> {
    if v_min >= v_max {
        return Err(Error::Config(format!("v_min {v_min} must be below v_max {v_max}")));
    }
    if action.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::InvalidInput(format!("action {action:?} outside [0, 1]")));
    }
    let span = v_max - v_min;
    Ok((action[0] * span + v_min, action[1] * span + v_min))
}

/// Single-row helper for tests and diagnostics.
pub fn row_vector(values: &[f64]) -> Array2<f64> {
    Array1::from(values.to_vec()).insert_axis(ndarray::Axis(0))
}
