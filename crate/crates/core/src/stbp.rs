//! Spatiotemporal backpropagation through the two-state LIF network.
//!
//! The spike nonlinearity is differentiated through a rectangular window
//! around the threshold. The reset gate `(1 − o)` is treated as a constant.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lif::{ForwardTrace, LifConfig, SanParams};
use crate::nn::Dense;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoGradConfig {
    /// Gradient amplifier.
    pub a1: f64,
    /// Half-width of the window around the threshold.
    pub a2: f64,
}

impl Default for PseudoGradConfig {
    fn default() -> Self {
        PseudoGradConfig { a1: 1.0, a2: 0.5 }
    }
}

impl PseudoGradConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a1 > 0.0 && self.a2 > 0.0) {
            return Err(Error::Config(format!("pseudo-gradient a1={} a2={} must be positive", self.a1, self.a2)));
        }
        Ok(())
    }
}

/// Which voltage adjoint feeds the current adjoint at `t < T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurrentAdjoint {
    /// `∇c(t) = ∇v(t) + d_c·∇c(t+1)`: exact gradient of the unrolled graph.
    #[default]
    SameStep,
    /// `∇c(t) = ∇v(t+1) + d_c·∇c(t+1)`: the published recurrence, kept for comparison.
    NextVoltage,
}

/// Rectangular surrogate derivative: `a1` where `|v − v_th| < a2`, else 0.
pub fn pseudo_grad(v: &Array2<f64>, cfg: &PseudoGradConfig, v_th: f64) -> Array2<f64> {
    v.mapv(|v| surrogate(v, cfg, v_th))
}

#[inline]
fn surrogate(v: f64, cfg: &PseudoGradConfig, v_th: f64) -> f64 {
    if (v - v_th).abs() < cfg.a2 {
        cfg.a1
    } else {
        0.0
    }
}

/// Parameter gradients, shaped like [`SanParams::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct SanGradients {
    pub layers: Vec<Dense>,
}

impl SanGradients {
    pub fn zeros_like(params: &SanParams) -> Self {
        SanGradients { layers: params.layers.iter().map(Dense::zeros_like).collect() }
    }

    pub fn scale(&mut self, factor: f64) {
        self.layers.iter_mut().for_each(|l| l.scale(factor));
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Dense::is_finite)
    }
}

/// Adjoints of the loss w.r.t. every state variable; indexed `[t][k]`.
#[derive(Debug, Clone)]
pub struct TemporalAdjoint {
    pub grad_o: Vec<Vec<Array2<f64>>>,
    pub grad_v: Vec<Vec<Array2<f64>>>,
    pub grad_c: Vec<Vec<Array2<f64>>>,
}

/// Gradients of the loss w.r.t. the network parameters, summed over the batch.
/// `grad_action` is `batch × outputs` and holds ∂L/∂Action for every row.
pub fn san_backward(
    trace: &ForwardTrace,
    params: &SanParams,
    grad_action: &Array2<f64>,
    cfg: &LifConfig,
    pg: &PseudoGradConfig,
    variant: CurrentAdjoint,
) -> Result<SanGradients> {
    backward_impl(trace, params, grad_action, cfg, pg, variant, false).map(|(g, _)| g)
}

/// As [`san_backward`], additionally returning every intermediate adjoint.
pub fn san_backward_with_adjoint(
    trace: &ForwardTrace,
    params: &SanParams,
    grad_action: &Array2<f64>,
    cfg: &LifConfig,
    pg: &PseudoGradConfig,
    variant: CurrentAdjoint,
) -> Result<(SanGradients, TemporalAdjoint)> {
    backward_impl(trace, params, grad_action, cfg, pg, variant, true).map(|(g, a)| (g, a.unwrap()))
}

fn check_trace(trace: &ForwardTrace, params: &SanParams, grad_action: &Array2<f64>, cfg: &LifConfig) -> Result<()> {
    let depth = params.layers.len();
    if trace.timesteps() != cfg.timesteps || trace.inputs.len() != cfg.timesteps {
        return Err(Error::Shape(format!(
            "trace spans {} timesteps, config expects {}",
            trace.timesteps(),
            cfg.timesteps
        )));
    }
    let batch = trace.batch();
    for step in &trace.states {
        if step.len() != depth {
            return Err(Error::Shape(format!("trace has {} layers, network has {depth}", step.len())));
        }
        for (s, l) in step.iter().zip(&params.layers) {
            if s.v.dim() != (batch, l.outputs()) {
                return Err(Error::Shape("trace state does not match layer width".into()));
            }
        }
    }
    if trace.inputs.iter().any(|x| x.dim() != (batch, params.input_channels())) {
        return Err(Error::Shape("trace inputs do not match network input width".into()));
    }
    if grad_action.dim() != (batch, params.output_width()) {
        return Err(Error::Shape(format!(
            "action gradient {:?} does not match batch {batch} × outputs {}",
            grad_action.dim(),
            params.output_width()
        )));
    }
    Ok(())
}

fn backward_impl(
    trace: &ForwardTrace,
    params: &SanParams,
    grad_action: &Array2<f64>,
    cfg: &LifConfig,
    pg: &PseudoGradConfig,
    variant: CurrentAdjoint,
    keep: bool,
) -> Result<(SanGradients, Option<TemporalAdjoint>)> {
    check_trace(trace, params, grad_action, cfg)?;
    let horizon = cfg.timesteps;
    let depth = params.layers.len();
    let grad_count = grad_action / horizon as f64;

    let mut grads = SanGradients::zeros_like(params);
    let mut next_v: Vec<Option<Array2<f64>>> = vec![None; depth];
    let mut next_c: Vec<Option<Array2<f64>>> = vec![None; depth];
    let mut adjoint = keep.then(|| TemporalAdjoint {
        grad_o: vec![Vec::new(); horizon],
        grad_v: vec![Vec::new(); horizon],
        grad_c: vec![Vec::new(); horizon],
    });

    for t in (0..horizon).rev() {
        // every output spike contributes 1/T to the action
        let mut grad_o = grad_count.clone();
        let mut layer_o = Vec::new();
        let mut layer_v = Vec::new();
        let mut layer_c = Vec::new();
        for k in (0..depth).rev() {
            let state = &trace.states[t][k];
            let mut grad_v = Array2::zeros(state.v.dim());
            Zip::from(&mut grad_v)
                .and(&state.v)
                .and(&grad_o)
                .for_each(|g, &v, &go| *g = surrogate(v, pg, cfg.v_th) * go);
            if let Some(nv) = &next_v[k] {
                Zip::from(&mut grad_v)
                    .and(&state.o)
                    .and(nv)
                    .for_each(|g, &o, &nv| *g += cfg.d_v * (1.0 - o) * nv);
            }
            let grad_c = match (variant, &next_v[k], &next_c[k]) {
                (_, None, _) | (_, _, None) => grad_v.clone(),
                (CurrentAdjoint::SameStep, _, Some(nc)) => {
                    let mut gc = grad_v.clone();
                    gc.scaled_add(cfg.d_c, nc);
                    gc
                }
                (CurrentAdjoint::NextVoltage, Some(nv), Some(nc)) => {
                    let mut gc = nv.clone();
                    gc.scaled_add(cfg.d_c, nc);
                    gc
                }
            };
            let layer = &params.layers[k];
            let presyn = trace.spikes(t, k);
            grads.layers[k].weights += &grad_c.t().dot(presyn);
            grads.layers[k].bias += &grad_c.sum_axis(ndarray::Axis(0));
            let below = (k > 0 || keep).then(|| grad_c.dot(&layer.weights));
            if keep {
                layer_o.push(std::mem::take(&mut grad_o));
                layer_v.push(grad_v.clone());
                layer_c.push(grad_c.clone());
            }
            if let Some(b) = below {
                grad_o = b;
            }
            next_v[k] = Some(grad_v);
            next_c[k] = Some(grad_c);
        }
        if let Some(adj) = adjoint.as_mut() {
            layer_o.reverse();
            layer_v.reverse();
            layer_c.reverse();
            adj.grad_o[t] = layer_o;
            adj.grad_v[t] = layer_v;
            adj.grad_c[t] = layer_c;
        }
    }
    if !grads.is_finite() {
        return Err(Error::NumericFault("non-finite actor gradient".into()));
    }
    Ok((grads, adjoint))
}
