//! Deep critic `Q(s, a)`: a ReLU perceptron with the action concatenated to
//! the input of one chosen layer, plus full backpropagation and the TD step.

use ndarray::{concatenate, s, Array1, Array2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lif::row_vector;
use crate::nn::{Dense, Optimizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticParams {
    pub layers: Vec<Dense>,
    /// Index of the layer whose input is `[hidden ‖ action]`. Zero feeds the
    /// action alongside the state.
    pub action_layer: usize,
    pub state_dim: usize,
    pub action_dim: usize,
}

impl CriticParams {
    pub fn new(layers: Vec<Dense>, action_layer: usize, state_dim: usize, action_dim: usize) -> Result<Self> {
        let p = CriticParams { layers, action_layer, state_dim, action_dim };
        p.validate()?;
        Ok(p)
    }

    /// `hidden` lists the hidden widths; the output is a single linear unit.
    pub fn random<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        action_layer: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let widths = Self::layer_inputs(state_dim, action_dim, hidden, action_layer)?;
        let layers = widths.into_iter().map(|(i, o)| Dense::uniform(i, o, rng)).collect();
        Self::new(layers, action_layer, state_dim, action_dim)
    }

    pub fn zeros(state_dim: usize, action_dim: usize, hidden: &[usize], action_layer: usize) -> Result<Self> {
        let widths = Self::layer_inputs(state_dim, action_dim, hidden, action_layer)?;
        let layers = widths.into_iter().map(|(i, o)| Dense::zeros(i, o)).collect();
        Self::new(layers, action_layer, state_dim, action_dim)
    }

    fn layer_inputs(state_dim: usize, action_dim: usize, hidden: &[usize], action_layer: usize) -> Result<Vec<(usize, usize)>> {
        if action_layer > hidden.len() {
            return Err(Error::Config(format!(
                "action layer {action_layer} beyond the {} critic layers",
                hidden.len() + 1
            )));
        }
        let mut outs = hidden.to_vec();
        outs.push(1);
        let mut prev = state_dim;
        Ok(outs
            .into_iter()
            .enumerate()
            .map(|(k, o)| {
                let i = if k == action_layer { prev + action_dim } else { prev };
                prev = o;
                (i, o)
            })
            .collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() || self.action_layer >= self.layers.len() {
            return Err(Error::Shape("action layer outside the critic".into()));
        }
        let mut prev = self.state_dim;
        for (k, l) in self.layers.iter().enumerate() {
            let expect = if k == self.action_layer { prev + self.action_dim } else { prev };
            if l.inputs() != expect || l.bias.len() != l.outputs() {
                return Err(Error::Shape(format!("critic layer {k} expects {expect} inputs, has {}", l.inputs())));
            }
            prev = l.outputs();
        }
        if prev != 1 {
            return Err(Error::Shape("critic must end in a single output".into()));
        }
        Ok(())
    }
}

/// Activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct CriticCache {
    /// Input of every layer, after action concatenation.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation output of every layer.
    pre: Vec<Array2<f64>>,
}

pub fn critic_forward(params: &CriticParams, state: &[f64], action: &[f64]) -> Result<f64> {
    let (q, _) = critic_forward_batch(params, &row_vector(state), &row_vector(action))?;
    Ok(q[0])
}

pub fn critic_forward_batch(params: &CriticParams, states: &Array2<f64>, actions: &Array2<f64>) -> Result<(Array1<f64>, CriticCache)> {
    if states.ncols() != params.state_dim || actions.ncols() != params.action_dim || states.nrows() != actions.nrows() {
        return Err(Error::Shape(format!(
            "critic expects state {} / action {}, got {:?} / {:?}",
            params.state_dim,
            params.action_dim,
            states.dim(),
            actions.dim()
        )));
    }
    let last = params.layers.len() - 1;
    let mut inputs = Vec::with_capacity(params.layers.len());
    let mut pre = Vec::with_capacity(params.layers.len());
    let mut h = states.clone();
    for (k, layer) in params.layers.iter().enumerate() {
        if k == params.action_layer {
            h = concatenate![Axis(1), h, *actions];
        }
        let z = layer.affine(&h);
        inputs.push(h);
        h = if k == last { z.clone() } else { z.mapv(|x| x.max(0.0)) };
        pre.push(z);
    }
    let q = h.column(0).to_owned();
    Ok((q, CriticCache { inputs, pre }))
}

#[derive(Debug, Clone)]
pub struct CriticGradients {
    pub layers: Vec<Dense>,
    pub state: Array2<f64>,
    pub action: Array2<f64>,
}

/// Backpropagates `upstream[b] = ∂L/∂Q_b` through the cached forward pass.
pub fn critic_backward_batch(params: &CriticParams, cache: &CriticCache, upstream: &Array1<f64>) -> CriticGradients {
    let batch = upstream.len();
    let mut layers: Vec<Dense> = params.layers.iter().map(Dense::zeros_like).collect();
    let mut grad = upstream.clone().insert_axis(Axis(1));
    let mut grad_action = Array2::zeros((batch, params.action_dim));
    let mut grad_state = Array2::zeros((batch, params.state_dim));
    for k in (0..params.layers.len()).rev() {
        layers[k].weights = grad.t().dot(&cache.inputs[k]);
        layers[k].bias = grad.sum_axis(Axis(0));
        let mut grad_in = grad.dot(&params.layers[k].weights);
        if k == params.action_layer {
            let split = grad_in.ncols() - params.action_dim;
            grad_action = grad_in.slice(s![.., split..]).to_owned();
            grad_in = grad_in.slice(s![.., ..split]).to_owned();
        }
        if k == 0 {
            grad_state = grad_in;
        } else {
            Zip::from(&mut grad_in)
                .and(&cache.pre[k - 1])
                .for_each(|g, &z| if z <= 0.0 { *g = 0.0 });
            grad = grad_in;
        }
    }
    CriticGradients { layers, state: grad_state, action: grad_action }
}

/// Gradients of `upstream · Q(state, action)` w.r.t. parameters, state and action.
pub fn critic_backward(
    params: &CriticParams,
    state: &[f64],
    action: &[f64],
    upstream: f64,
) -> Result<(Vec<Dense>, Vec<f64>, Vec<f64>)> {
    let (_, cache) = critic_forward_batch(params, &row_vector(state), &row_vector(action))?;
    let g = critic_backward_batch(params, &cache, &Array1::from(vec![upstream]));
    Ok((g.layers, g.state.row(0).to_vec(), g.action.row(0).to_vec()))
}

/// `∂(−Q)/∂action` for the actor loss `L = −Q`.
pub fn action_grad(params: &CriticParams, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
    critic_backward(params, state, action, -1.0).map(|(_, _, a)| a)
}

/// Batched `∂(−Q_b)/∂action_b`.
pub fn action_grad_batch(params: &CriticParams, states: &Array2<f64>, actions: &Array2<f64>) -> Result<Array2<f64>> {
    let (q, cache) = critic_forward_batch(params, states, actions)?;
    Ok(critic_backward_batch(params, &cache, &Array1::from_elem(q.len(), -1.0)).action)
}

/// Bootstrapped regression target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdTarget {
    pub y: f64,
    pub gamma: f64,
}

impl TdTarget {
    /// `r` for terminal transitions, `r + γ·Q′` otherwise.
    pub fn new(reward: f64, next_q: f64, gamma: f64, terminal: bool) -> Self {
        let y = if terminal { reward } else { reward + gamma * next_q };
        TdTarget { y, gamma }
    }
}

/// A batch of transitions laid out as matrices. `next_actions` come from the
/// target actor.
#[derive(Debug, Clone)]
pub struct TdBatch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub next_actions: Array2<f64>,
    pub terminal: Vec<bool>,
}

impl TdBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Mean squared TD error over the batch and its parameter gradients.
pub fn td_loss_and_grad(params: &CriticParams, target: &CriticParams, batch: &TdBatch, gamma: f64) -> Result<(f64, Vec<Dense>)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = batch.len();
    let (next_q, _) = critic_forward_batch(target, &batch.next_states, &batch.next_actions)?;
    let (q, cache) = critic_forward_batch(params, &batch.states, &batch.actions)?;
    let mut upstream = Array1::zeros(n);
    let mut loss = 0.0;
    for b in 0..n {
        let y = TdTarget::new(batch.rewards[b], next_q[b], gamma, batch.terminal[b]).y;
        let err = q[b] - y;
        loss += err * err;
        upstream[b] = 2.0 * err / n as f64;
    }
    loss /= n as f64;
    if !loss.is_finite() {
        return Err(Error::NumericFault("non-finite critic loss".into()));
    }
    Ok((loss, critic_backward_batch(params, &cache, &upstream).layers))
}

/// One optimizer step on the mean squared TD error. Returns the loss measured
/// before the step.
pub fn critic_train_step(
    params: &mut CriticParams,
    target: &CriticParams,
    batch: &TdBatch,
    gamma: f64,
    optimizer: &mut Optimizer,
) -> Result<f64> {
    let (loss, grads) = td_loss_and_grad(params, target, batch, gamma)?;
    optimizer.apply(&mut params.layers, &grads)?;
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::OptimizerConfig;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear_critic(w: &[f64]) -> CriticParams {
        let layer = Dense { weights: Array2::from_shape_vec((1, w.len()), w.to_vec()).unwrap(), bias: array![0.0] };
        CriticParams::new(vec![layer], 0, w.len() - 2, 2).unwrap()
    }

    #[test]
    fn zero_critic_is_zero() {
        let c = CriticParams::zeros(3, 2, &[8, 8], 1).unwrap();
        assert_eq!(critic_forward(&c, &[0.3, 0.2, 0.9], &[0.5, 0.1]).unwrap(), 0.0);
    }

    #[test]
    fn sum_critic() {
        let c = linear_critic(&[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(critic_forward(&c, &[1.0, 1.0], &[0.5, 0.5]).unwrap(), 3.0);
    }

    #[test]
    fn linear_action_gradient() {
        let c = linear_critic(&[0.2, -0.4, 1.5, -2.5]);
        assert_eq!(action_grad(&c, &[0.1, 0.9], &[0.3, 0.6]).unwrap(), vec![-1.5, 2.5]);
        let (_, _, ga) = critic_backward(&c, &[0.1, 0.9], &[0.3, 0.6], 2.0).unwrap();
        assert_eq!(ga, vec![3.0, -5.0]);
    }

    #[test]
    fn constant_critic_has_zero_action_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut c = CriticParams::random(4, 2, &[6, 5], 1, &mut rng).unwrap();
        c.layers[2].weights.fill(0.0);
        assert_eq!(action_grad(&c, &[0.1, 0.2, 0.3, 0.4], &[0.5, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn zero_upstream_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = CriticParams::random(4, 2, &[6, 5], 1, &mut rng).unwrap();
        let (g, gs, ga) = critic_backward(&c, &[0.1, 0.2, 0.3, 0.4], &[0.5, 0.5], 0.0).unwrap();
        assert!(g.iter().all(|l| l.weights.iter().all(|&x| x == 0.0)));
        assert!(gs.iter().chain(ga.iter()).all(|&x| x == 0.0));
    }

    #[test]
    fn shape_mismatch() {
        let c = CriticParams::zeros(3, 2, &[4], 1).unwrap();
        assert!(matches!(critic_forward(&c, &[0.0; 4], &[0.0; 2]), Err(Error::Shape(_))));
        assert!(CriticParams::zeros(3, 2, &[4], 5).is_err());
    }

    fn single_batch(reward: f64, terminal: bool) -> TdBatch {
        TdBatch {
            states: array![[0.2, 0.4]],
            actions: array![[0.5, 0.5]],
            rewards: array![reward],
            next_states: array![[0.3, 0.4]],
            next_actions: array![[0.1, 0.9]],
            terminal: vec![terminal],
        }
    }

    #[test]
    fn terminal_goal_loss() {
        let mut c = CriticParams::zeros(2, 2, &[4], 1).unwrap();
        let target = c.clone();
        let mut opt = Optimizer::new(OptimizerConfig::sgd(1e-3), &c.layers);
        let loss = critic_train_step(&mut c, &target, &single_batch(30.0, true), 0.99, &mut opt).unwrap();
        assert_eq!(loss, 900.0);
    }

    #[test]
    fn converged_point_is_stationary() {
        // Q ≡ 2 everywhere; non-terminal target 2 = r + γ·2 with γ = 0.5, r = 1
        let mut c = CriticParams::zeros(2, 2, &[3], 1).unwrap();
        c.layers[1].bias[0] = 2.0;
        let before = c.clone();
        let mut opt = Optimizer::new(OptimizerConfig::sgd(0.1), &c.layers);
        let loss = critic_train_step(&mut c, &before, &single_batch(1.0, false), 0.5, &mut opt).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(c, before);
    }

    #[test]
    fn terminal_masking() {
        assert_eq!(TdTarget::new(-20.0, 100.0, 0.99, true).y, -20.0);
        assert_eq!(TdTarget::new(1.0, 2.0, 0.5, false).y, 2.0);
    }

    #[test]
    fn empty_batch_rejected() {
        let mut c = CriticParams::zeros(2, 2, &[3], 1).unwrap();
        let target = c.clone();
        let mut opt = Optimizer::new(OptimizerConfig::sgd(0.1), &c.layers);
        let empty = TdBatch {
            states: Array2::zeros((0, 2)),
            actions: Array2::zeros((0, 2)),
            rewards: Array1::zeros(0),
            next_states: Array2::zeros((0, 2)),
            next_actions: Array2::zeros((0, 2)),
            terminal: vec![],
        };
        assert!(matches!(critic_train_step(&mut c, &target, &empty, 0.9, &mut opt), Err(Error::EmptyBatch)));
    }

    #[test]
    fn loss_decreases_on_fixed_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut c = CriticParams::random(2, 2, &[16, 16], 1, &mut rng).unwrap();
        let target = c.clone();
        let batch = TdBatch {
            states: array![[0.2, 0.4], [0.9, 0.1], [0.5, 0.5]],
            actions: array![[0.5, 0.5], [0.0, 1.0], [0.2, 0.7]],
            rewards: array![1.0, -2.0, 0.5],
            next_states: array![[0.3, 0.4], [0.8, 0.1], [0.5, 0.6]],
            next_actions: array![[0.1, 0.9], [0.4, 0.4], [0.3, 0.3]],
            terminal: vec![false, true, false],
        };
        let mut opt = Optimizer::new(OptimizerConfig::sgd(1e-3), &c.layers);
        let mut last = f64::INFINITY;
        for _ in 0..50 {
            let loss = critic_train_step(&mut c, &target, &batch, 0.99, &mut opt).unwrap();
            assert!(loss < last);
            last = loss;
        }
    }
}
