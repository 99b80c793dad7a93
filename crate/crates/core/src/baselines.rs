//! Non-spiking actors used as baselines: a dense ReLU network with sigmoid
//! outputs, optionally fed observations passed through the Poisson encoder.

use ndarray::{Array2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lif::row_vector;
use crate::nn::{check_chain, sigmoid, Dense};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepActorParams {
    pub layers: Vec<Dense>,
}

impl DeepActorParams {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        check_chain(&layers)?;
        Ok(DeepActorParams { layers })
    }

    pub fn random<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        Self::new(sizes.windows(2).map(|w| Dense::uniform(w[0], w[1], rng)).collect())
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        Self::new(sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect())
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs()];
        s.extend(self.layers.iter().map(Dense::outputs));
        s
    }
}

/// Activations of a batched forward pass; `post[k]` is the output of layer `k`.
#[derive(Debug, Clone)]
pub struct DeepActorCache {
    input: Array2<f64>,
    post: Vec<Array2<f64>>,
}

impl DeepActorCache {
    pub fn action(&self) -> &Array2<f64> {
        self.post.last().unwrap()
    }

    /// Output of hidden layer `k` after the ReLU.
    pub fn hidden(&self, k: usize) -> &Array2<f64> {
        &self.post[k]
    }
}

pub fn deep_actor_forward(params: &DeepActorParams, observation: &[f64]) -> Result<Vec<f64>> {
    let cache = deep_actor_forward_batch(params, &row_vector(observation))?;
    Ok(cache.action().row(0).to_vec())
}

pub fn deep_actor_forward_batch(params: &DeepActorParams, observations: &Array2<f64>) -> Result<DeepActorCache> {
    if observations.ncols() != params.layers[0].inputs() {
        return Err(Error::Shape(format!(
            "deep actor expects {} inputs, got {}",
            params.layers[0].inputs(),
            observations.ncols()
        )));
    }
    let last = params.layers.len() - 1;
    let mut post = Vec::with_capacity(params.layers.len());
    let mut h = observations.clone();
    for (k, layer) in params.layers.iter().enumerate() {
        let mut z = layer.affine(&h);
        if k == last {
            z.mapv_inplace(sigmoid);
        } else {
            z.mapv_inplace(|x| x.max(0.0));
        }
        post.push(z.clone());
        h = z;
    }
    Ok(DeepActorCache { input: observations.clone(), post })
}

/// Parameter gradients summed over the batch, given `∂L/∂action` per row.
pub fn deep_actor_backward(params: &DeepActorParams, cache: &DeepActorCache, grad_action: &Array2<f64>) -> Result<Vec<Dense>> {
    if grad_action.dim() != cache.action().dim() {
        return Err(Error::Shape("action gradient does not match forward batch".into()));
    }
    let depth = params.layers.len();
    let mut grads: Vec<Dense> = params.layers.iter().map(Dense::zeros_like).collect();
    let mut grad = grad_action.clone();
    Zip::from(&mut grad).and(cache.action()).for_each(|g, &y| *g *= y * (1.0 - y));
    for k in (0..depth).rev() {
        let input = if k == 0 { &cache.input } else { &cache.post[k - 1] };
        grads[k].weights = grad.t().dot(input);
        grads[k].bias = grad.sum_axis(Axis(0));
        if k > 0 {
            let mut below = grad.dot(&params.layers[k].weights);
            Zip::from(&mut below).and(&cache.post[k - 1]).for_each(|g, &h| if h <= 0.0 { *g = 0.0 });
            grad = below;
        }
    }
    Ok(grads)
}

/// Replaces each channel by the mean of `timesteps` Bernoulli(p) draws, the
/// same noise the spiking encoder injects.
pub fn poissonize_observation<R: Rng + ?Sized>(observation: &[f64], timesteps: usize, rng: &mut R) -> Result<Vec<f64>> {
    if timesteps == 0 {
        return Err(Error::Config("timesteps must be at least 1".into()));
    }
    if let Some(bad) = observation.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidInput(format!("channel value {bad} outside [0, 1]")));
    }
    let mut counts = vec![0u32; observation.len()];
    for _ in 0..timesteps {
        for (n, &p) in counts.iter_mut().zip(observation) {
            if rng.random::<f64>() < p {
                *n += 1;
            }
        }
    }
    Ok(counts.into_iter().map(|n| n as f64 / timesteps as f64).collect())
}

pub fn poissonize_batch<R: Rng + ?Sized>(observations: &Array2<f64>, timesteps: usize, rng: &mut R) -> Result<Array2<f64>> {
    let mut out = observations.clone();
    for mut row in out.rows_mut() {
        let noisy = poissonize_observation(row.as_slice().unwrap(), timesteps, rng)?;
        row.assign(&ndarray::Array1::from(noisy));
    }
    Ok(out)
}
