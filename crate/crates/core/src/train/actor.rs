//! The policy network behind one interface: spiking actor or dense actor,
//! the latter optionally fed Poisson-resampled observations.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{deep_actor_backward, deep_actor_forward_batch, poissonize_batch, DeepActorParams};
use crate::critic::{action_grad_batch, CriticParams};
use crate::error::{Error, Result};
use crate::lif::{poisson_encode_batch, row_vector, san_forward, LifConfig, SanParams};
use crate::nn::{Dense, Optimizer};
use crate::stbp::{san_backward, CurrentAdjoint, PseudoGradConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Actor {
    Spiking {
        params: SanParams,
        lif: LifConfig,
    },
    Deep {
        params: DeepActorParams,
        /// When set, observations are replaced by spike-count averages over
        /// this many timesteps before the forward pass.
        poisson_timesteps: Option<usize>,
    },
}

/// Final-layer weight scale relative to the hidden-layer initialization.
const OUTPUT_INIT_SCALE: f64 = 0.1;
/// Final-layer weight bound of the dense actor.
const DEEP_OUTPUT_INIT: f64 = 3e-3;

impl Actor {
    /// Spiking actor whose output neurons start with a small input
    /// dependence and a bias that holds their steady-state current at the
    /// threshold, so initial actions sit mid-range with live surrogate
    /// gradients.
    pub fn init_spiking<R: Rng + ?Sized>(sizes: &[usize], lif: LifConfig, rng: &mut R) -> Result<Self> {
        let mut params = SanParams::random(sizes, rng)?;
        let out = params.layers.last_mut().expect("at least one layer");
        out.weights *= OUTPUT_INIT_SCALE;
        out.bias.fill(lif.v_th * (1.0 - lif.d_c));
        Ok(Actor::Spiking { params, lif })
    }

    /// Dense actor with a near-zero final layer, so the squash starts near 0.5.
    pub fn init_deep<R: Rng + ?Sized>(sizes: &[usize], poisson_timesteps: Option<usize>, rng: &mut R) -> Result<Self> {
        let mut params = DeepActorParams::random(sizes, rng)?;
        let out = params.layers.last_mut().expect("at least one layer");
        out.weights.mapv_inplace(|_| rng.random_range(-DEEP_OUTPUT_INIT..DEEP_OUTPUT_INIT));
        out.bias.mapv_inplace(|_| rng.random_range(-DEEP_OUTPUT_INIT..DEEP_OUTPUT_INIT));
        Ok(Actor::Deep { params, poisson_timesteps })
    }

    pub fn layers(&self) -> &[Dense] {
        match self {
            Actor::Spiking { params, .. } => &params.layers,
            Actor::Deep { params, .. } => &params.layers,
        }
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        match self {
            Actor::Spiking { params, .. } => &mut params.layers,
            Actor::Deep { params, .. } => &mut params.layers,
        }
    }

    /// Projects every weight into `[-bound, bound]`; biases are left free.
    pub fn clamp_weights(&mut self, bound: f64) {
        for layer in self.layers_mut() {
            layer.weights.mapv_inplace(|w| w.clamp(-bound, bound));
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers().iter().all(Dense::is_finite)
    }

    /// Action in `[0, 1]²` for one normalized observation.
    pub fn act<R: Rng + ?Sized>(&self, observation: &[f64], rng: &mut R) -> Result<[f64; 2]> {
        let a = self.act_batch(&row_vector(observation), rng)?;
        Ok([a[[0, 0]], a[[0, 1]]])
    }

    /// Actions for a `batch × channels` matrix of observations.
    pub fn act_batch<R: Rng + ?Sized>(&self, observations: &Array2<f64>, rng: &mut R) -> Result<Array2<f64>> {
        match self {
            Actor::Spiking { params, lif } => {
                let train = poisson_encode_batch(observations, lif.timesteps, rng)?;
                Ok(san_forward(params, &train, lif)?.1)
            }
            Actor::Deep { params, poisson_timesteps } => {
                let input = match poisson_timesteps {
                    Some(t) => poissonize_batch(observations, *t, rng)?,
                    None => observations.clone(),
                };
                Ok(deep_actor_forward_batch(params, &input)?.action().clone())
            }
        }
    }

    /// One ascent step on the batch mean of `Q(s, μ(s))`, returning that mean
    /// as measured before the step.
    pub fn policy_step<R: Rng + ?Sized>(
        &mut self,
        states: &Array2<f64>,
        critic: &CriticParams,
        surrogate: &PseudoGradConfig,
        adjoint: CurrentAdjoint,
        bounded: bool,
        optimizer: &mut Optimizer,
        rng: &mut R,
    ) -> Result<f64> {
        let n = states.nrows();
        if n == 0 {
            return Err(Error::EmptyBatch);
        }
        let grads = match self {
            Actor::Spiking { params, lif } => {
                let train = poisson_encode_batch(states, lif.timesteps, rng)?;
                let (trace, actions) = san_forward(params, &train, lif)?;
                let (mean_q, grad) = mean_q_and_grad(critic, states, &actions, bounded)?;
                let g = san_backward(&trace, params, &grad, lif, surrogate, adjoint)?;
                (mean_q, g.layers)
            }
            Actor::Deep { params, poisson_timesteps } => {
                let input = match poisson_timesteps {
                    Some(t) => poissonize_batch(states, *t, rng)?,
                    None => states.clone(),
                };
                let cache = deep_actor_forward_batch(params, &input)?;
                let (mean_q, grad) = mean_q_and_grad(critic, states, cache.action(), bounded)?;
                (mean_q, deep_actor_backward(params, &cache, &grad)?)
            }
        };
        let (mean_q, layers) = grads;
        if !layers.iter().all(Dense::is_finite) {
            return Err(Error::NumericFault("non-finite actor gradient".into()));
        }
        optimizer.apply(self.layers_mut(), &layers)?;
        Ok(mean_q)
    }
}

/// Mean `Q` over the batch and `∂(−mean Q)/∂action` per row. With `bounded`,
/// each component is scaled by the distance from the action to the bound it
/// pushes toward, so saturated outputs are not driven further out.
fn mean_q_and_grad(
    critic: &CriticParams,
    states: &Array2<f64>,
    actions: &Array2<f64>,
    bounded: bool,
) -> Result<(f64, Array2<f64>)> {
    let n = states.nrows() as f64;
    let (q, _) = crate::critic::critic_forward_batch(critic, states, actions)?;
    let mut grad = action_grad_batch(critic, states, actions)? / n;
    if bounded {
        ndarray::Zip::from(&mut grad).and(actions).for_each(|g, &a| {
            *g *= if *g < 0.0 { 1.0 - a } else { a };
        });
    }
    Ok((q.sum() / n, grad))
}
