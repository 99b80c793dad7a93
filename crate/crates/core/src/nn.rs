//! Dense layers and the optimizers shared by the actor and critic networks.

use ndarray::{Array1, Array2, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fully connected layer. `weights` is `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "DenseRepr", try_from = "DenseRepr")]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Serialize, Deserialize)]
struct DenseRepr {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl From<Dense> for DenseRepr {
    fn from(d: Dense) -> Self {
        DenseRepr {
            weights: d.weights.outer_iter().map(|r| r.to_vec()).collect(),
            bias: d.bias.to_vec(),
        }
    }
}

impl TryFrom<DenseRepr> for Dense {
    type Error = Error;

    fn try_from(r: DenseRepr) -> Result<Self> {
        let rows = r.weights.len();
        let cols = r.weights.first().map_or(0, Vec::len);
        if r.weights.iter().any(|row| row.len() != cols) {
            return Err(Error::Format("ragged weight matrix".into()));
        }
        if r.bias.len() != rows {
            return Err(Error::Format(format!(
                "bias length {} does not match {} weight rows",
                r.bias.len(),
                rows
            )));
        }
        let flat: Vec<f64> = r.weights.into_iter().flatten().collect();
        let weights = Array2::from_shape_vec((rows, cols), flat)
            .map_err(|e| Error::Format(e.to_string()))?;
        Ok(Dense { weights, bias: Array1::from(r.bias) })
    }
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weights: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    /// Uniform initialization in ±1/sqrt(fan-in) for weights and bias.
    pub fn uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        let mut draw = || rng.random_range(-bound..=bound);
        let weights = Array2::from_shape_simple_fn((outputs, inputs), &mut draw);
        let bias = Array1::from_shape_simple_fn(outputs, &mut draw);
        Dense { weights, bias }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn zeros_like(&self) -> Self {
        Dense::zeros(self.inputs(), self.outputs())
    }

    /// Batched affine map: `x · Wᵀ + b` for `x` of shape `batch × in`.
    pub fn affine(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.dot(&self.weights.t());
        out += &self.bias;
        out
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }

    pub fn scale(&mut self, factor: f64) {
        self.weights *= factor;
        self.bias *= factor;
    }

    pub fn add_assign(&mut self, other: &Dense) {
        self.weights += &other.weights;
        self.bias += &other.bias;
    }

    pub fn max_abs_diff(&self, other: &Dense) -> f64 {
        self.weights
            .iter()
            .zip(other.weights.iter())
            .chain(self.bias.iter().zip(other.bias.iter()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Checks that consecutive layers chain (`out(k) == in(k+1)`).
pub fn check_chain(layers: &[Dense]) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::Shape("network has no layers".into()));
    }
    for (k, pair) in layers.windows(2).enumerate() {
        if pair[0].outputs() != pair[1].inputs() {
            return Err(Error::Shape(format!(
                "layer {} emits {} values but layer {} expects {}",
                k,
                pair[0].outputs(),
                k + 1,
                pair[1].inputs()
            )));
        }
    }
    for (k, l) in layers.iter().enumerate() {
        if l.bias.len() != l.outputs() {
            return Err(Error::Shape(format!("layer {k} bias length mismatch")));
        }
    }
    Ok(())
}

pub fn same_shapes(a: &[Dense], b: &[Dense]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x.weights.dim() == y.weights.dim() && x.bias.len() == y.bias.len())
}

/// Polyak averaging: `target ← τ·online + (1 − τ)·target`.
pub fn soft_update(target: &mut [Dense], online: &[Dense], tau: f64) {
    for (t, o) in target.iter_mut().zip(online) {
        Zip::from(&mut t.weights)
            .and(&o.weights)
            .for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
        Zip::from(&mut t.bias)
            .and(&o.bias)
            .for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
    }
}

pub fn relu(x: &mut Array2<f64>) {
    x.mapv_inplace(|v| v.max(0.0));
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }

    pub fn sgd(lr: f64) -> Self {
        OptimizerConfig { kind: OptimizerKind::Sgd, ..Self::adam(lr) }
    }
}

/// Gradient-descent optimizer holding per-parameter moment estimates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    step: u64,
    first: Vec<Dense>,
    second: Vec<Dense>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, params: &[Dense]) -> Self {
        let zeros = || params.iter().map(Dense::zeros_like).collect::<Vec<_>>();
        let (first, second) = match config.kind {
            OptimizerKind::Adam => (zeros(), zeros()),
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
        };
        Optimizer { config, step: 0, first, second }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Descends along `grads` (gradients of the loss being minimized).
    pub fn apply(&mut self, params: &mut [Dense], grads: &[Dense]) -> Result<()> {
        if !same_shapes(params, grads) {
            return Err(Error::Shape("gradient shapes do not match parameters".into()));
        }
        self.step += 1;
        let lr = self.config.lr;
        match self.config.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    p.weights.scaled_add(-lr, &g.weights);
                    p.bias.scaled_add(-lr, &g.bias);
                }
            }
            OptimizerKind::Adam => {
                let OptimizerConfig { beta1, beta2, eps, .. } = self.config;
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                };
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.first.iter_mut())
                    .zip(self.second.iter_mut())
                {
                    Zip::from(&mut p.weights)
                        .and(&g.weights)
                        .and(&mut m.weights)
                        .and(&mut v.weights)
                        .for_each(|p, &g, m, v| update(p, g, m, v));
                    Zip::from(&mut p.bias)
                        .and(&g.bias)
                        .and(&mut m.bias)
                        .and(&mut v.bias)
                        .for_each(|p, &g, m, v| update(p, g, m, v));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_init_respects_fan_in_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = Dense::uniform(16, 8, &mut rng);
        assert!(d.weights.iter().all(|w| w.abs() <= 0.25));
        assert!(d.bias.iter().all(|w| w.abs() <= 0.25));
    }

    #[test]
    fn soft_update_is_convex_combination() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let online = vec![Dense::uniform(3, 4, &mut rng)];
        let old = vec![Dense::uniform(3, 4, &mut rng)];
        let mut target = old.clone();
        soft_update(&mut target, &online, 0.01);
        for ((t, o), n) in target[0]
            .weights
            .iter()
            .zip(old[0].weights.iter())
            .zip(online[0].weights.iter())
        {
            assert!(*t >= o.min(*n) - 1e-15 && *t <= o.max(*n) + 1e-15);
        }
    }

    #[test]
    fn sgd_moves_against_gradient() {
        let mut p = vec![Dense::zeros(2, 1)];
        let mut g = vec![Dense::zeros(2, 1)];
        g[0].weights[[0, 0]] = 2.0;
        let mut opt = Optimizer::new(OptimizerConfig::sgd(0.5), &p);
        opt.apply(&mut p, &g).unwrap();
        assert_eq!(p[0].weights[[0, 0]], -1.0);
    }

    #[test]
    fn adam_first_step_has_learning_rate_magnitude() {
        let mut p = vec![Dense::zeros(1, 1)];
        let mut g = vec![Dense::zeros(1, 1)];
        g[0].weights[[0, 0]] = 123.0;
        let mut opt = Optimizer::new(OptimizerConfig::adam(1e-3), &p);
        opt.apply(&mut p, &g).unwrap();
        assert!((p[0].weights[[0, 0]] + 1e-3).abs() < 1e-9);
    }

    #[test]
    fn dense_json_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = Dense::uniform(5, 3, &mut rng);
        let s = serde_json::to_string(&d).unwrap();
        let back: Dense = serde_json::from_str(&s).unwrap();
        assert_eq!(d, back);
    }

    #[test]
    fn chain_check_rejects_mismatch() {
        let layers = vec![Dense::zeros(3, 4), Dense::zeros(5, 2)];
        assert!(matches!(check_chain(&layers), Err(Error::Shape(_))));
    }
}
