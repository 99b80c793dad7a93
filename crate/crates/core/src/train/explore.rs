use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Additive Gaussian action noise whose scale decays linearly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma_start: f64,
    pub sigma_end: f64,
    /// Steps over which σ moves from `sigma_start` to `sigma_end`.
    pub decay_steps: u64,
}

impl NoiseConfig {
    pub fn sigma_at(&self, step: u64) -> f64 {
        if self.decay_steps == 0 {
            return self.sigma_end;
        }
        let frac = (step as f64 / self.decay_steps as f64).min(1.0);
        self.sigma_start + (self.sigma_end - self.sigma_start) * frac
    }
}

/// Perturbs each action component and clamps back into `[0, 1]`.
pub fn explore_action<R: Rng + ?Sized>(action: [f64; 2], sigma: f64, rng: &mut R) -> [f64; 2] {
    if sigma <= 0.0 {
        return action;
    }
    action.map(|a| {
        let n: f64 = StandardNormal.sample(rng);
        (a + sigma * n).clamp(0.0, 1.0)
    })
}
