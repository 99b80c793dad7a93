//! Training configuration: every hyperparameter of the loop in one TOML file,
//! with the full-scale and desk-scale presets.

use serde::{Deserialize, Serialize};
use std::path::Path;

use super::explore::NoiseConfig;
use super::reward::RewardConfig;
use crate::error::{Error, Result};
use crate::lif::LifConfig;
use crate::nn::OptimizerConfig;
use crate::sim::{resolve_world, KinematicsConfig, ObservationConfig, World, OBSERVATION_CHANNELS};
use crate::stbp::{CurrentAdjoint, PseudoGradConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActorKind {
    /// Spiking actor trained through the surrogate gradient.
    Spiking,
    /// Dense actor on clean observations.
    Deep,
    /// Dense actor on observations passed through the Poisson encoder.
    DeepPoisson,
}

impl ActorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActorKind::Spiking => "spiking",
            ActorKind::Deep => "deep",
            ActorKind::DeepPoisson => "deep-poisson",
        }
    }

    /// Label of the trained method in reports.
    pub fn method_name(self) -> &'static str {
        match self {
            ActorKind::Spiking => "sddpg",
            ActorKind::Deep => "ddpg",
            ActorKind::DeepPoisson => "ddpg-poisson",
        }
    }
}

impl std::str::FromStr for ActorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spiking" => Ok(ActorKind::Spiking),
            "deep" => Ok(ActorKind::Deep),
            "deep-poisson" => Ok(ActorKind::DeepPoisson),
            other => Err(Error::Config(format!("unknown actor kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Paper,
    Desk,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            other => Err(Error::Config(format!("unknown preset {other:?} (expected paper or desk)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    /// `bundled:<name>` or a path relative to the config file.
    pub world: String,
    /// Execution steps after which no new episode starts in this stage.
    pub steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    pub v_min: f64,
    pub v_max: f64,
    pub kinematics: KinematicsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationScaling {
    /// Goal distance mapped to channel value 1.
    pub goal_dis_cap: f64,
    /// Lidar range mapped to 0 and to 1 respectively.
    pub lidar_norm_min: f64,
    pub lidar_norm_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub actor: ActorKind,
    pub san_hidden: Vec<usize>,
    pub deep_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// Critic layer receiving the action (0 = input layer).
    pub critic_action_layer: usize,
    pub lif: LifConfig,
    pub pseudo_grad: PseudoGradConfig,
    pub current_adjoint: CurrentAdjoint,
    /// Scale the policy gradient on each action by its room toward the bound
    /// it pushes at.
    #[serde(default)]
    pub bounded_action_grad: bool,
    /// Magnitude limit on actor weights, enforced after every update. Keeps
    /// outliers from setting the integer rescale ratio.
    #[serde(default)]
    pub actor_weight_bound: Option<f64>,
    pub reward: RewardConfig,
    pub robot: RobotConfig,
    pub observation: ObservationScaling,
    pub actor_optimizer: OptimizerConfig,
    pub critic_optimizer: OptimizerConfig,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub warmup_steps: u64,
    /// Execution steps between consecutive network updates.
    pub update_every: u64,
    pub max_episode_steps: usize,
    pub exploration: NoiseConfig,
    pub curriculum: Vec<StageConfig>,
}

impl TrainConfig {
    /// Full-scale protocol: four training worlds, 200,000 execution steps.
    pub fn paper() -> Self {
        let kinematics = KinematicsConfig::default();
        TrainConfig {
            actor: ActorKind::Spiking,
            san_hidden: vec![256, 256],
            deep_hidden: vec![256, 256],
            critic_hidden: vec![512, 512],
            critic_action_layer: 1,
            lif: LifConfig::with_timesteps(5),
            pseudo_grad: PseudoGradConfig::default(),
            current_adjoint: CurrentAdjoint::SameStep,
            bounded_action_grad: false,
            actor_weight_bound: None,
            reward: RewardConfig::default(),
            robot: RobotConfig { v_min: 0.05, v_max: 0.5, kinematics },
            observation: ObservationScaling {
                goal_dis_cap: 20.0 * std::f64::consts::SQRT_2,
                lidar_norm_min: kinematics.lidar.min_range,
                lidar_norm_max: kinematics.lidar.max_range,
            },
            actor_optimizer: OptimizerConfig::adam(1e-5),
            critic_optimizer: OptimizerConfig::adam(1e-4),
            gamma: 0.99,
            tau: 0.01,
            batch_size: 256,
            replay_capacity: 100_000,
            warmup_steps: 1_000,
            update_every: 1,
            max_episode_steps: 1_000,
            exploration: NoiseConfig { sigma_start: 0.5, sigma_end: 0.05, decay_steps: 200_000 },
            curriculum: vec![
                StageConfig { world: "bundled:paper-env1".into(), steps: 20_000 },
                StageConfig { world: "bundled:paper-env2".into(), steps: 40_000 },
                StageConfig { world: "bundled:paper-env3".into(), steps: 60_000 },
                StageConfig { world: "bundled:paper-env4".into(), steps: 80_000 },
            ],
        }
    }

    /// Laptop-scale protocol: two 10 m × 10 m worlds, 30,000 execution steps.
    pub fn desk() -> Self {
        let paper = Self::paper();
        TrainConfig {
            san_hidden: vec![64, 64],
            deep_hidden: vec![64, 64],
            critic_hidden: vec![128, 128],
            bounded_action_grad: true,
            actor_weight_bound: Some(0.25),
            observation: ObservationScaling {
                goal_dis_cap: 10.0 * std::f64::consts::SQRT_2,
                lidar_norm_max: 5.0,
                ..paper.observation
            },
            actor_optimizer: OptimizerConfig::adam(1e-4),
            critic_optimizer: OptimizerConfig::adam(1e-3),
            batch_size: 128,
            replay_capacity: 100_000,
            exploration: NoiseConfig { sigma_start: 0.5, sigma_end: 0.05, decay_steps: 25_000 },
            curriculum: vec![
                StageConfig { world: "bundled:desk-stage1".into(), steps: 10_000 },
                StageConfig { world: "bundled:desk-stage2".into(), steps: 20_000 },
            ],
            ..paper
        }
    }

    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Paper => Self::paper(),
            Preset::Desk => Self::desk(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn total_steps(&self) -> u64 {
        self.curriculum.iter().map(|s| s.steps).sum()
    }

    pub fn observation_config(&self) -> ObservationConfig {
        ObservationConfig {
            goal_dis_cap: self.observation.goal_dis_cap,
            lidar_min: self.observation.lidar_norm_min,
            lidar_max: self.observation.lidar_norm_max,
            v_min: self.robot.v_min,
            v_max: self.robot.v_max,
            omega_max: (self.robot.v_max - self.robot.v_min) / self.robot.kinematics.wheel_separation,
        }
    }

    pub fn san_sizes(&self) -> Vec<usize> {
        let mut s = vec![OBSERVATION_CHANNELS];
        s.extend(&self.san_hidden);
        s.push(2);
        s
    }

    pub fn deep_sizes(&self) -> Vec<usize> {
        let mut s = vec![OBSERVATION_CHANNELS];
        s.extend(&self.deep_hidden);
        s.push(2);
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.lif.validate()?;
        self.pseudo_grad.validate()?;
        self.reward.validate()?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.robot.v_min >= self.robot.v_max {
            return bad("v_min must be below v_max");
        }
        let k = &self.robot.kinematics;
        if !(k.wheel_separation > 0.0 && k.robot_radius > 0.0 && k.dt > 0.0 && k.lidar.beams == 18) {
            return bad("robot geometry must be positive and the lidar must have 18 beams");
        }
        let o = &self.observation;
        if !(o.goal_dis_cap > 0.0 && o.lidar_norm_max > o.lidar_norm_min) {
            return bad("observation scaling ranges are empty");
        }
        if self.san_hidden.contains(&0) || self.deep_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        if self.critic_action_layer > self.critic_hidden.len() {
            return bad("critic action layer beyond the critic");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("gamma must lie in [0, 1] and tau in (0, 1]");
        }
        if self.batch_size == 0 || self.replay_capacity == 0 || self.update_every == 0 || self.max_episode_steps == 0 {
            return bad("batch size, replay capacity, update interval and episode limit must be positive");
        }
        if self.actor_weight_bound.is_some_and(|b| !(b > 0.0)) {
            return bad("actor weight bound must be positive");
        }
        if self.actor_optimizer.lr <= 0.0 || self.critic_optimizer.lr <= 0.0 {
            return bad("learning rates must be positive");
        }
        Ok(())
    }

    /// Loads every curriculum world; relative paths resolve against `base`.
    pub fn resolve_worlds(&self, base: Option<&Path>) -> Result<Vec<World>> {
        self.curriculum.iter().map(|s| resolve_world(&s.world, base)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for cfg in [TrainConfig::paper(), TrainConfig::desk()] {
            cfg.validate().unwrap();
            let back = TrainConfig::from_toml(&cfg.to_toml()).unwrap();
            assert_eq!(back, cfg);
            cfg.resolve_worlds(None).unwrap();
        }
    }

    #[test]
    fn paper_preset_table_values() {
        let p = TrainConfig::paper();
        assert_eq!((p.lif.v_th, p.lif.d_c, p.lif.d_v), (0.5, 0.5, 0.75));
        assert_eq!((p.pseudo_grad.a1, p.pseudo_grad.a2), (1.0, 0.5));
        assert_eq!((p.san_hidden[0], p.critic_hidden[0]), (256, 512));
        assert_eq!(p.batch_size, 256);
        assert_eq!((p.actor_optimizer.lr, p.critic_optimizer.lr), (1e-5, 1e-4));
        assert_eq!((p.reward.r_goal, p.reward.r_obstacle, p.reward.amplification), (30.0, -20.0, 15.0));
        assert_eq!((p.reward.goal_threshold, p.reward.obstacle_threshold), (0.5, 0.35));
        assert_eq!((p.robot.v_min, p.robot.v_max), (0.05, 0.5));
        assert_eq!(p.total_steps(), 200_000);
        assert_eq!(p.curriculum.len(), 4);
    }

    #[test]
    fn desk_preset_scale() {
        let d = TrainConfig::desk();
        assert_eq!(d.total_steps(), 30_000);
        assert_eq!(d.curriculum.len(), 2);
        assert_eq!(d.batch_size, 128);
        assert_eq!(d.lif.timesteps, 5);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let mut text = TrainConfig::desk().to_toml();
        text.push_str("\nbogus = 1\n");
        assert!(TrainConfig::from_toml(&text).is_err());
        let mut cfg = TrainConfig::desk();
        cfg.robot.v_min = 0.6;
        assert!(cfg.validate().is_err());
        for bound in [0.0, -1.0, f64::NAN] {
            let cfg = TrainConfig { actor_weight_bound: Some(bound), ..TrainConfig::desk() };
            assert!(cfg.validate().is_err(), "bound {bound}");
        }
    }
}
