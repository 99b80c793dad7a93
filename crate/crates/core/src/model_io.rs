//! Versioned JSON model files shared by training, evaluation, quantization
//! and conversion.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::critic::CriticParams;
use crate::error::{Error, Result};
use crate::eval::Policy;
use crate::quantize::QuantizedSan;
use crate::sim::robot::OBSERVATION_LAYOUT_VERSION;
use crate::sim::{KinematicsConfig, ObservationConfig};
use crate::train::{Actor, RewardConfig, RolloutConfig, TrainConfig};

pub const MODEL_FORMAT: &str = "sddpg-model";
pub const MODEL_VERSION: u32 = 1;

/// How a policy sees and drives the robot; needed to run it again.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub observation_layout: u32,
    pub observation: ObservationConfig,
    pub v_min: f64,
    pub v_max: f64,
    pub kinematics: KinematicsConfig,
    pub reward: RewardConfig,
    pub max_episode_steps: usize,
}

impl ModelMeta {
    pub fn from_config(cfg: &TrainConfig) -> Self {
        ModelMeta {
            observation_layout: OBSERVATION_LAYOUT_VERSION,
            observation: cfg.observation_config(),
            v_min: cfg.robot.v_min,
            v_max: cfg.robot.v_max,
            kinematics: cfg.robot.kinematics,
            reward: cfg.reward,
            max_episode_steps: cfg.max_episode_steps,
        }
    }

    pub fn rollout(&self) -> RolloutConfig {
        RolloutConfig {
            reward: self.reward,
            observation: self.observation,
            v_min: self.v_min,
            v_max: self.v_max,
            max_steps: self.max_episode_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "kebab-case")]
pub enum Model {
    Actor(Actor),
    Critic(CriticParams),
    Quantized(QuantizedSan),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    /// Label used in reports, e.g. `sddpg` or `ddpg-poisson`.
    pub method: String,
    pub meta: ModelMeta,
    pub model: Model,
}

impl ModelFile {
    pub fn new(method: impl Into<String>, meta: ModelMeta, model: Model) -> Self {
        ModelFile { format: MODEL_FORMAT.into(), version: MODEL_VERSION, method: method.into(), meta, model }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: ModelFile = serde_json::from_str(text)?;
        if m.format != MODEL_FORMAT || m.version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "expected {MODEL_FORMAT} v{MODEL_VERSION}, found {} v{}",
                m.format, m.version
            )));
        }
        if m.meta.observation_layout != OBSERVATION_LAYOUT_VERSION {
            return Err(Error::Format(format!(
                "model uses observation layout v{}, this build reads v{OBSERVATION_LAYOUT_VERSION}",
                m.meta.observation_layout
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read model {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// The model as a driving policy; critics cannot drive.
    pub fn policy(&self) -> Result<&dyn Policy> {
        match &self.model {
            Model::Actor(a) => Ok(a),
            Model::Quantized(q) => Ok(q),
            Model::Critic(_) => Err(Error::InvalidInput("a critic model cannot drive the robot".into())),
        }
    }
}
