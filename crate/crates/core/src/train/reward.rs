use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::sim::RobotState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub r_goal: f64,
    pub r_obstacle: f64,
    /// Amplification of the per-step progress term.
    pub amplification: f64,
    /// Goal radius (m).
    pub goal_threshold: f64,
    /// Obstacle distance that counts as a collision (m).
    pub obstacle_threshold: f64,
    /// Use `A·(G_dis(t) − G_dis(t−1))`, which rewards moving away from the goal.
    #[serde(default)]
    pub literal_sign: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            r_goal: 30.0,
            r_obstacle: -20.0,
            amplification: 15.0,
            goal_threshold: 0.5,
            obstacle_threshold: 0.35,
            literal_sign: false,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.r_goal > 0.0 && self.r_obstacle < 0.0 && self.goal_threshold > 0.0 && self.obstacle_threshold > 0.0) {
            return Err(Error::Config(format!("invalid reward configuration {self:?}")));
        }
        Ok(())
    }
}

/// How an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Goal,
    Collision,
    Timeout,
}

impl Outcome {
    /// Goal and collision end the return; a timeout only truncates it.
    pub fn is_terminal(self) -> bool {
        !matches!(self, Outcome::Timeout)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Goal => "goal",
            Outcome::Collision => "collision",
            Outcome::Timeout => "timeout",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "goal" => Ok(Outcome::Goal),
            "collision" => Ok(Outcome::Collision),
            "timeout" => Ok(Outcome::Timeout),
            other => Err(Error::Format(format!("unknown outcome {other:?}"))),
        }
    }
}

/// Reward for the transition `prev → cur`. Reaching the goal is checked before
/// the collision test, so it wins when both hold.
pub fn compute_reward(prev: &RobotState, cur: &RobotState, cfg: &RewardConfig) -> (f64, Option<Outcome>) {
    if cur.goal_dis < cfg.goal_threshold {
        (cfg.r_goal, Some(Outcome::Goal))
    } else if cur.obstacle_dis < cfg.obstacle_threshold {
        (cfg.r_obstacle, Some(Outcome::Collision))
    } else if cfg.literal_sign {
        (cfg.amplification * (cur.goal_dis - prev.goal_dis), None)
    } else {
        (cfg.amplification * (prev.goal_dis - cur.goal_dis), None)
    }
}
