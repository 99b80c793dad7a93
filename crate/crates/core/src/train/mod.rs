//! Reinforcement-learning loop around the spiking actor and deep critic.

pub mod actor;
pub mod config;
pub mod episode;
pub mod explore;
pub mod replay;
pub mod reward;
pub mod trainer;

pub use actor::Actor;
pub use config::{ActorKind, Preset, StageConfig, TrainConfig};
pub use episode::{run_episode, Agent, EpisodeSummary, RolloutConfig};
pub use explore::{explore_action, NoiseConfig};
pub use replay::{ReplayBuffer, Transition};
pub use reward::{compute_reward, Outcome, RewardConfig};
pub use trainer::{run_training, sddpg_update, EpisodeRecord, Networks, Trainer, UpdateStats};
