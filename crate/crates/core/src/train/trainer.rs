//! The training loop: curriculum stages, exploration, replay, joint
//! actor/critic updates, per-episode log and stage checkpoints.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::actor::Actor;
use super::config::{ActorKind, TrainConfig};
use super::episode::{run_episode, Agent, RolloutConfig};
use super::explore::explore_action;
use super::replay::{ReplayBuffer, Transition};
use super::reward::Outcome;
use crate::critic::{critic_train_step, CriticParams, TdBatch};
use crate::error::{Error, Result};
use crate::model_io::{Model, ModelFile, ModelMeta};
use crate::nn::{soft_update, Optimizer};
use crate::sim::{sample_episode, NavEnv, RobotState, World, OBSERVATION_CHANNELS};

pub const TRAIN_LOG_VERSION: u32 = 1;
pub const CHECKPOINT_FORMAT: &str = "sddpg-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const ACTOR_FILE: &str = "actor.json";
pub const CRITIC_FILE: &str = "critic.json";

/// Online and target networks with their optimizers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Networks {
    pub actor: Actor,
    pub target_actor: Actor,
    pub critic: CriticParams,
    pub target_critic: CriticParams,
    pub actor_optimizer: Optimizer,
    pub critic_optimizer: Optimizer,
}

impl Networks {
    pub fn init<R: Rng + ?Sized>(cfg: &TrainConfig, rng: &mut R) -> Result<Self> {
        let actor = match cfg.actor {
            ActorKind::Spiking => Actor::init_spiking(&cfg.san_sizes(), cfg.lif, rng)?,
            ActorKind::Deep => Actor::init_deep(&cfg.deep_sizes(), None, rng)?,
            ActorKind::DeepPoisson => Actor::init_deep(&cfg.deep_sizes(), Some(cfg.lif.timesteps), rng)?,
        };
        let mut actor = actor;
        if let Some(bound) = cfg.actor_weight_bound {
            actor.clamp_weights(bound);
        }
        let critic = CriticParams::random(OBSERVATION_CHANNELS, 2, &cfg.critic_hidden, cfg.critic_action_layer, rng)?;
        Ok(Networks {
            actor_optimizer: Optimizer::new(cfg.actor_optimizer, actor.layers()),
            critic_optimizer: Optimizer::new(cfg.critic_optimizer, &critic.layers),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite()
            && self.target_actor.is_finite()
            && self.critic.layers.iter().all(|l| l.is_finite())
            && self.target_critic.layers.iter().all(|l| l.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub mean_q: f64,
}

/// Stacks sampled transitions into a TD batch; next actions come from the
/// target actor on fresh encodings.
fn td_batch<R: Rng + ?Sized>(batch: &[&Transition], target_actor: &Actor, rng: &mut R) -> Result<TdBatch> {
    let n = batch.len();
    let dim = batch[0].state.len();
    let stack = |f: &dyn Fn(&Transition) -> &[f64], width: usize| -> Result<Array2<f64>> {
        let mut flat = Vec::with_capacity(n * width);
        for t in batch {
            let row = f(t);
            if row.len() != width {
                return Err(Error::Shape(format!("transition row has {} values, expected {width}", row.len())));
            }
            flat.extend_from_slice(row);
        }
        Array2::from_shape_vec((n, width), flat).map_err(|e| Error::Shape(e.to_string()))
    };
    let states = stack(&|t| &t.state, dim)?;
    let next_states = stack(&|t| &t.next_state, dim)?;
    let actions = stack(&|t| &t.action, 2)?;
    let next_actions = target_actor.act_batch(&next_states, rng)?;
    Ok(TdBatch {
        states,
        actions,
        rewards: Array1::from_iter(batch.iter().map(|t| t.reward)),
        next_states,
        next_actions,
        terminal: batch.iter().map(|t| t.is_terminal()).collect(),
    })
}

/// One joint update: critic TD step, actor step through the critic's action
/// gradient, then soft target updates.
pub fn sddpg_update<R: Rng + ?Sized>(
    nets: &mut Networks,
    batch: &[&Transition],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let td = td_batch(batch, &nets.target_actor, rng)?;
    let critic_loss = critic_train_step(&mut nets.critic, &nets.target_critic, &td, cfg.gamma, &mut nets.critic_optimizer)?;
    let mean_q = nets.actor.policy_step(
        &td.states,
        &nets.critic,
        &cfg.pseudo_grad,
        cfg.current_adjoint,
        cfg.bounded_action_grad,
        &mut nets.actor_optimizer,
        rng,
    )?;
    if let Some(bound) = cfg.actor_weight_bound {
        nets.actor.clamp_weights(bound);
    }
    soft_update(nets.target_actor.layers_mut(), nets.actor.layers(), cfg.tau);
    soft_update(&mut nets.target_critic.layers, &nets.critic.layers, cfg.tau);
    Ok(UpdateStats { critic_loss, mean_q })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub stage: usize,
    pub outcome: Outcome,
    pub steps: usize,
    pub ret: f64,
}

pub fn write_log_csv<W: Write>(records: &[EpisodeRecord], out: W) -> Result<()> {
    let mut out = out;
    writeln!(out, "# sddpg training log v{TRAIN_LOG_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["episode", "stage", "outcome", "steps", "return"])?;
    for r in records {
        w.write_record([
            r.episode.to_string(),
            r.stage.to_string(),
            r.outcome.to_string(),
            r.steps.to_string(),
            r.ret.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_log_csv(text: &str) -> Result<Vec<EpisodeRecord>> {
    let mut lines = text.splitn(2, '\n');
    let header = lines.next().unwrap_or_default().trim_end();
    if header != format!("# sddpg training log v{TRAIN_LOG_VERSION}") {
        return Err(Error::Format(format!("unexpected training log header {header:?}")));
    }
    let mut r = csv::Reader::from_reader(lines.next().unwrap_or_default().as_bytes());
    let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Format(e.to_string()));
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        if row.len() != 5 {
            return Err(Error::Format(format!("training log row with {} fields", row.len())));
        }
        out.push(EpisodeRecord {
            episode: parse(&row[0])? as u64,
            stage: parse(&row[1])? as usize,
            outcome: row[2].parse()?,
            steps: parse(&row[3])? as usize,
            ret: parse(&row[4])?,
        });
    }
    Ok(out)
}

/// Complete resumable training state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trainer {
    config: TrainConfig,
    seed: u64,
    nets: Networks,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    stage: usize,
    stage_steps: u64,
    total_steps: u64,
    updates: u64,
    log: Vec<EpisodeRecord>,
    #[serde(skip)]
    worlds: Vec<World>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    trainer: Trainer,
}

impl Trainer {
    /// Initializes networks from `seed`; world references resolve against `base`.
    pub fn new(config: TrainConfig, seed: u64, base: Option<&Path>) -> Result<Self> {
        config.validate()?;
        let worlds = config.resolve_worlds(base)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nets = Networks::init(&config, &mut rng)?;
        Ok(Trainer {
            buffer: ReplayBuffer::new(config.replay_capacity)?,
            config,
            seed,
            nets,
            rng,
            stage: 0,
            stage_steps: 0,
            total_steps: 0,
            updates: 0,
            log: Vec::new(),
            worlds,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn networks(&self) -> &Networks {
        &self.nets
    }

    pub fn log(&self) -> &[EpisodeRecord] {
        &self.log
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Index of the stage that the next episode belongs to.
    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn is_finished(&self) -> bool {
        self.stage >= self.config.curriculum.len()
    }

    pub fn rollout_config(&self) -> RolloutConfig {
        rollout_config(&self.config)
    }

    /// Runs one episode of the current stage. Returns `None` once every stage
    /// budget is spent. An episode started inside a budget runs to its end.
    pub fn step_episode(&mut self) -> Result<Option<EpisodeRecord>> {
        while !self.is_finished() && self.stage_steps >= self.config.curriculum[self.stage].steps {
            self.stage += 1;
            self.stage_steps = 0;
        }
        if self.is_finished() {
            return Ok(None);
        }
        let cfg = &self.config;
        let world = &self.worlds[self.stage];
        let episode = sample_episode(world, &mut self.rng)?;
        let mut env = NavEnv::new(world.clone(), cfg.robot.kinematics, episode);
        let rollout = rollout_config(cfg);
        let steps_before = self.total_steps;
        let mut learner = Learner {
            cfg,
            nets: &mut self.nets,
            buffer: &mut self.buffer,
            total_steps: &mut self.total_steps,
            updates: &mut self.updates,
        };
        let summary = run_episode(&mut env, episode, &rollout, &mut self.rng, &mut learner)?;
        self.stage_steps += self.total_steps - steps_before;
        let record = EpisodeRecord {
            episode: self.log.len() as u64,
            stage: self.stage,
            outcome: summary.outcome,
            steps: summary.steps,
            ret: summary.ret,
        };
        self.log.push(record);
        Ok(Some(record))
    }

    /// Runs the current stage to the end of its budget.
    pub fn run_stage(&mut self) -> Result<()> {
        let stage = self.stage;
        while !self.is_finished() && self.stage == stage {
            if self.stage_steps >= self.config.curriculum[stage].steps {
                self.stage += 1;
                self.stage_steps = 0;
                break;
            }
            self.step_episode()?;
        }
        Ok(())
    }

    /// Trains through every remaining stage. With an output directory, writes
    /// a checkpoint after each stage and the episode log at the end.
    pub fn run(&mut self, out_dir: Option<&Path>) -> Result<()> {
        while !self.is_finished() {
            let stage = self.stage;
            self.run_stage()?;
            if let Some(dir) = out_dir {
                self.save_checkpoint(&checkpoint_path(dir, stage))?;
            }
        }
        if let Some(dir) = out_dir {
            self.write_log(&dir.join(TRAIN_LOG_FILE))?;
            self.save_models(dir)?;
        }
        Ok(())
    }

    /// Writes `actor.json` and `critic.json` into `dir`.
    pub fn save_models(&self, dir: &Path) -> Result<()> {
        let meta = ModelMeta::from_config(&self.config);
        let method = self.config.actor.method_name();
        ModelFile::new(method, meta, Model::Actor(self.nets.actor.clone())).save(&dir.join(ACTOR_FILE))?;
        ModelFile::new(method, meta, Model::Critic(self.nets.critic.clone())).save(&dir.join(CRITIC_FILE))?;
        Ok(())
    }

    pub fn write_log(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        write_log_csv(&self.log, std::io::BufWriter::new(file))
    }

    pub fn log_csv(&self) -> String {
        let mut buf = Vec::new();
        write_log_csv(&self.log, &mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let ck = CheckpointFile { format: CHECKPOINT_FORMAT.into(), version: CHECKPOINT_VERSION, trainer: self.clone() };
        let mut w = std::io::BufWriter::new(file);
        serde_json::to_writer(&mut w, &ck)?;
        w.flush()?;
        Ok(())
    }

    /// Restores a checkpoint; world references resolve against `base`.
    pub fn load_checkpoint(path: &Path, base: Option<&Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ck: CheckpointFile = serde_json::from_str(&text)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "{}: expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION}, found {} v{}",
                path.display(),
                ck.format,
                ck.version
            )));
        }
        let mut trainer = ck.trainer;
        trainer.config.validate()?;
        trainer.worlds = trainer.config.resolve_worlds(base)?;
        Ok(trainer)
    }
}

/// The training agent: explores, stores transitions and updates on schedule.
struct Learner<'a> {
    cfg: &'a TrainConfig,
    nets: &'a mut Networks,
    buffer: &'a mut ReplayBuffer,
    total_steps: &'a mut u64,
    updates: &'a mut u64,
}

impl<R: Rng + ?Sized> Agent<R> for Learner<'_> {
    fn act(&mut self, observation: &[f64], rng: &mut R) -> Result<[f64; 2]> {
        if *self.total_steps < self.cfg.warmup_steps {
            return Ok([rng.random::<f64>(), rng.random::<f64>()]);
        }
        let a = self.nets.actor.act(observation, rng)?;
        Ok(explore_action(a, self.cfg.exploration.sigma_at(*self.total_steps), rng))
    }

    fn observe(&mut self, transition: &Transition, _next: &RobotState, rng: &mut R) -> Result<()> {
        self.buffer.push(transition.clone());
        *self.total_steps += 1;
        let cfg = self.cfg;
        if *self.total_steps > cfg.warmup_steps
            && *self.total_steps % cfg.update_every == 0
            && self.buffer.len() >= cfg.batch_size
        {
            let batch = self.buffer.sample(cfg.batch_size, rng)?;
            sddpg_update(self.nets, &batch, cfg, rng)?;
            *self.updates += 1;
        }
        Ok(())
    }
}

pub fn checkpoint_path(dir: &Path, stage: usize) -> PathBuf {
    dir.join(format!("checkpoint-stage{stage}.json"))
}

pub fn rollout_config(cfg: &TrainConfig) -> RolloutConfig {
    RolloutConfig {
        reward: cfg.reward,
        observation: cfg.observation_config(),
        v_min: cfg.robot.v_min,
        v_max: cfg.robot.v_max,
        max_steps: cfg.max_episode_steps,
    }
}

/// Trains from scratch under `seed`.
pub fn run_training(config: TrainConfig, seed: u64, base: Option<&Path>, out_dir: Option<&Path>) -> Result<Trainer> {
    let mut trainer = Trainer::new(config, seed, base)?;
    trainer.run(out_dir)?;
    Ok(trainer)
}
