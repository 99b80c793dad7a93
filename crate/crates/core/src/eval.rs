//! Evaluation protocol: a fixed start/goal list per seed, deterministic
//! episodes, outcome rates, route metrics and a crossing-success heatmap.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::sim::{sample_episode, EpisodeSpec, KinematicsConfig, NavEnv, RobotState, World};
use crate::train::{run_episode, Agent, Outcome, RolloutConfig, Transition};

pub const EVAL_REPORT_FORMAT: &str = "sddpg-eval";
pub const EVAL_REPORT_VERSION: u32 = 1;

/// Anything that maps a normalized observation to an action in `[0, 1]²`.
pub trait Policy {
    fn act(&self, observation: &[f64], rng: &mut ChaCha8Rng) -> Result<[f64; 2]>;
}

impl Policy for crate::train::Actor {
    fn act(&self, observation: &[f64], rng: &mut ChaCha8Rng) -> Result<[f64; 2]> {
        crate::train::Actor::act(self, observation, rng)
    }
}

impl<F: Fn(&[f64]) -> [f64; 2]> Policy for F {
    fn act(&self, observation: &[f64], _rng: &mut ChaCha8Rng) -> Result<[f64; 2]> {
        Ok(self(observation))
    }
}

/// Start/goal list shared by every method evaluated under one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalProtocol {
    pub world: String,
    pub seed: u64,
    pub pairs: Vec<EpisodeSpec>,
}

impl EvalProtocol {
    pub fn generate(world: &World, count: usize, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::Config("episode count must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs = (0..count).map(|_| sample_episode(world, &mut rng)).collect::<Result<_>>()?;
        Ok(EvalProtocol { world: world.spec.name.clone(), seed, pairs })
    }

    /// SHA-256 over the world name and the exact bits of every pair.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.world.as_bytes());
        h.update(self.seed.to_le_bytes());
        for p in &self.pairs {
            for x in [p.start.x, p.start.y, p.heading, p.goal.x, p.goal.y] {
                h.update(x.to_bits().to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub index: usize,
    pub outcome: Outcome,
    pub steps: usize,
    /// Distance driven (m).
    pub route_length: f64,
    /// Route length over elapsed time (m/s).
    pub mean_speed: f64,
    /// Start-goal distance (m).
    pub straight_line: f64,
    pub ret: f64,
}

/// Per-cell counts of episodes that passed through a cell and of those that
/// went on to reach the goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub origin: [f64; 2],
    pub cell: f64,
    pub cols: usize,
    pub rows: usize,
    pub crossings: Vec<u32>,
    pub successes: Vec<u32>,
}

impl Heatmap {
    pub fn new(world: &World, cell: f64) -> Self {
        let b = world.bounds();
        let cols = (b.width() / cell).ceil().max(1.0) as usize;
        let rows = (b.height() / cell).ceil().max(1.0) as usize;
        Heatmap { origin: b.min, cell, cols, rows, crossings: vec![0; cols * rows], successes: vec![0; cols * rows] }
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<usize> {
        let c = ((x - self.origin[0]) / self.cell).floor();
        let r = ((y - self.origin[1]) / self.cell).floor();
        if c < 0.0 || r < 0.0 || c >= self.cols as f64 || r >= self.rows as f64 {
            return None;
        }
        Some(r as usize * self.cols + c as usize)
    }

    /// Counts each visited cell once for this episode.
    pub fn record(&mut self, cells: &BTreeSet<usize>, success: bool) {
        for &i in cells {
            self.crossings[i] += 1;
            if success {
                self.successes[i] += 1;
            }
        }
    }

    /// Success rate of a cell; `None` when no episode crossed it.
    pub fn rate(&self, i: usize) -> Option<f64> {
        (self.crossings[i] > 0).then(|| self.successes[i] as f64 / self.crossings[i] as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format: String,
    pub version: u32,
    pub method: String,
    pub world: String,
    pub seed: u64,
    pub pairs_hash: String,
    pub episodes: Vec<EpisodeResult>,
    pub heatmap: Heatmap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeRates {
    pub success: f64,
    pub collision: f64,
    pub timeout: f64,
}

impl EvalReport {
    pub fn count(&self, outcome: Outcome) -> usize {
        self.episodes.iter().filter(|e| e.outcome == outcome).count()
    }

    pub fn rates(&self) -> OutcomeRates {
        let n = self.episodes.len().max(1) as f64;
        OutcomeRates {
            success: self.count(Outcome::Goal) as f64 / n,
            collision: self.count(Outcome::Collision) as f64 / n,
            timeout: self.count(Outcome::Timeout) as f64 / n,
        }
    }

    /// Mean route length and mean speed over successful episodes, restricted
    /// to `indices` when given (the pairs every compared method solved).
    pub fn route_means(&self, indices: Option<&BTreeSet<usize>>) -> Option<(f64, f64)> {
        let ok: Vec<&EpisodeResult> = self
            .episodes
            .iter()
            .filter(|e| e.outcome == Outcome::Goal && indices.is_none_or(|s| s.contains(&e.index)))
            .collect();
        if ok.is_empty() {
            return None;
        }
        let n = ok.len() as f64;
        Some((ok.iter().map(|e| e.route_length).sum::<f64>() / n, ok.iter().map(|e| e.mean_speed).sum::<f64>() / n))
    }

    pub fn successful_indices(&self) -> BTreeSet<usize> {
        self.episodes.iter().filter(|e| e.outcome == Outcome::Goal).map(|e| e.index).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: EvalReport = serde_json::from_str(text)?;
        if r.format != EVAL_REPORT_FORMAT || r.version != EVAL_REPORT_VERSION {
            return Err(Error::Format(format!(
                "expected {EVAL_REPORT_FORMAT} v{EVAL_REPORT_VERSION}, found {} v{}",
                r.format, r.version
            )));
        }
        Ok(r)
    }
}

struct Tracker<'a, P: ?Sized> {
    policy: &'a P,
    heatmap: &'a Heatmap,
    cells: BTreeSet<usize>,
}

impl<P: Policy + ?Sized> Agent<ChaCha8Rng> for Tracker<'_, P> {
    fn act(&mut self, observation: &[f64], rng: &mut ChaCha8Rng) -> Result<[f64; 2]> {
        self.policy.act(observation, rng)
    }

    fn observe(&mut self, _t: &Transition, next: &RobotState, _rng: &mut ChaCha8Rng) -> Result<()> {
        if let Some(i) = self.heatmap.cell_of(next.pose.x, next.pose.y) {
            self.cells.insert(i);
        }
        Ok(())
    }
}

/// Runs `policy` on every pair of the protocol. Episode `i` draws its
/// encoder noise from stream `i` of the protocol seed, so results do not
/// depend on the order in which episodes run.
pub fn evaluate<P: Policy + ?Sized>(
    method: &str,
    policy: &P,
    world: &World,
    protocol: &EvalProtocol,
    kinematics: &KinematicsConfig,
    rollout: &RolloutConfig,
) -> Result<EvalReport> {
    if protocol.world != world.spec.name {
        return Err(Error::Protocol(format!(
            "protocol generated for world {:?}, evaluating in {:?}",
            protocol.world, world.spec.name
        )));
    }
    let mut heatmap = Heatmap::new(world, 1.0);
    let mut episodes = Vec::with_capacity(protocol.pairs.len());
    let mut env = NavEnv::new(world.clone(), *kinematics, protocol.pairs[0]);
    for (index, &pair) in protocol.pairs.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(protocol.seed);
        rng.set_stream(index as u64 + 1);
        let mut tracker = Tracker { policy, heatmap: &heatmap, cells: BTreeSet::new() };
        if let Some(i) = heatmap.cell_of(pair.start.x, pair.start.y) {
            tracker.cells.insert(i);
        }
        let s = run_episode(&mut env, pair, rollout, &mut rng, &mut tracker)?;
        let cells = tracker.cells;
        heatmap.record(&cells, s.outcome == Outcome::Goal);
        episodes.push(EpisodeResult {
            index,
            outcome: s.outcome,
            steps: s.steps,
            route_length: s.path_length,
            mean_speed: s.path_length / (s.steps as f64 * kinematics.dt),
            straight_line: pair.start.distance(pair.goal),
            ret: s.ret,
        });
    }
    Ok(EvalReport {
        format: EVAL_REPORT_FORMAT.into(),
        version: EVAL_REPORT_VERSION,
        method: method.into(),
        world: world.spec.name.clone(),
        seed: protocol.seed,
        pairs_hash: protocol.hash(),
        episodes,
        heatmap,
    })
}

struct Recorder<'a, P: ?Sized> {
    policy: &'a P,
    states: &'a mut Vec<f64>,
    wanted: usize,
    width: usize,
}

impl<P: Policy + ?Sized> Agent<ChaCha8Rng> for Recorder<'_, P> {
    fn act(&mut self, observation: &[f64], rng: &mut ChaCha8Rng) -> Result<[f64; 2]> {
        if self.states.len() < self.wanted * self.width {
            self.states.extend_from_slice(observation);
        }
        self.policy.act(observation, rng)
    }
}

/// Observations met while `policy` drives episodes sampled from `world`,
/// as a `count × channels` matrix.
pub fn record_states<P: Policy + ?Sized>(
    policy: &P,
    world: &World,
    kinematics: &KinematicsConfig,
    rollout: &RolloutConfig,
    count: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    let width = crate::sim::OBSERVATION_CHANNELS;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(count * width);
    let first = sample_episode(world, &mut rng)?;
    let mut env = NavEnv::new(world.clone(), *kinematics, first);
    let mut episode = first;
    while states.len() < count * width {
        let mut rec = Recorder { policy, states: &mut states, wanted: count, width };
        run_episode(&mut env, episode, rollout, &mut rng, &mut rec)?;
        episode = sample_episode(world, &mut rng)?;
    }
    Array2::from_shape_vec((count, width), states).map_err(|e| Error::Shape(e.to_string()))
}
