//! Running one episode: observation, action, simulation step, reward and
//! termination, with a hook per transition.

use rand::Rng;

use super::replay::Transition;
use super::reward::{compute_reward, Outcome, RewardConfig};
use crate::error::{Error, Result};
use crate::lif::decode_action;
use crate::sim::{make_observation, EpisodeSpec, NavEnv, ObservationConfig, RobotState};

/// Everything an episode needs besides the environment and the policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutConfig {
    pub reward: RewardConfig,
    pub observation: ObservationConfig,
    pub v_min: f64,
    pub v_max: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub outcome: Outcome,
    pub steps: usize,
    pub ret: f64,
    /// Distance driven, `Σ ν·dt`.
    pub path_length: f64,
}

/// Something that drives the robot through an episode.
pub trait Agent<R: Rng + ?Sized> {
    /// Action in `[0, 1]²` for a normalized observation.
    fn act(&mut self, observation: &[f64], rng: &mut R) -> Result<[f64; 2]>;

    /// Sees every transition together with the raw state it led to.
    fn observe(&mut self, _transition: &Transition, _next: &RobotState, _rng: &mut R) -> Result<()> {
        Ok(())
    }
}

impl<R, F> Agent<R> for F
where
    R: Rng + ?Sized,
    F: FnMut(&[f64], &mut R) -> Result<[f64; 2]>,
{
    fn act(&mut self, observation: &[f64], rng: &mut R) -> Result<[f64; 2]> {
        self(observation, rng)
    }
}

/// Runs one episode to goal, collision or the step limit.
pub fn run_episode<R, A>(env: &mut NavEnv, episode: EpisodeSpec, cfg: &RolloutConfig, rng: &mut R, agent: &mut A) -> Result<EpisodeSummary>
where
    R: Rng + ?Sized,
    A: Agent<R> + ?Sized,
{
    if cfg.max_steps == 0 {
        return Err(Error::Config("episode step limit must be positive".into()));
    }
    let dt = env.kinematics.dt;
    let mut state = env.reset(episode, rng);
    let mut obs = make_observation(&state, &cfg.observation).channels;
    let mut ret = 0.0;
    let mut path_length = 0.0;
    loop {
        let action = agent.act(&obs, rng)?;
        if !action.iter().all(|a| (0.0..=1.0).contains(a)) {
            return Err(Error::NumericFault(format!("policy action {action:?} outside [0, 1]")));
        }
        let (vl, vr) = decode_action(action, cfg.v_min, cfg.v_max)?;
        let next = env.step(vl, vr, rng);
        let next_obs = make_observation(&next, &cfg.observation).channels;
        let (reward, mut done) = compute_reward(&state, &next, &cfg.reward);
        if done.is_none() && env.steps() >= cfg.max_steps {
            done = Some(Outcome::Timeout);
        }
        ret += reward;
        path_length += next.linear.abs() * dt;
        let transition = Transition { state: obs, action, reward, next_state: next_obs, done };
        agent.observe(&transition, &next, rng)?;
        if let Some(outcome) = done {
            return Ok(EpisodeSummary { outcome, steps: env.steps(), ret, path_length });
        }
        obs = transition.next_state;
        state = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{KinematicsConfig, Vec2, World};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const ARENA: &str = r#"
format = "sddpg-world"
version = 1
name = "arena"
bounds = { min = [0.0, 0.0], max = [40.0, 40.0] }
min_separation = 1.0
obstacles = []
start_regions = [{ kind = "point", at = [20.0, 20.0] }]
goal_regions = [{ kind = "point", at = [5.0, 20.0] }]
"#;

    fn setup() -> (NavEnv, EpisodeSpec, RolloutConfig) {
        let world = World::from_toml(ARENA).unwrap();
        let kin = KinematicsConfig::default();
        let episode = EpisodeSpec { start: Vec2::new(20.0, 20.0), heading: 0.0, goal: Vec2::new(5.0, 20.0) };
        let cfg = RolloutConfig {
            reward: RewardConfig::default(),
            observation: ObservationConfig::new(56.6, &kin.lidar, 0.05, 0.5, kin.wheel_separation),
            v_min: 0.05,
            v_max: 0.5,
            max_steps: 1000,
        };
        (NavEnv::new(world, kin, episode), episode, cfg)
    }

    #[test]
    fn minimum_speed_times_out_at_limit() {
        let (mut env, episode, cfg) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        struct Crawl(usize);
        impl Agent<ChaCha8Rng> for Crawl {
            fn act(&mut self, _: &[f64], _: &mut ChaCha8Rng) -> Result<[f64; 2]> {
                Ok([0.0, 0.0])
            }
            fn observe(&mut self, t: &Transition, _: &RobotState, _: &mut ChaCha8Rng) -> Result<()> {
                self.0 += 1;
                assert_eq!(t.done.is_some(), self.0 == 1000);
                Ok(())
            }
        }
        let mut crawl = Crawl(0);
        let s = run_episode(&mut env, episode, &cfg, &mut rng, &mut crawl).unwrap();
        assert_eq!((s.outcome, s.steps, crawl.0), (Outcome::Timeout, 1000, 1000));
        assert!((s.path_length - 1000.0 * 0.05 * 0.1).abs() < 1e-9);
        // Driving away from the goal at 0.05 m/s costs 15 · 0.005 per step.
        assert!((s.ret + 1000.0 * 15.0 * 0.005).abs() < 1e-6);
    }

    #[test]
    fn driving_at_goal_succeeds() {
        let (mut env, mut episode, cfg) = setup();
        episode.heading = std::f64::consts::PI;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = run_episode(&mut env, episode, &cfg, &mut rng, &mut |_: &[f64], _: &mut ChaCha8Rng| Ok([1.0, 1.0])).unwrap();
        assert_eq!(s.outcome, Outcome::Goal);
        // 14.5 m at 0.05 m per step.
        assert!((290..=291).contains(&s.steps), "{}", s.steps);
        assert!(s.path_length >= 14.5);
    }

    #[test]
    fn rejects_out_of_range_actions() {
        let (mut env, episode, cfg) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(run_episode(&mut env, episode, &cfg, &mut rng, &mut |_: &[f64], _: &mut ChaCha8Rng| Ok([1.5, 0.0])).is_err());
    }
}
