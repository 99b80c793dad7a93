use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::robot::{step_kinematics, KinematicsConfig, Pose, RobotState};
use super::world::{EpisodeSpec, World};

/// One robot in one world; owns the pose between execution steps.
#[derive(Debug, Clone)]
pub struct NavEnv {
    pub world: World,
    pub kinematics: KinematicsConfig,
    episode: EpisodeSpec,
    pose: Pose,
    linear: f64,
    angular: f64,
    steps: usize,
}

impl NavEnv {
    pub fn new(world: World, kinematics: KinematicsConfig, episode: EpisodeSpec) -> Self {
        let pose = Pose { x: episode.start.x, y: episode.start.y, theta: episode.heading };
        NavEnv { world, kinematics, episode, pose, linear: 0.0, angular: 0.0, steps: 0 }
    }

    /// Places the robot at rest on the episode start and observes.
    pub fn reset<R: Rng + ?Sized>(&mut self, episode: EpisodeSpec, rng: &mut R) -> RobotState {
        self.episode = episode;
        self.pose = Pose { x: episode.start.x, y: episode.start.y, theta: episode.heading };
        self.linear = 0.0;
        self.angular = 0.0;
        self.steps = 0;
        self.observe(rng)
    }

    pub fn step<R: Rng + ?Sized>(&mut self, v_left: f64, v_right: f64, rng: &mut R) -> RobotState {
        let (pose, v, w) = step_kinematics(self.pose, v_left, v_right, &self.kinematics);
        self.pose = pose;
        self.linear = v;
        self.angular = w;
        self.steps += 1;
        self.observe(rng)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn episode(&self) -> &EpisodeSpec {
        &self.episode
    }

    fn observe<R: Rng + ?Sized>(&self, rng: &mut R) -> RobotState {
        let lidar = &self.kinematics.lidar;
        let mut state = RobotState::observe(self.pose, self.linear, self.angular, self.episode.goal, &self.world, lidar);
        if lidar.noise_std > 0.0 {
            let noise = Normal::new(0.0, lidar.noise_std).expect("finite noise std");
            for r in &mut state.lidar {
                *r = (*r + noise.sample(rng)).clamp(lidar.min_range, lidar.max_range);
            }
        }
        state
    }
}
