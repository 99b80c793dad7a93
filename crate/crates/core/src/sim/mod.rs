//! 2D navigation simulator standing in for the robot and its laser scanner.

pub mod env;
pub mod geometry;
pub mod robot;
pub mod world;

pub use env::NavEnv;
pub use geometry::{Segment, Vec2};
pub use robot::{
    check_collision, make_observation, raycast, step_kinematics, KinematicsConfig, LidarConfig, Observation,
    ObservationConfig, Pose, RobotState, OBSERVATION_CHANNELS,
};
pub use world::{bundled_world, resolve_world, sample_episode, EpisodeSpec, Obstacle, Region, World, WorldSpec};
