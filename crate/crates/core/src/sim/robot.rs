//! Differential-drive kinematics, the front-facing lidar fan, collision
//! distance and the normalized observation fed to the actors.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::geometry::{ray_segment, wrap_angle, Vec2};
use super::world::World;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarConfig {
    pub beams: usize,
    /// Total field of view in degrees, centered on the heading.
    pub fov_deg: f64,
    pub min_range: f64,
    pub max_range: f64,
    /// Standard deviation of additive Gaussian range noise (m).
    #[serde(default)]
    pub noise_std: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        LidarConfig { beams: 18, fov_deg: 180.0, min_range: 0.2, max_range: 40.0, noise_std: 0.0 }
    }
}

impl LidarConfig {
    /// Beam angles relative to the heading, right to left. Each beam sits at
    /// the center of its angular sector.
    pub fn beam_offsets(&self) -> Vec<f64> {
        let sector = self.fov_deg / self.beams as f64;
        (0..self.beams)
            .map(|i| (-self.fov_deg / 2.0 + sector * (i as f64 + 0.5)).to_radians())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicsConfig {
    pub wheel_separation: f64,
    pub robot_radius: f64,
    /// Duration of one execution step (s).
    pub dt: f64,
    pub lidar: LidarConfig,
}

impl Default for KinematicsConfig {
    fn default() -> Self {
        KinematicsConfig { wheel_separation: 0.23, robot_radius: 0.175, dt: 0.1, lidar: LidarConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Integrates one step of differential-drive motion exactly along its arc.
/// Returns the new pose with the body linear and angular velocity.
pub fn step_kinematics(pose: Pose, v_left: f64, v_right: f64, cfg: &KinematicsConfig) -> (Pose, f64, f64) {
    let v = 0.5 * (v_left + v_right);
    let w = (v_right - v_left) / cfg.wheel_separation;
    let dt = cfg.dt;
    let theta = pose.theta;
    let next = if (w * dt).abs() < 1e-12 {
        Pose { x: pose.x + v * dt * theta.cos(), y: pose.y + v * dt * theta.sin(), theta }
    } else {
        let r = v / w;
        let th1 = theta + w * dt;
        Pose {
            x: pose.x + r * (th1.sin() - theta.sin()),
            y: pose.y - r * (th1.cos() - theta.cos()),
            theta: wrap_angle(th1),
        }
    };
    (next, v, w)
}

/// Noise-free lidar ranges, right to left, clamped to the sensor limits.
pub fn raycast(pose: Pose, world: &World, lidar: &LidarConfig) -> Vec<f64> {
    let origin = pose.position();
    lidar
        .beam_offsets()
        .into_iter()
        .map(|offset| {
            let dir = Vec2::from_angle(pose.theta + offset);
            world
                .segments()
                .iter()
                .filter_map(|s| ray_segment(origin, dir, s))
                .fold(lidar.max_range, f64::min)
                .clamp(lidar.min_range, lidar.max_range)
        })
        .collect()
}

/// Distance to the nearest obstacle surface and whether it is below `threshold`.
pub fn check_collision(position: Vec2, world: &World, threshold: f64) -> (bool, f64) {
    let d = world.obstacle_distance(position);
    (d < threshold, d)
}

/// Full robot state at one execution step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose,
    /// Linear velocity (m/s).
    pub linear: f64,
    /// Angular velocity (rad/s).
    pub angular: f64,
    pub goal_dis: f64,
    /// Bearing of the goal relative to the heading, in `(−π, π]`.
    pub goal_dir: f64,
    pub lidar: Vec<f64>,
    /// Distance to the nearest obstacle surface.
    pub obstacle_dis: f64,
}

impl RobotState {
    pub fn observe(pose: Pose, linear: f64, angular: f64, goal: Vec2, world: &World, lidar: &LidarConfig) -> Self {
        let delta = goal - pose.position();
        RobotState {
            pose,
            linear,
            angular,
            goal_dis: delta.norm(),
            goal_dir: wrap_angle(delta.y.atan2(delta.x) - pose.theta),
            lidar: raycast(pose, world, lidar),
            obstacle_dis: world.obstacle_distance(pose.position()),
        }
    }
}

/// Channel layout of the encoder input. Bump when the layout changes.
pub const OBSERVATION_LAYOUT_VERSION: u32 = 1;
/// `[G_dis, G_dir⁺, G_dir⁻, ν, ω⁺, ω⁻, S₁ … S₁₈]`.
pub const OBSERVATION_CHANNELS: usize = 24;

/// Physical ranges mapped onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationConfig {
    pub goal_dis_cap: f64,
    pub lidar_min: f64,
    pub lidar_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

impl ObservationConfig {
    /// Angular range follows from the wheel-speed range.
    pub fn new(goal_dis_cap: f64, lidar: &LidarConfig, v_min: f64, v_max: f64, wheel_separation: f64) -> Self {
        ObservationConfig {
            goal_dis_cap,
            lidar_min: lidar.min_range,
            lidar_max: lidar.max_range,
            v_min,
            v_max,
            omega_max: (v_max - v_min) / wheel_separation,
        }
    }
}

/// Normalized encoder channels; the flag reports whether any raw value had
/// to be clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub channels: Vec<f64>,
    pub clamped: bool,
}

pub fn make_observation(state: &RobotState, cfg: &ObservationConfig) -> Observation {
    let mut clamped = false;
    let mut unit = |x: f64| {
        if !(0.0..=1.0).contains(&x) {
            clamped = true;
        }
        x.clamp(0.0, 1.0)
    };
    let mut channels = Vec::with_capacity(6 + state.lidar.len());
    channels.push(unit(state.goal_dis / cfg.goal_dis_cap));
    channels.push(unit(state.goal_dir.max(0.0) / PI));
    channels.push(unit((-state.goal_dir).max(0.0) / PI));
    channels.push(unit((state.linear - cfg.v_min) / (cfg.v_max - cfg.v_min)));
    channels.push(unit(state.angular.max(0.0) / cfg.omega_max));
    channels.push(unit((-state.angular).max(0.0) / cfg.omega_max));
    let span = cfg.lidar_max - cfg.lidar_min;
    for &r in &state.lidar {
        channels.push(unit((r - cfg.lidar_min) / span));
    }
    Observation { channels, clamped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::world::{Bounds, Obstacle, Region, WorldSpec, WORLD_FORMAT, WORLD_VERSION};

    fn world(size: f64, obstacles: Vec<Obstacle>) -> World {
        World::new(WorldSpec {
            format: WORLD_FORMAT.into(),
            version: WORLD_VERSION,
            name: "t".into(),
            bounds: Bounds { min: [0.0, 0.0], max: [size, size] },
            min_separation: 0.0,
            clearance: 0.0,
            obstacles,
            start_regions: vec![Region::Point { at: [1.0, 1.0] }],
            goal_regions: vec![Region::Point { at: [2.0, 2.0] }],
        })
        .unwrap()
    }

    #[test]
    fn straight_motion() {
        let cfg = KinematicsConfig::default();
        let (p, v, w) = step_kinematics(Pose { x: 1.0, y: 2.0, theta: 0.3 }, 0.5, 0.5, &cfg);
        assert_eq!((v, w), (0.5, 0.0));
        assert!((Vec2::new(p.x - 1.0, p.y - 2.0).norm() - 0.05).abs() < 1e-15);
        assert_eq!(p.theta, 0.3);
    }

    #[test]
    fn rotation_in_place() {
        let cfg = KinematicsConfig::default();
        let (p, v, w) = step_kinematics(Pose::default(), -0.2, 0.2, &cfg);
        assert_eq!(v, 0.0);
        assert!((w - 0.4 / 0.23).abs() < 1e-12);
        assert!(p.x.abs() < 1e-15 && p.y.abs() < 1e-15);
        assert!((p.theta - 0.4 / 0.23 * 0.1).abs() < 1e-12);
    }

    #[test]
    fn arc_matches_fine_euler() {
        let cfg = KinematicsConfig::default();
        let start = Pose { x: 0.5, y: -0.2, theta: 1.1 };
        let (p, _, w) = step_kinematics(start, 0.1, 0.3, &cfg);
        assert!((w - 0.869565).abs() < 1e-6);
        let (mut x, mut y, mut th) = (start.x, start.y, start.theta);
        let h = cfg.dt / 1000.0;
        for _ in 0..1000 {
            // midpoint heading keeps the oracle second-order accurate
            let mid = th + 0.5 * w * h;
            x += 0.2 * h * mid.cos();
            y += 0.2 * h * mid.sin();
            th += w * h;
        }
        assert!((p.x - x).abs() < 1e-6 && (p.y - y).abs() < 1e-6);
    }

    #[test]
    fn lidar_beam_layout() {
        let off = LidarConfig::default().beam_offsets();
        assert_eq!(off.len(), 18);
        assert!((off[0] + 85f64.to_radians()).abs() < 1e-12);
        assert!((off[17] - 85f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn empty_world_ranges_are_analytic() {
        let w = world(20.0, vec![]);
        let lidar = LidarConfig::default();
        let ranges = raycast(Pose { x: 10.0, y: 10.0, theta: 0.0 }, &w, &lidar);
        for (r, a) in ranges.iter().zip(lidar.beam_offsets()) {
            let expect = if a.abs() < PI / 4.0 { 10.0 / a.cos() } else { 10.0 / a.sin().abs() };
            assert!((r - expect).abs() < 1e-9, "{r} vs {expect}");
        }
    }

    #[test]
    fn wall_ahead() {
        let w = world(10.0, vec![Obstacle::Wall { from: [3.0, 0.5], to: [3.0, 9.5] }]);
        let ranges = raycast(Pose { x: 2.0, y: 5.0, theta: 0.0 }, &w, &LidarConfig::default());
        // the two central beams straddle the heading at ±5°
        let expect = 1.0 / 5f64.to_radians().cos();
        assert!((ranges[8] - expect).abs() < 1e-12 && (ranges[9] - expect).abs() < 1e-12);
        let one_beam = LidarConfig { beams: 1, fov_deg: 10.0, ..LidarConfig::default() };
        assert_eq!(raycast(Pose { x: 2.0, y: 5.0, theta: 0.0 }, &w, &one_beam), vec![1.0]);
    }

    #[test]
    fn ranges_are_clamped() {
        let w = world(100.0, vec![Obstacle::Box { min: [50.1, 49.0], max: [51.0, 51.0] }]);
        let ranges = raycast(Pose { x: 50.0, y: 50.0, theta: 0.0 }, &w, &LidarConfig::default());
        assert!(ranges.iter().all(|&r| (0.2..=40.0).contains(&r)));
        assert_eq!(ranges[9], 0.2);
        assert_eq!(ranges[0], 40.0);
    }

    #[test]
    fn collision_threshold() {
        let w = world(10.0, vec![]);
        assert_eq!(check_collision(Vec2::new(5.0, 5.0), &w, 0.35), (false, 5.0));
        let (hit, d) = check_collision(Vec2::new(0.3, 5.0), &w, 0.35);
        assert!(hit && (d - 0.3).abs() < 1e-12);
    }

    fn state(goal_dis: f64, goal_dir: f64, lidar: f64) -> RobotState {
        RobotState {
            pose: Pose::default(),
            linear: 0.05,
            angular: 0.0,
            goal_dis,
            goal_dir,
            lidar: vec![lidar; 18],
            obstacle_dis: 1.0,
        }
    }

    #[test]
    fn observation_normalization() {
        let lidar = LidarConfig::default();
        let cfg = ObservationConfig::new(20.0, &lidar, 0.05, 0.5, 0.23);
        let o = make_observation(&state(6.0, 0.0, 40.0), &cfg);
        assert_eq!(o.channels.len(), OBSERVATION_CHANNELS);
        assert!((o.channels[0] - 0.3).abs() < 1e-15);
        assert_eq!((o.channels[1], o.channels[2]), (0.0, 0.0));
        assert!(o.channels[6..].iter().all(|&c| c == 1.0));
        assert!(!o.clamped);
        let o = make_observation(&state(6.0, -PI / 2.0, 0.2), &cfg);
        assert_eq!((o.channels[1], o.channels[2]), (0.0, 0.5));
        assert!(o.channels[6..].iter().all(|&c| c == 0.0));
        let o = make_observation(&state(30.0, 0.0, 1.0), &cfg);
        assert!(o.clamped && o.channels[0] == 1.0);
    }
}
