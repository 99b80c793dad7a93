//! Declarative world descriptions (TOML) and start/goal sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::geometry::{point_in_polygon, point_segment_distance, Segment, Vec2};
use crate::error::{Error, Result};

pub const WORLD_FORMAT: &str = "sddpg-world";
pub const WORLD_VERSION: u32 = 1;

/// Rejection-sampling budget per episode.
const MAX_SAMPLE_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Bounds {
    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min[0] && p.x <= self.max[0] && p.y >= self.min[1] && p.y <= self.max[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Obstacle {
    /// Axis-aligned box.
    Box { min: [f64; 2], max: [f64; 2] },
    /// Simple polygon, vertices in order.
    Polygon { vertices: Vec<[f64; 2]> },
    /// Zero-thickness wall.
    Wall { from: [f64; 2], to: [f64; 2] },
}

impl Obstacle {
    fn outline(&self) -> Vec<Vec2> {
        match self {
            Obstacle::Box { min, max } => vec![
                Vec2::new(min[0], min[1]),
                Vec2::new(max[0], min[1]),
                Vec2::new(max[0], max[1]),
                Vec2::new(min[0], max[1]),
            ],
            Obstacle::Polygon { vertices } => vertices.iter().copied().map(Vec2::from).collect(),
            Obstacle::Wall { from, to } => vec![Vec2::from(*from), Vec2::from(*to)],
        }
    }

    fn is_closed(&self) -> bool {
        !matches!(self, Obstacle::Wall { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Region {
    Point { at: [f64; 2] },
    Rect { min: [f64; 2], max: [f64; 2] },
}

impl Region {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2 {
        match self {
            Region::Point { at } => Vec2::from(*at),
            Region::Rect { min, max } => {
                let x = if max[0] > min[0] { rng.random_range(min[0]..max[0]) } else { min[0] };
                let y = if max[1] > min[1] { rng.random_range(min[1]..max[1]) } else { min[1] };
                Vec2::new(x, y)
            }
        }
    }

    fn is_valid(&self) -> bool {
        match self {
            Region::Point { at } => at.iter().all(|v| v.is_finite()),
            Region::Rect { min, max } => min[0] <= max[0] && min[1] <= max[1],
        }
    }
}

/// File-level description of a navigation world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub format: String,
    pub version: u32,
    pub name: String,
    pub bounds: Bounds,
    /// Minimum start-goal distance in meters.
    pub min_separation: f64,
    /// Minimum obstacle distance for sampled start and goal points.
    #[serde(default = "default_clearance")]
    pub clearance: f64,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub start_regions: Vec<Region>,
    pub goal_regions: Vec<Region>,
}

fn default_clearance() -> f64 {
    0.5
}

impl WorldSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: WorldSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read world {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != WORLD_FORMAT || self.version != WORLD_VERSION {
            return Err(Error::Config(format!(
                "unsupported world header {} v{} (expected {WORLD_FORMAT} v{WORLD_VERSION})",
                self.format, self.version
            )));
        }
        if !(self.bounds.width() > 0.0 && self.bounds.height() > 0.0) {
            return Err(Error::Config("world bounds are empty".into()));
        }
        if !(self.min_separation >= 0.0) || !(self.clearance >= 0.0) {
            return Err(Error::Config("separation and clearance must be non-negative".into()));
        }
        if self.start_regions.is_empty() || self.goal_regions.is_empty() {
            return Err(Error::Config("world needs at least one start and one goal region".into()));
        }
        if !self.start_regions.iter().chain(&self.goal_regions).all(Region::is_valid) {
            return Err(Error::Config("malformed start/goal region".into()));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            let outline = o.outline();
            if (o.is_closed() && outline.len() < 3) || outline.iter().any(|p| !self.bounds.contains(*p)) {
                return Err(Error::Config(format!("obstacle {i} is malformed or leaves the bounds")));
            }
        }
        Ok(())
    }
}

/// A validated world with its geometry flattened into segments.
#[derive(Debug, Clone)]
pub struct World {
    pub spec: WorldSpec,
    segments: Vec<Segment>,
    solids: Vec<Vec<Vec2>>,
}

impl World {
    pub fn new(spec: WorldSpec) -> Result<Self> {
        spec.validate()?;
        let b = spec.bounds;
        let corners = [
            Vec2::new(b.min[0], b.min[1]),
            Vec2::new(b.max[0], b.min[1]),
            Vec2::new(b.max[0], b.max[1]),
            Vec2::new(b.min[0], b.max[1]),
        ];
        let mut segments: Vec<Segment> = (0..4).map(|i| Segment::new(corners[i], corners[(i + 1) % 4])).collect();
        let mut solids = Vec::new();
        for o in &spec.obstacles {
            let pts = o.outline();
            if o.is_closed() {
                segments.extend((0..pts.len()).map(|i| Segment::new(pts[i], pts[(i + 1) % pts.len()])));
                solids.push(pts);
            } else {
                segments.push(Segment::new(pts[0], pts[1]));
            }
        }
        Ok(World { spec, segments, solids })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        World::new(WorldSpec::from_toml(text)?)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn bounds(&self) -> Bounds {
        self.spec.bounds
    }

    pub fn inside_obstacle(&self, p: Vec2) -> bool {
        !self.spec.bounds.contains(p) || self.solids.iter().any(|poly| point_in_polygon(p, poly))
    }

    /// Distance from `p` to the nearest obstacle surface; zero inside a solid.
    pub fn obstacle_distance(&self, p: Vec2) -> f64 {
        if self.inside_obstacle(p) {
            return 0.0;
        }
        self.segments.iter().map(|s| point_segment_distance(p, s)).fold(f64::INFINITY, f64::min)
    }

    /// Mirror image across the vertical line `x = axis`.
    pub fn mirrored(&self, axis: f64) -> Result<World> {
        let m = |p: [f64; 2]| [2.0 * axis - p[0], p[1]];
        let mut spec = self.spec.clone();
        spec.bounds = Bounds {
            min: [2.0 * axis - self.spec.bounds.max[0], self.spec.bounds.min[1]],
            max: [2.0 * axis - self.spec.bounds.min[0], self.spec.bounds.max[1]],
        };
        spec.obstacles = self
            .spec
            .obstacles
            .iter()
            .map(|o| match o {
                Obstacle::Box { min, max } => Obstacle::Box { min: [2.0 * axis - max[0], min[1]], max: [2.0 * axis - min[0], max[1]] },
                Obstacle::Polygon { vertices } => Obstacle::Polygon { vertices: vertices.iter().rev().map(|&p| m(p)).collect() },
                Obstacle::Wall { from, to } => Obstacle::Wall { from: m(*from), to: m(*to) },
            })
            .collect();
        World::new(spec)
    }
}

/// Worlds shipped with the crate, addressable as `bundled:<name>`.
pub const BUNDLED_WORLDS: &[(&str, &str)] = &[
    ("desk-stage1", include_str!("../../worlds/desk-stage1.toml")),
    ("desk-stage2", include_str!("../../worlds/desk-stage2.toml")),
    ("desk-test", include_str!("../../worlds/desk-test.toml")),
    ("paper-env1", include_str!("../../worlds/paper-env1.toml")),
    ("paper-env2", include_str!("../../worlds/paper-env2.toml")),
    ("paper-env3", include_str!("../../worlds/paper-env3.toml")),
    ("paper-env4", include_str!("../../worlds/paper-env4.toml")),
    ("paper-test", include_str!("../../worlds/paper-test.toml")),
];

pub fn bundled_world(name: &str) -> Result<World> {
    let (_, text) = BUNDLED_WORLDS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Config(format!("no bundled world named {name:?}")))?;
    World::from_toml(text)
}

/// Resolves `bundled:<name>` or a file path (relative to `base`).
pub fn resolve_world(reference: &str, base: Option<&Path>) -> Result<World> {
    if let Some(name) = reference.strip_prefix("bundled:") {
        return bundled_world(name);
    }
    let path = Path::new(reference);
    let path = match base {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    };
    World::new(WorldSpec::load(&path)?)
}

/// Start pose and goal point of one episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub start: Vec2,
    pub heading: f64,
    pub goal: Vec2,
}

/// Rejection-samples a start/goal pair that honors the separation and
/// clearance constraints of the world.
pub fn sample_episode<R: Rng + ?Sized>(world: &World, rng: &mut R) -> Result<EpisodeSpec> {
    let spec = &world.spec;
    let clear = |p: Vec2| !world.inside_obstacle(p) && world.obstacle_distance(p) >= spec.clearance;
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let sr = &spec.start_regions[rng.random_range(0..spec.start_regions.len())];
        let gr = &spec.goal_regions[rng.random_range(0..spec.goal_regions.len())];
        let start = sr.sample(rng);
        let goal = gr.sample(rng);
        let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        if start.distance(goal) >= spec.min_separation && clear(start) && clear(goal) {
            return Ok(EpisodeSpec { start, heading, goal });
        }
    }
    Err(Error::Config(format!(
        "world {}: no valid start/goal pair after {MAX_SAMPLE_ATTEMPTS} attempts",
        spec.name
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn open_world(size: f64, sep: f64) -> WorldSpec {
        WorldSpec {
            format: WORLD_FORMAT.into(),
            version: WORLD_VERSION,
            name: "open".into(),
            bounds: Bounds { min: [0.0, 0.0], max: [size, size] },
            min_separation: sep,
            clearance: 0.5,
            obstacles: vec![],
            start_regions: vec![Region::Rect { min: [0.0, 0.0], max: [size, size] }],
            goal_regions: vec![Region::Rect { min: [0.0, 0.0], max: [size, size] }],
        }
    }

    #[test]
    fn bundled_worlds_are_valid_and_sampleable() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (name, _) in BUNDLED_WORLDS {
            let w = bundled_world(name).unwrap();
            for _ in 0..20 {
                sample_episode(&w, &mut rng).unwrap();
            }
        }
        assert!(bundled_world("nope").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut spec = open_world(10.0, 4.0);
        spec.obstacles.push(Obstacle::Polygon { vertices: vec![[2.0, 2.0], [3.0, 2.0], [2.5, 3.0]] });
        spec.obstacles.push(Obstacle::Wall { from: [5.0, 1.0], to: [5.0, 4.0] });
        let text = spec.to_toml().unwrap();
        assert_eq!(WorldSpec::from_toml(&text).unwrap(), spec);
    }

    #[test]
    fn rejects_bad_header_and_out_of_bounds() {
        let mut spec = open_world(10.0, 4.0);
        spec.version = 9;
        assert!(spec.validate().is_err());
        let mut spec = open_world(10.0, 4.0);
        spec.obstacles.push(Obstacle::Box { min: [9.0, 9.0], max: [11.0, 11.0] });
        assert!(spec.validate().is_err());
        let mut spec = open_world(10.0, 4.0);
        spec.goal_regions.clear();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn degenerate_regions_return_points() {
        let mut spec = open_world(10.0, 6.0);
        spec.start_regions = vec![Region::Point { at: [1.5, 1.5] }];
        spec.goal_regions = vec![Region::Point { at: [8.5, 1.5] }];
        let world = World::new(spec).unwrap();
        let ep = sample_episode(&world, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(ep.start, Vec2::new(1.5, 1.5));
        assert_eq!(ep.goal, Vec2::new(8.5, 1.5));
    }

    #[test]
    fn impossible_world_fails_bounded() {
        let mut spec = open_world(10.0, 20.0);
        spec.start_regions = vec![Region::Point { at: [5.0, 5.0] }];
        let world = World::new(spec).unwrap();
        assert!(matches!(sample_episode(&world, &mut ChaCha8Rng::seed_from_u64(0)), Err(Error::Config(_))));
    }

    #[test]
    fn start_inside_obstacle_is_rejected() {
        let mut spec = open_world(10.0, 1.0);
        spec.obstacles.push(Obstacle::Box { min: [1.0, 1.0], max: [3.0, 3.0] });
        spec.start_regions = vec![Region::Point { at: [2.0, 2.0] }, Region::Point { at: [8.0, 8.0] }];
        let world = World::new(spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            assert_eq!(sample_episode(&world, &mut rng).unwrap().start, Vec2::new(8.0, 8.0));
        }
    }

    #[test]
    fn separation_holds_statistically() {
        let world = World::new(open_world(20.0, 6.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let ep = sample_episode(&world, &mut rng).unwrap();
            assert!(ep.start.distance(ep.goal) >= 6.0);
        }
    }
}
