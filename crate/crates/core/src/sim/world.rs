use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotate::{ObjectId, ObjectSpec};
use crate::error::{Error, Result};
use crate::geom::{integrate_step, Point2, Pose2, Twist};

pub const WORLD_SCHEMA: &str = "lastmile.world";
pub const WORLD_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn square(half: f64) -> Self {
        Self {
            min_x: -half,
            min_y: -half,
            max_x: half,
            max_y: half,
        }
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub position: Point2,
}

/// Piecewise-linear motion of one object. Before the first waypoint the
/// object moves from its spec pose (at t = 0); after the last it holds still.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicScript {
    pub object: ObjectId,
    pub waypoints: Vec<Waypoint>,
}

impl DynamicScript {
    pub fn position_at(&self, start: Point2, t: f64) -> Point2 {
        let mut prev = Waypoint {
            t: 0.0,
            position: start,
        };
        for w in &self.waypoints {
            if t < w.t {
                if w.t <= prev.t {
                    return w.position;
                }
                let a = ((t - prev.t) / (w.t - prev.t)).clamp(0.0, 1.0);
                return Point2::new(
                    prev.position.x + a * (w.position.x - prev.position.x),
                    prev.position.y + a * (w.position.y - prev.position.y),
                );
            }
            prev = *w;
        }
        prev.position
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub arena: Bounds,
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub obstacles: Vec<Vec<Point2>>,
    #[serde(default)]
    pub dynamic_scripts: Vec<DynamicScript>,
}

impl World {
    pub fn empty(arena: Bounds) -> Self {
        Self {
            arena,
            objects: Vec::new(),
            obstacles: Vec::new(),
            dynamic_scripts: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids: Vec<ObjectId> = self.objects.iter().map(|o| o.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("duplicate object id in world"));
        }
        for o in &self.objects {
            o.validate()?;
            if !self.arena.contains(&o.planar()) {
                return Err(Error::config(format!("object {} outside arena", o.id)));
            }
        }
        for (k, set) in self.obstacles.iter().enumerate() {
            if set.iter().any(|p| !p.is_finite() || !self.arena.contains(p)) {
                return Err(Error::config(format!("obstacle {k} outside arena")));
            }
        }
        for s in &self.dynamic_scripts {
            if self.object(s.object).is_none() {
                return Err(Error::config(format!("script for unknown object {}", s.object)));
            }
            let mut last = 0.0;
            for w in &s.waypoints {
                if !(w.t >= last) || !w.position.is_finite() {
                    return Err(Error::config(format!(
                        "script for object {} is not time-monotone",
                        s.object
                    )));
                }
                last = w.t;
            }
        }
        Ok(())
    }

    pub fn object(&self, id: ObjectId) -> Option<&ObjectSpec> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_position(&self, id: ObjectId, t: f64) -> Option<Point2> {
        let o = self.object(id)?;
        Some(
            self.dynamic_scripts
                .iter()
                .find(|s| s.object == id)
                .map_or(o.planar(), |s| s.position_at(o.planar(), t)),
        )
    }

    pub fn obstacle_points(&self) -> impl Iterator<Item = &Point2> {
        self.obstacles.iter().flatten()
    }

    /// Static obstacle points plus sampled footprints of every object except `target`.
    pub fn planner_obstacles(&self, t: f64, target: Option<ObjectId>) -> Vec<Point2> {
        let mut pts: Vec<Point2> = self.obstacle_points().copied().collect();
        for o in &self.objects {
            if Some(o.id) == target {
                continue;
            }
            let c = self.object_position(o.id, t).expect("object exists");
            let n = 16;
            for k in 0..n {
                let a = std::f64::consts::TAU * k as f64 / n as f64;
                pts.push(Point2::new(
                    c.x + o.footprint_radius * a.cos(),
                    c.y + o.footprint_radius * a.sin(),
                ));
            }
        }
        pts
    }

    /// True when `robot` is within `robot_radius` of a static obstacle point or
    /// of the footprint of any object other than `target`.
    pub fn in_collision(&self, robot: &Point2, t: f64, robot_radius: f64, target: Option<ObjectId>) -> bool {
        if self
            .obstacle_points()
            .any(|p| p.distance(robot) < robot_radius)
        {
            return true;
        }
        self.objects.iter().any(|o| {
            Some(o.id) != target
                && self
                    .object_position(o.id, t)
                    .is_some_and(|c| c.distance(robot) < robot_radius + o.footprint_radius)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldFile {
    pub schema: String,
    pub version: u32,
    pub world: World,
    /// Recorded robot traversals, if the file carries any.
    #[serde(default)]
    pub paths: Vec<RecordedPath>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedPath {
    pub fps: f64,
    pub poses: Vec<Pose2>,
}

impl WorldFile {
    pub fn new(world: World) -> Self {
        Self {
            schema: WORLD_SCHEMA.into(),
            version: WORLD_VERSION,
            world,
            paths: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: WorldFile = serde_json::from_str(&text)?;
        if file.schema != WORLD_SCHEMA || file.version != WORLD_VERSION {
            return Err(Error::Schema {
                line: 1,
                message: format!("expected {WORLD_SCHEMA} v{WORLD_VERSION}, got {} v{}", file.schema, file.version),
            });
        }
        file.world.validate()?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Time of the simulated world. Object positions are a pure function of it.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WorldState {
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: WorldState,
    pub robot: Pose2,
    pub collision: bool,
}

pub fn step_world(
    world: &World,
    state: WorldState,
    robot: &Pose2,
    u: &Twist,
    dt: f64,
    robot_radius: f64,
    target: Option<ObjectId>,
) -> Result<StepOutcome> {
    let next = integrate_step(robot, u, dt)?;
    let state = WorldState {
        time: state.time + dt,
    };
    let collision = world.in_collision(&next.position(), state.time, robot_radius, target);
    Ok(StepOutcome {
        state,
        robot: next,
        collision,
    })
}
