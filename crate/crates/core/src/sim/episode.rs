use serde::{Deserialize, Serialize};

use super::world::{step_world, World, WorldState};
use crate::annotate::{Camera, ObjectId};
use crate::error::{Error, Result};
use crate::geom::{Pose2, Twist};
use crate::planner::{plan_step, PlannerConfig, Termination};
use crate::policy::{
    encode_instruction, policy_forward, Detection, InstructionEmbedding, ObservationBlock,
    ObservationFeature, PolicyParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeCategory {
    Simple,
    Noisy,
    MultiObject,
    Dynamic,
    Obstacle,
}

impl EpisodeCategory {
    pub const ALL: [EpisodeCategory; 5] = [
        EpisodeCategory::Simple,
        EpisodeCategory::Noisy,
        EpisodeCategory::MultiObject,
        EpisodeCategory::Dynamic,
        EpisodeCategory::Obstacle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EpisodeCategory::Simple => "simple",
            EpisodeCategory::Noisy => "noisy",
            EpisodeCategory::MultiObject => "multi_object",
            EpisodeCategory::Dynamic => "dynamic",
            EpisodeCategory::Obstacle => "obstacle",
        }
    }
}

fn default_success_radius() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub id: usize,
    pub world: World,
    pub start: Pose2,
    pub instruction: String,
    pub target: ObjectId,
    pub category: EpisodeCategory,
    pub max_steps: usize,
    #[serde(default = "default_success_radius")]
    pub success_radius: f64,
}

impl Episode {
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        if self.world.object(self.target).is_none() {
            return Err(Error::config(format!(
                "episode {}: target {} not in world",
                self.id, self.target
            )));
        }
        if !(self.success_radius > 0.0) {
            return Err(Error::config(format!("episode {}: success radius must be positive", self.id)));
        }
        if self.instruction.trim().is_empty() {
            return Err(Error::config(format!("episode {}: empty instruction", self.id)));
        }
        Ok(())
    }
}

/// What drives the robot during an episode.
#[derive(Debug, Clone, Copy)]
pub enum Controller<'a> {
    Policy(&'a PolicyParams),
    /// Privileged baseline: plans toward the true target position.
    Planner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub camera: Camera,
    pub planner: PlannerConfig,
    pub dt: f64,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            camera: Camera::default(),
            planner: PlannerConfig::default(),
            dt: crate::geom::DEFAULT_DT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub id: usize,
    pub category: EpisodeCategory,
    pub termination: Termination,
    pub steps: usize,
    pub final_distance: f64,
    /// Robot poses, starting at the episode start.
    pub trajectory: Vec<Pose2>,
    /// `commands[k]` moves `trajectory[k]` to `trajectory[k + 1]`.
    pub commands: Vec<Twist>,
    pub dt: f64,
}

impl EpisodeRecord {
    pub fn success(&self) -> bool {
        self.termination == Termination::Success
    }
}

/// Ground-truth detections of every object whose center lies in the camera
/// frustum, in the robot frame.
pub fn detect(world: &World, time: f64, robot: &Pose2, camera: &Camera) -> Vec<Detection> {
    world
        .objects
        .iter()
        .filter_map(|o| {
            let rel = robot.relative_point(&world.object_position(o.id, time)?);
            camera.sees(&rel).then(|| Detection {
                rel,
                descriptor: o.descriptor(),
            })
        })
        .collect()
}

/// Builds the policy input for the current frame, carrying `previous`
/// detections as the history block. Returns the current detections so the
/// caller can pass them back next step.
pub fn observe(
    world: &World,
    state: WorldState,
    robot: &Pose2,
    camera: &Camera,
    instr: &InstructionEmbedding,
    previous: &[Detection],
    slots: usize,
) -> Result<(ObservationFeature, Vec<Detection>)> {
    let current = detect(world, state.time, robot, camera);
    let feature = ObservationFeature::new(
        ObservationBlock::from_detections(&current, instr, slots)?,
        ObservationBlock::from_detections(previous, instr, slots)?,
    );
    Ok((feature, current))
}

fn reached(ep: &Episode, robot: &Pose2, time: f64) -> (bool, f64) {
    let target = ep.world.object_position(ep.target, time).expect("validated target");
    let d = robot.position().distance(&target);
    (ep.world.arena.contains(&target) && d <= ep.success_radius, d)
}

/// Receding-horizon loop: observe, plan or infer, apply the first command.
pub fn run_episode(ep: &Episode, controller: Controller<'_>, params: &RunParams) -> Result<EpisodeRecord> {
    ep.validate()?;
    let instr = match controller {
        Controller::Policy(p) => Some(encode_instruction(&ep.instruction, p.config.embed_dim)?),
        Controller::Planner => None,
    };
    let radius = params.planner.robot_radius;
    let mut state = WorldState::default();
    let mut robot = ep.start;
    let mut previous: Vec<Detection> = Vec::new();
    let mut trajectory = vec![robot];
    let mut commands = Vec::new();

    let mut termination = Termination::Timeout;
    let (ok, mut dist) = reached(ep, &robot, 0.0);
    if ep.world.in_collision(&robot.position(), 0.0, radius, Some(ep.target)) {
        termination = Termination::Collision;
    } else if ok {
        termination = Termination::Success;
    } else {
        for _ in 0..ep.max_steps {
            let u = match (controller, &instr) {
                (Controller::Policy(p), Some(e)) => {
                    let (obs, current) =
                        observe(&ep.world, state, &robot, &params.camera, e, &previous, p.config.slots)?;
                    previous = current;
                    policy_forward(p, &obs, e)?.first()
                }
                _ => {
                    let goal = ep.world.object_position(ep.target, state.time).expect("validated target");
                    let obstacles = ep.world.planner_obstacles(state.time, Some(ep.target));
                    plan_step(&robot, goal, &obstacles, &params.planner)
                }
            };
            let out = step_world(&ep.world, state, &robot, &u, params.dt, radius, Some(ep.target))?;
            state = out.state;
            robot = out.robot;
            trajectory.push(robot);
            commands.push(u);
            let (ok, d) = reached(ep, &robot, state.time);
            dist = d;
            if out.collision {
                termination = Termination::Collision;
                break;
            }
            if ok {
                termination = Termination::Success;
                break;
            }
        }
    }
    Ok(EpisodeRecord {
        id: ep.id,
        category: ep.category,
        termination,
        steps: commands.len(),
        final_distance: dist,
        trajectory,
        commands,
        dt: params.dt,
    })
}
