//! Topological memory of a prior traversal and goal-node selection.
//!
//! Nodes are visited in recorded order. Temporal distance between the robot
//! and a node is approximated by Euclidean distance.

use serde::{Deserialize, Serialize};

use super::episode::{observe, Controller, RunParams};
use super::world::{step_world, World, WorldState};
use crate::annotate::{render_frame, Camera, ObjectId};
use crate::error::{Error, Result};
use crate::geom::{Point2, Pose2, Twist};
use crate::planner::{plan_step, Termination};
use crate::policy::{cosine, encode_instruction, policy_forward, Detection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeObject {
    pub descriptor: String,
    pub embedding: Vec<f64>,
    pub visibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoNode {
    pub pose: Pose2,
    pub objects: Vec<NodeObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoMemory {
    nodes: Vec<TopoNode>,
}

impl TopoMemory {
    pub fn new(nodes: Vec<TopoNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::domain("topological memory needs at least one node"));
        }
        Ok(Self { nodes })
    }

    /// Renders each pose and stores the descriptor embedding and visibility
    /// of every object with a visible pixel.
    pub fn record(world: &World, poses: &[Pose2], camera: &Camera, embed_dim: usize) -> Result<Self> {
        let nodes = poses
            .iter()
            .map(|p| {
                let frame = render_frame(world, 0.0, p, camera);
                let objects = frame
                    .masks
                    .iter()
                    .map(|m| {
                        let o = world.object(m.object).expect("mask of a world object");
                        let descriptor = o.descriptor();
                        Ok(NodeObject {
                            embedding: encode_instruction(&descriptor, embed_dim)?.as_slice().to_vec(),
                            descriptor,
                            visibility: m.visibility,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(TopoNode { pose: *p, objects })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[TopoNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes ordered by distance to `p`; ties keep the lower index.
    pub fn nearest(&self, p: &Point2) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, n) in self.nodes.iter().enumerate() {
            let d = n.pose.position().distance_sq(p);
            if d < best_d {
                best = k;
                best_d = d;
            }
        }
        best
    }

    fn embed_dim(&self) -> Option<usize> {
        self.nodes
            .iter()
            .flat_map(|n| n.objects.first())
            .map(|o| o.embedding.len())
            .next()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeScores {
    pub scores: Vec<f64>,
    pub best: usize,
}

/// Per node, the best visibility-weighted cosine between the instruction
/// and a visible object; negative similarities count as zero.
pub fn score_nodes(memory: &TopoMemory, instr: &[f64]) -> NodeScores {
    let scores: Vec<f64> = memory
        .nodes
        .iter()
        .map(|n| {
            n.objects
                .iter()
                .map(|o| cosine(instr, &o.embedding).max(0.0) * o.visibility)
                .fold(0.0, f64::max)
        })
        .collect();
    let mut best = 0;
    for (k, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = k;
        }
    }
    NodeScores { scores, best }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub step: usize,
    pub node: usize,
    pub pose: Pose2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongDistanceOutcome {
    pub scores: NodeScores,
    pub switches: Vec<SwitchEvent>,
    pub termination: Termination,
    pub final_distance: f64,
    pub trajectory: Vec<Pose2>,
    pub commands: Vec<Twist>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongDistanceParams {
    pub run: RunParams,
    pub max_steps: usize,
    pub success_radius: f64,
    /// Distance at which a route node counts as reached.
    pub waypoint_radius: f64,
}

impl Default for LongDistanceParams {
    fn default() -> Self {
        Self {
            run: RunParams::default(),
            max_steps: 300,
            success_radius: 0.2,
            waypoint_radius: 0.4,
        }
    }
}

/// Follows memory nodes toward the best-scoring node with the planner, then
/// hands over to `last_mile` once the nearest node is the selected one.
#[allow(clippy::too_many_arguments)]
pub fn long_distance_navigate(
    world: &World,
    memory: &TopoMemory,
    start: Pose2,
    instruction: &str,
    target: ObjectId,
    last_mile: Controller<'_>,
    params: &LongDistanceParams,
) -> Result<LongDistanceOutcome> {
    world.validate()?;
    if world.object(target).is_none() {
        return Err(Error::config(format!("target {target} not in world")));
    }
    let dim = match last_mile {
        Controller::Policy(p) => p.config.embed_dim,
        Controller::Planner => memory.embed_dim().unwrap_or(crate::policy::DEFAULT_EMBED_DIM),
    };
    let instr = encode_instruction(instruction, dim)?;
    let scores = score_nodes(memory, instr.as_slice());
    let selected = scores.best;
    let radius = params.run.planner.robot_radius;
    let target_at = |t: f64| world.object_position(target, t).expect("target checked");
    let reached = |p: &Pose2, t: f64| {
        let c = target_at(t);
        let d = p.position().distance(&c);
        (world.arena.contains(&c) && d <= params.success_radius, d)
    };

    let mut state = WorldState::default();
    let mut robot = start;
    let mut trajectory = vec![robot];
    let mut commands = Vec::new();
    let mut switches = Vec::new();
    let mut previous: Vec<Detection> = Vec::new();
    let mut waypoint = memory.nearest(&robot.position());
    let (ok, mut dist) = reached(&robot, 0.0);
    let mut termination = if ok { Termination::Success } else { Termination::Timeout };

    if !ok {
        for step in 0..params.max_steps {
            let nearest = memory.nearest(&robot.position());
            if switches.is_empty() && nearest == selected {
                switches.push(SwitchEvent {
                    step,
                    node: nearest,
                    pose: robot,
                });
            }
            let u = if switches.is_empty() {
                let node = memory.nodes[waypoint].pose.position();
                if waypoint != selected && robot.position().distance(&node) <= params.waypoint_radius {
                    waypoint = if selected > waypoint { waypoint + 1 } else { waypoint - 1 };
                }
                let goal = memory.nodes[waypoint].pose.position();
                plan_step(&robot, goal, &world.planner_obstacles(state.time, None), &params.run.planner)
            } else {
                match last_mile {
                    Controller::Policy(p) => {
                        let (obs, current) =
                            observe(world, state, &robot, &params.run.camera, &instr, &previous, p.config.slots)?;
                        previous = current;
                        policy_forward(p, &obs, &instr)?.first()
                    }
                    Controller::Planner => plan_step(
                        &robot,
                        target_at(state.time),
                        &world.planner_obstacles(state.time, Some(target)),
                        &params.run.planner,
                    ),
                }
            };
            let out = step_world(world, state, &robot, &u, params.run.dt, radius, Some(target))?;
            state = out.state;
            robot = out.robot;
            trajectory.push(robot);
            commands.push(u);
            let (ok, d) = reached(&robot, state.time);
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
    Ok(LongDistanceOutcome {
        scores,
        switches,
        termination,
        final_distance: dist,
        trajectory,
        commands,
    })
}
