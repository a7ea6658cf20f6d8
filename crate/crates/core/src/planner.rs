//! State-lattice planner over fifteen constant-twist primitives.
//!
//! Each primitive is integrated for eight steps; its cost is the smallest
//! squared distance from any of its poses to the goal, plus a fixed penalty
//! when any pose comes closer than the robot radius to an obstacle point.
//! The planner also serves as the teacher that produces reference
//! trajectories for distillation.

use serde::{Deserialize, Serialize};

use crate::geom::{rollout, CommandSequence, Point2, Pose2, Twist, DEFAULT_DT};

pub const PRIMITIVE_COUNT: usize = 15;
pub const PRIMITIVE_STEPS: usize = 8;

const STANDARD_PRIMITIVES: [(f64, f64); PRIMITIVE_COUNT] = [
    (0.0, 0.0),
    (0.2, 0.0),
    (0.2, 0.3),
    (0.2, 0.6),
    (0.2, 0.9),
    (0.2, -0.3),
    (0.2, -0.6),
    (0.2, -0.9),
    (0.5, 0.0),
    (0.5, 0.3),
    (0.5, 0.6),
    (0.5, 0.9),
    (0.5, -0.3),
    (0.5, -0.6),
    (0.5, -0.9),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveSet {
    pub twists: Vec<Twist>,
    pub steps: usize,
    pub dt: f64,
}

impl Default for PrimitiveSet {
    fn default() -> Self {
        Self {
            twists: STANDARD_PRIMITIVES
                .iter()
                .map(|&(v, w)| Twist::new(v, w))
                .collect(),
            steps: PRIMITIVE_STEPS,
            dt: DEFAULT_DT,
        }
    }
}

impl PrimitiveSet {
    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub robot_radius: f64,
    pub collision_penalty: f64,
    #[serde(default)]
    pub primitives: PrimitiveSet,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            robot_radius: 0.3,
            collision_penalty: 1000.0,
            primitives: PrimitiveSet::default(),
        }
    }
}

/// Poses of every primitive, `out[j][i]` being pose `i + 1` of primitive `j`.
pub fn primitive_rollouts(p0: &Pose2, set: &PrimitiveSet) -> Vec<Vec<Pose2>> {
    set.twists
        .iter()
        .map(|u| {
            let seq = CommandSequence::constant(*u, set.steps, set.dt)
                .expect("primitive set has positive dt and steps");
            rollout(p0, &seq)
        })
        .collect()
}

/// Smallest distance from any trajectory pose to any obstacle point.
pub fn clearance(traj: &[Pose2], obstacles: &[Point2]) -> f64 {
    let mut best = f64::INFINITY;
    for p in traj {
        let pos = p.position();
        for o in obstacles {
            best = best.min(pos.distance_sq(o));
        }
    }
    best.sqrt()
}

pub fn primitive_cost(traj: &[Pose2], goal: Point2, obstacles: &[Point2], cfg: &PlannerConfig) -> f64 {
    let reach = traj
        .iter()
        .map(|p| p.position().distance_sq(&goal))
        .fold(f64::INFINITY, f64::min);
    let penalty = if clearance(traj, obstacles) < cfg.robot_radius {
        cfg.collision_penalty
    } else {
        0.0
    };
    reach + penalty
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDecision {
    pub index: usize,
    pub twist: Twist,
    pub costs: Vec<f64>,
}

/// Evaluates every primitive and keeps the cheapest; ties go to the lower index.
pub fn plan_step_detailed(
    p0: &Pose2,
    goal: Point2,
    obstacles: &[Point2],
    cfg: &PlannerConfig,
) -> PlanDecision {
    let costs: Vec<f64> = primitive_rollouts(p0, &cfg.primitives)
        .iter()
        .map(|traj| primitive_cost(traj, goal, obstacles, cfg))
        .collect();
    let mut index = 0;
    for (j, c) in costs.iter().enumerate() {
        if *c < costs[index] {
            index = j;
        }
    }
    PlanDecision {
        index,
        twist: cfg.primitives.twists[index],
        costs,
    }
}

pub fn plan_step(p0: &Pose2, goal: Point2, obstacles: &[Point2], cfg: &PlannerConfig) -> Twist {
    plan_step_detailed(p0, goal, obstacles, cfg).twist
}

/// Closed-loop reference trajectory: `steps` re-planned primitive steps.
pub fn teacher_trajectory(
    p0: &Pose2,
    goal: Point2,
    obstacles: &[Point2],
    cfg: &PlannerConfig,
    steps: usize,
) -> Vec<Pose2> {
    let dt = cfg.primitives.dt;
    let mut p = *p0;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let u = plan_step(&p, goal, obstacles, cfg);
        p = crate::geom::integrate_step(&p, &u, dt).expect("finite planner state");
        out.push(p);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Success,
    Collision,
    Timeout,
}

/// One line of an exported planner trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerTraceRow {
    pub step: usize,
    pub chosen: usize,
    pub costs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecedingOutcome {
    /// Executed poses, starting with `p0`.
    pub trajectory: Vec<Pose2>,
    pub commands: Vec<Twist>,
    pub termination: Termination,
    pub trace: Vec<PlannerTraceRow>,
}

/// Success is `distance <= success_radius`; collision is any obstacle point
/// strictly closer than the robot radius.
pub fn receding_horizon_control(
    p0: &Pose2,
    goal: Point2,
    obstacles: &[Point2],
    cfg: &PlannerConfig,
    max_steps: usize,
    success_radius: f64,
) -> RecedingOutcome {
    let dt = cfg.primitives.dt;
    let mut p = *p0;
    let mut trajectory = vec![p];
    let mut commands = Vec::new();
    let mut trace = Vec::new();
    let collided = |p: &Pose2| clearance(std::slice::from_ref(p), obstacles) < cfg.robot_radius;
    let reached = |p: &Pose2| p.position().distance(&goal) <= success_radius;

    let mut termination = Termination::Timeout;
    if collided(&p) {
        termination = Termination::Collision;
    } else if reached(&p) {
        termination = Termination::Success;
    } else {
        for step in 0..max_steps {
            let d = plan_step_detailed(&p, goal, obstacles, cfg);
            p = crate::geom::integrate_step(&p, &d.twist, dt).expect("finite planner state");
            trace.push(PlannerTraceRow {
                step,
                chosen: d.index,
                costs: d.costs,
            });
            commands.push(d.twist);
            trajectory.push(p);
            if collided(&p) {
                termination = Termination::Collision;
                break;
            }
            if reached(&p) {
                termination = Termination::Success;
                break;
            }
        }
    }
    RecedingOutcome {
        trajectory,
        commands,
        termination,
        trace,
    }
}

pub fn write_trace_jsonl<W: std::io::Write>(rows: &[PlannerTraceRow], mut w: W) -> crate::Result<()> {
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
