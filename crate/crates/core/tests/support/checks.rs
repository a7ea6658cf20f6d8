//! Property checks that compare the library against the oracles. Each
//! returns a measured summary so callers can assert or report it.

use std::time::{Duration, Instant};

use lastmile_core::annotate::{
    annotate_dataset, read_dataset, validate_dataset, write_dataset, AnnotateConfig, Camera, DatasetHeader,
    PromptConfig, SyntheticBackend,
};
use lastmile_core::geom::{rollout, CommandSequence, Point2, Pose2, Twist};
use lastmile_core::objective::{objective_gradient, total_objective, ObjectiveConfig};
use lastmile_core::planner::{plan_step, plan_step_detailed, PlannerConfig};
use lastmile_core::policy::{
    encode_instruction, policy_backward, policy_forward, ObservationBlock, ObservationFeature, PolicyConfig,
    PolicyParams,
};
use lastmile_core::sim::scenario::{dataset_sequences, long_distance_world, DatasetScenario, ScenarioConfig};
use lastmile_core::sim::{long_distance_navigate, Controller, LongDistanceParams, TopoMemory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracles;

pub const GRAD_RTOL: f64 = 1e-4;
pub const CHAIN_RTOL: f64 = 1e-3;
pub const GRAD_BUDGET: Duration = Duration::from_secs(30);
pub const FD_STEP: f64 = 1e-6;
pub const KINEMATIC_TOL: f64 = 1e-4;
pub const EULER_DT: f64 = 1e-5;
pub const PLANNER_COST_TOL: f64 = 1e-9;
pub const LABEL_SLACK: f64 = 1e-9;
pub const LABEL_FRACTION: f64 = 0.95;

fn random_pose(rng: &mut ChaCha8Rng, half: f64) -> Pose2 {
    Pose2::new(
        rng.random_range(-half..half),
        rng.random_range(-half..half),
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
    )
}

fn random_sequence(rng: &mut ChaCha8Rng, n: usize) -> CommandSequence {
    let cmds = (0..n)
        .map(|_| Twist::new(rng.random_range(0.0..0.5), rng.random_range(-1.0..1.0)))
        .collect();
    CommandSequence::new(cmds, 0.333).unwrap()
}

fn flatten(seq: &CommandSequence) -> Vec<f64> {
    seq.commands().iter().flat_map(|u| [u.v, u.omega]).collect()
}

fn unflatten(x: &[f64], dt: f64) -> CommandSequence {
    CommandSequence::new(x.chunks_exact(2).map(|p| Twist::new(p[0], p[1])).collect(), dt).unwrap()
}

#[derive(Debug, Clone)]
pub struct GradientSummary {
    pub seeds: usize,
    pub objective_worst: f64,
    pub backward_worst: f64,
    pub chain_worst: f64,
    pub elapsed: Duration,
}

impl GradientSummary {
    pub fn passed(&self) -> bool {
        self.seeds >= 100
            && self.objective_worst <= GRAD_RTOL
            && self.backward_worst <= GRAD_RTOL
            && self.chain_worst <= CHAIN_RTOL
            && self.elapsed < GRAD_BUDGET
    }
}

fn random_observation(rng: &mut ChaCha8Rng, slots: usize) -> ObservationFeature {
    let block = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(1..=slots.min(5));
        let cands: Vec<(Point2, f64)> = (0..n)
            .map(|_| {
                (
                    Point2::new(rng.random_range(0.3..4.0), rng.random_range(-2.0..2.0)),
                    rng.random_range(-0.2..1.0),
                )
            })
            .collect();
        ObservationBlock::from_candidates(&cands, slots)
    };
    let current = block(rng);
    let previous = block(rng);
    ObservationFeature::new(current, previous)
}

/// Perturbs the initial weights so FiLM is not at its identity point.
fn random_params(cfg: PolicyConfig, rng: &mut ChaCha8Rng) -> PolicyParams {
    let mut p = PolicyParams::init(cfg, rng.random()).unwrap();
    for w in &mut p.weights {
        *w += rng.random_range(-0.05..0.05);
    }
    p
}

/// Coordinates to probe: every one for small nets, otherwise a fixed number per tensor.
fn probe_coords(cfg: &PolicyConfig, per_block: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let l = cfg.layout();
    if l.total <= 1000 {
        return (0..l.total).collect();
    }
    let bounds = [l.w1, l.b1, l.wf, l.bf, l.w2, l.b2, l.w3, l.b3, l.total];
    bounds
        .windows(2)
        .flat_map(|w| (0..per_block).map(|_| rng.random_range(w[0]..w[1])).collect::<Vec<_>>())
        .collect()
}

/// Objective gradient, policy backward pass, and the full chain through
/// the rollout against central differences.
pub fn gradient_check(seeds: usize) -> GradientSummary {
    let start = Instant::now();
    let mut objective_worst: f64 = 0.0;
    let mut backward_worst: f64 = 0.0;
    let mut chain_worst: f64 = 0.0;
    let small = PolicyConfig {
        slots: 3,
        embed_dim: 8,
        hidden: 6,
        ..Default::default()
    };
    for seed in 0..seeds as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ocfg = ObjectiveConfig {
            lambda_col: rng.random_range(0.5..5.0),
            ..Default::default()
        };
        let p0 = random_pose(&mut rng, 2.0);
        let goal = p0.transform_point(&Point2::new(rng.random_range(0.3..3.0), rng.random_range(-1.5..1.5)));
        let teacher: Vec<Pose2> = (0..ocfg.teacher_steps)
            .map(|k| p0.compose(&Pose2::new(0.1 * k as f64, rng.random_range(-0.3..0.3), 0.0)))
            .collect();

        let seq = random_sequence(&mut rng, ocfg.horizon);
        let analytic: Vec<f64> = objective_gradient(&seq, &p0, goal, &teacher, &ocfg)
            .unwrap()
            .grad
            .iter()
            .flatten()
            .copied()
            .collect();
        let x = flatten(&seq);
        let coords: Vec<usize> = (0..x.len()).collect();
        let fd = oracles::central_diff(
            |x| total_objective(&unflatten(x, seq.dt()), &p0, goal, &teacher, &ocfg).unwrap().total,
            &x,
            &coords,
            FD_STEP,
        );
        objective_worst = objective_worst.max(oracles::relative_error(&analytic, &fd, 1e-8));

        let cfg = if seed % 2 == 0 { small } else { PolicyConfig::default() };
        let mut params = random_params(cfg, &mut rng);
        let obs = random_observation(&mut rng, cfg.slots);
        let instr = encode_instruction(["go to the chair", "red sofa", "the blue lamp"][seed as usize % 3], cfg.embed_dim)
            .unwrap();
        let coords = probe_coords(&cfg, 24, &mut rng);
        let w0 = params.weights.clone();

        // Linear loss on the commands isolates the network's backward pass.
        let c: Vec<[f64; 2]> = (0..cfg.horizon)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let g = policy_backward(&params, &obs, &instr, &c).unwrap();
        let analytic: Vec<f64> = coords.iter().map(|&i| g[i]).collect();
        let fd = oracles::central_diff(
            |w| {
                params.weights.copy_from_slice(w);
                let s = policy_forward(&params, &obs, &instr).unwrap();
                s.commands().iter().zip(&c).map(|(u, c)| u.v * c[0] + u.omega * c[1]).sum()
            },
            &w0,
            &coords,
            FD_STEP,
        );
        params.weights.copy_from_slice(&w0);
        backward_worst = backward_worst.max(oracles::relative_error(&analytic, &fd, 1e-8));

        let local_goal = Point2::new(rng.random_range(0.5..3.0), rng.random_range(-1.0..1.0));
        let local_teacher: Vec<Pose2> = (0..ocfg.teacher_steps)
            .map(|k| Pose2::new(0.12 * (k + 1) as f64, rng.random_range(-0.2..0.2), 0.0))
            .collect();
        let seq = policy_forward(&params, &obs, &instr).unwrap();
        let up = objective_gradient(&seq, &Pose2::IDENTITY, local_goal, &local_teacher, &ocfg)
            .unwrap()
            .grad;
        let g = policy_backward(&params, &obs, &instr, &up).unwrap();
        let analytic: Vec<f64> = coords.iter().map(|&i| g[i]).collect();
        let fd = oracles::central_diff(
            |w| {
                params.weights.copy_from_slice(w);
                let s = policy_forward(&params, &obs, &instr).unwrap();
                total_objective(&s, &Pose2::IDENTITY, local_goal, &local_teacher, &ocfg)
                    .unwrap()
                    .total
            },
            &w0,
            &coords,
            FD_STEP,
        );
        chain_worst = chain_worst.max(oracles::relative_error(&analytic, &fd, 1e-8));
    }
    GradientSummary {
        seeds,
        objective_worst,
        backward_worst,
        chain_worst,
        elapsed: start.elapsed(),
    }
}

#[derive(Debug, Clone)]
pub struct KinematicSummary {
    pub sequences: usize,
    pub worst: f64,
}

impl KinematicSummary {
    pub fn passed(&self) -> bool {
        self.sequences >= 115 && self.worst <= KINEMATIC_TOL
    }
}

fn euler_worst(p0: &Pose2, seq: &CommandSequence) -> f64 {
    let cmds: Vec<(f64, f64)> = seq.commands().iter().map(|u| (u.v, u.omega)).collect();
    let reference = oracles::euler_rollout((p0.x, p0.y, p0.theta), &cmds, seq.dt(), EULER_DT);
    rollout(p0, seq)
        .iter()
        .zip(&reference)
        .map(|(p, r)| ((p.x - r.0).powi(2) + (p.y - r.1).powi(2)).sqrt())
        .fold(0.0, f64::max)
}

/// Every planner primitive plus `random` sequences against fine Euler stepping.
pub fn kinematic_check(random: usize) -> KinematicSummary {
    let mut worst: f64 = 0.0;
    let mut sequences = 0;
    for &(v, w) in &oracles::PRIMITIVES {
        let seq = CommandSequence::constant(Twist::new(v, w), 8, 0.333).unwrap();
        worst = worst.max(euler_worst(&Pose2::IDENTITY, &seq));
        sequences += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..random {
        let p0 = random_pose(&mut rng, 3.0);
        let seq = random_sequence(&mut rng, 24);
        worst = worst.max(euler_worst(&p0, &seq));
        sequences += 1;
    }
    KinematicSummary { sequences, worst }
}

#[derive(Debug, Clone)]
pub struct PlannerSummary {
    pub scenes: usize,
    pub agreed: usize,
    pub ties: usize,
    pub worst_cost: f64,
}

impl PlannerSummary {
    pub fn passed(&self) -> bool {
        self.scenes >= 1000 && self.agreed == self.scenes && self.worst_cost <= PLANNER_COST_TOL
    }
}

/// Random scenes plus mirror-symmetric scenes where left and right
/// primitives tie exactly, so the lowest-index rule is exercised.
pub fn planner_check(scenes: usize) -> PlannerSummary {
    let cfg = PlannerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut agreed = 0;
    let mut ties = 0;
    let mut worst_cost: f64 = 0.0;
    for k in 0..scenes {
        let symmetric = k % 5 == 0;
        let (p0, goal, obstacles) = if symmetric {
            let goal = Point2::new(rng.random_range(0.2..4.0), 0.0);
            let mut obs = Vec::new();
            for _ in 0..rng.random_range(0..4) {
                let o = Point2::new(rng.random_range(0.0..3.0), rng.random_range(0.0..1.5));
                obs.push(o);
                obs.push(Point2::new(o.x, -o.y));
            }
            (Pose2::IDENTITY, goal, obs)
        } else {
            let p0 = random_pose(&mut rng, 3.0);
            let goal = Point2::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
            let obs: Vec<Point2> = (0..rng.random_range(0..30))
                .map(|_| {
                    p0.transform_point(&Point2::new(rng.random_range(-1.0..4.0), rng.random_range(-2.5..2.5)))
                })
                .collect();
            (p0, goal, obs)
        };
        let reference = oracles::brute_force_costs(
            (p0.x, p0.y, p0.theta),
            (goal.x, goal.y),
            &obstacles.iter().map(|o| (o.x, o.y)).collect::<Vec<_>>(),
            cfg.robot_radius,
            cfg.collision_penalty,
            cfg.primitives.dt,
        );
        let best = oracles::argmin_first(&reference);
        if reference.iter().filter(|c| **c == reference[best]).count() > 1 {
            ties += 1;
        }
        let d = plan_step_detailed(&p0, goal, &obstacles, &cfg);
        let u = plan_step(&p0, goal, &obstacles, &cfg);
        for (a, b) in d.costs.iter().zip(&reference) {
            worst_cost = worst_cost.max((a - b).abs() / b.abs().max(1.0));
        }
        let (v, w) = oracles::PRIMITIVES[best];
        if d.index == best && d.costs.len() == 15 && u == Twist::new(v, w) {
            agreed += 1;
        }
    }
    PlannerSummary {
        scenes,
        agreed,
        ties,
        worst_cost,
    }
}

#[derive(Debug, Clone)]
pub struct MaskSummary {
    pub cases: usize,
    pub correct: usize,
    pub worst_residual: f64,
}

impl MaskSummary {
    pub fn passed(&self) -> bool {
        self.correct == self.cases && self.worst_residual <= 1e-12
    }
}

/// Goals just inside and just outside the masking radius, same commands and teacher.
pub fn mask_check(cases: usize) -> MaskSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut correct = 0;
    let mut worst_residual: f64 = 0.0;
    for _ in 0..cases {
        let cfg = ObjectiveConfig {
            lambda_col: rng.random_range(0.1..10.0),
            ..Default::default()
        };
        let p0 = random_pose(&mut rng, 2.0);
        let bearing: f64 = rng.random_range(-3.0..3.0);
        let seq = random_sequence(&mut rng, cfg.horizon);
        let teacher: Vec<Pose2> = (0..cfg.teacher_steps).map(|_| random_pose(&mut rng, 1.0)).collect();
        let at = |r: f64| {
            let goal = p0.transform_point(&Point2::new(r * bearing.cos(), r * bearing.sin()));
            total_objective(&seq, &p0, goal, &teacher, &cfg).unwrap()
        };
        let near = at(0.99);
        let far = at(1.01);
        let base_near = near.j_pose + near.j_smooth;
        let base_far = far.j_pose + far.j_smooth;
        let r_near = (near.total - base_near).abs();
        let r_far = (far.total - base_far - cfg.lambda_col * far.j_col).abs() / far.total.abs().max(1.0);
        worst_residual = worst_residual.max(r_near).max(r_far);
        if near.epsilon == 0 && far.epsilon == 1 && near.j_col == far.j_col && far.j_col > 0.0 {
            correct += 1;
        }
    }
    MaskSummary {
        cases,
        correct,
        worst_residual,
    }
}

#[derive(Debug, Clone)]
pub struct AnnotationSummary {
    pub frames: usize,
    pub labeled: usize,
    pub within: usize,
    pub violations: usize,
    pub roundtrip: bool,
}

impl AnnotationSummary {
    pub fn fraction(&self) -> f64 {
        self.within as f64 / self.labeled.max(1) as f64
    }

    pub fn passed(&self) -> bool {
        self.frames >= 1000 && self.fraction() >= LABEL_FRACTION && self.violations == 0 && self.roundtrip
    }
}

/// Masked-median labels against ground-truth object positions, then the
/// dataset file through a write, read and schema validation.
pub fn annotation_check(seed: u64) -> AnnotationSummary {
    let scenario = DatasetScenario {
        seed,
        ..Default::default()
    };
    let cfg = AnnotateConfig {
        seed,
        ..Default::default()
    };
    let seqs = dataset_sequences(&scenario, &ScenarioConfig::default(), &cfg.planner);
    let backend = SyntheticBackend::new(
        seqs.iter().map(|s| s.world.clone()).collect(),
        cfg.camera,
        PromptConfig::default(),
    );
    let frames = annotate_dataset(&seqs, &backend, &cfg).unwrap();
    let mut labeled = 0;
    let mut within = 0;
    for f in &frames {
        let world = &seqs[f.sequence].world;
        for o in &f.objects {
            let spec = world.object(o.object_id).unwrap();
            let truth = f.robot_pose.relative_point(&world.object_position(o.object_id, f.time).unwrap());
            labeled += 1;
            if o.pose.distance(&truth) <= spec.footprint_radius + LABEL_SLACK {
                within += 1;
            }
        }
    }
    let header = DatasetHeader::new(frames.len(), cfg.teacher_steps, cfg.visibility_threshold, seed);
    let mut buf = Vec::new();
    write_dataset(&header, &frames, &mut buf).unwrap();
    let (h2, back) = read_dataset(buf.as_slice()).unwrap();
    let violations = validate_dataset(&h2, &back).len();
    AnnotationSummary {
        frames: frames.len(),
        labeled,
        within,
        violations,
        roundtrip: h2 == header && back == frames,
    }
}

#[derive(Debug, Clone)]
pub struct LongDistanceSummary {
    pub nodes: usize,
    pub visible_from: Vec<usize>,
    pub selected: usize,
    pub switches: usize,
    pub success: bool,
}

impl LongDistanceSummary {
    pub fn passed(&self) -> bool {
        self.nodes >= 10
            && self.visible_from.len() == 1
            && self.selected == self.visible_from[0]
            && self.switches == 1
            && self.success
    }
}

/// Camera used to record memories: short range so the target shows up at one node only.
pub fn memory_camera() -> Camera {
    Camera {
        max_range: 2.5,
        ..Camera::default()
    }
}

pub fn long_distance_check(nodes: usize, seed: u64, last_mile: Controller<'_>) -> LongDistanceSummary {
    let (world, route, target, instruction) = long_distance_world(nodes, seed);
    let dim = match last_mile {
        Controller::Policy(p) => p.config.embed_dim,
        Controller::Planner => 64,
    };
    let memory = TopoMemory::record(&world, &route, &memory_camera(), dim).unwrap();
    let descriptor = world.object(target).unwrap().descriptor();
    let visible_from: Vec<usize> = memory
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, n)| n.objects.iter().any(|o| o.descriptor == descriptor))
        .map(|(k, _)| k)
        .collect();
    let out = long_distance_navigate(
        &world,
        &memory,
        route[0],
        &instruction,
        target,
        last_mile,
        &LongDistanceParams::default(),
    )
    .unwrap();
    LongDistanceSummary {
        nodes: memory.len(),
        visible_from,
        selected: out.scores.best,
        switches: out.switches.len(),
        success: out.termination == lastmile_core::planner::Termination::Success,
    }
}
