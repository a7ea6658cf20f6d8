//! Procedural worlds, recorded tours and evaluation suites.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::episode::{Episode, EpisodeCategory};
use super::world::{Bounds, DynamicScript, Waypoint, World};
use crate::annotate::{ObjectId, ObjectSpec, WorldSequence, DECOY_ADJECTIVES};
use crate::derive_seed;
use crate::geom::{integrate_step, Point2, Point3, Pose2, Twist};
use crate::planner::{plan_step, PlannerConfig};

pub const NOUNS: &[&str] = &[
    "chair", "desk", "sofa", "lamp", "plant", "box", "bin", "cabinet", "table", "stool",
];
pub const ATTRIBUTES: &[&str] = &["white", "black", "red", "blue", "green", "wooden", "metal", "yellow"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub arena_half: f64,
    pub radius_range: (f64, f64),
    pub height_range: (f64, f64),
    pub min_separation: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            arena_half: 5.0,
            radius_range: (0.08, 0.15),
            height_range: (0.5, 1.2),
            min_separation: 1.0,
        }
    }
}

pub fn random_object<R: Rng + ?Sized>(id: ObjectId, position: Point2, cfg: &ScenarioConfig, rng: &mut R) -> ObjectSpec {
    let mut attributes = vec![ATTRIBUTES.choose(rng).expect("non-empty").to_string()];
    if rng.random_bool(0.3) {
        let second = *ATTRIBUTES.choose(rng).expect("non-empty");
        if second != attributes[0] {
            attributes.push(second.to_string());
        }
    }
    ObjectSpec {
        id,
        class_noun: NOUNS.choose(rng).expect("non-empty").to_string(),
        attributes,
        pose: Point3::new(position.x, position.y, 0.0),
        footprint_radius: rng.random_range(cfg.radius_range.0..=cfg.radius_range.1),
        height: rng.random_range(cfg.height_range.0..=cfg.height_range.1),
    }
}

fn free_position<R: Rng + ?Sized>(taken: &[Point2], margin: f64, cfg: &ScenarioConfig, rng: &mut R) -> Point2 {
    let lim = cfg.arena_half - margin;
    let mut best = Point2::ORIGIN;
    let mut best_gap = -1.0;
    for _ in 0..200 {
        let p = Point2::new(rng.random_range(-lim..lim), rng.random_range(-lim..lim));
        let gap = taken.iter().map(|q| q.distance(&p)).fold(f64::INFINITY, f64::min);
        if gap >= cfg.min_separation {
            return p;
        }
        if gap > best_gap {
            best_gap = gap;
            best = p;
        }
    }
    best
}

/// `n` objects with ids `1..=n`, separated by at least `min_separation` when possible.
pub fn random_world<R: Rng + ?Sized>(n: usize, cfg: &ScenarioConfig, rng: &mut R) -> World {
    let mut world = World::empty(Bounds::square(cfg.arena_half));
    let mut taken = Vec::new();
    for k in 0..n {
        let p = free_position(&taken, 0.5, cfg, rng);
        taken.push(p);
        world.objects.push(random_object(k as ObjectId + 1, p, cfg, rng));
    }
    world
}

/// Drives toward randomly chosen objects with the planner, turning in place
/// when the goal bearing exceeds 60 degrees. Returns one pose per frame.
pub fn random_tour<R: Rng + ?Sized>(
    world: &World,
    start: Pose2,
    frames: usize,
    fps: f64,
    planner: &PlannerConfig,
    rng: &mut R,
) -> Vec<Pose2> {
    let dt = 1.0 / fps;
    let mut pose = start;
    let mut out = Vec::with_capacity(frames);
    let mut target: Option<(ObjectId, usize)> = None;
    for f in 0..frames {
        out.push(pose);
        if world.objects.is_empty() {
            continue;
        }
        let t = f as f64 * dt;
        let (id, since) = match target {
            Some(x) => x,
            None => {
                let id = world.objects.choose(rng).expect("non-empty").id;
                target = Some((id, f));
                (id, f)
            }
        };
        let goal = world.object_position(id, t).expect("object exists");
        let rel = pose.relative_point(&goal);
        if rel.norm() < 0.6 || (f - since) as f64 * dt > 15.0 {
            target = None;
            continue;
        }
        let bearing = rel.y.atan2(rel.x);
        let u = if bearing.abs() > std::f64::consts::FRAC_PI_3 {
            Twist::new(0.0, 0.9 * bearing.signum())
        } else {
            plan_step(&pose, goal, &world.planner_obstacles(t, Some(id)), planner)
        };
        let next = integrate_step(&pose, &u, dt).expect("finite tour state");
        if world.arena.contains(&next.position()) {
            pose = next;
        } else {
            target = None;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetScenario {
    /// Free tours through random worlds.
    pub sequences: usize,
    pub frames_per_sequence: usize,
    /// Short drives toward an object with another object in the way.
    pub approaches: usize,
    pub frames_per_approach: usize,
    pub fps: f64,
    pub objects: (usize, usize),
    pub seed: u64,
}

impl Default for DatasetScenario {
    fn default() -> Self {
        Self {
            sequences: 12,
            frames_per_sequence: 450,
            approaches: 100,
            frames_per_approach: 100,
            fps: 10.0,
            objects: (3, 6),
            seed: 0,
        }
    }
}

/// Tours first, then blocked approaches.
pub fn dataset_sequences(sc: &DatasetScenario, cfg: &ScenarioConfig, planner: &PlannerConfig) -> Vec<WorldSequence> {
    let mut out: Vec<WorldSequence> = (0..sc.sequences)
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(sc.seed, s as u64, 11));
            let n = rng.random_range(sc.objects.0..=sc.objects.1.max(sc.objects.0));
            let world = random_world(n, cfg, &mut rng);
            let taken: Vec<Point2> = world.objects.iter().map(|o| o.planar()).collect();
            let p = free_position(&taken, 0.5, cfg, &mut rng);
            let mut start = Pose2::new(p.x, p.y, rng.random_range(-3.14..3.14));
            if world.in_collision(&start.position(), 0.0, planner.robot_radius, None) {
                start = Pose2::new(0.0, 0.0, start.theta);
            }
            let poses = random_tour(&world, start, sc.frames_per_sequence, sc.fps, planner, &mut rng);
            WorldSequence {
                world,
                fps: sc.fps,
                poses,
            }
        })
        .collect();
    out.extend((0..sc.approaches).map(|a| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(sc.seed, a as u64, 12));
        blocked_approach(sc.frames_per_approach, sc.fps, cfg, planner, &mut rng)
    }));
    out
}

/// The robot starts facing a target 2 to 4 m away with a second object near
/// the midpoint, and drives there with the planner.
pub fn blocked_approach<R: Rng + ?Sized>(
    frames: usize,
    fps: f64,
    cfg: &ScenarioConfig,
    planner: &PlannerConfig,
    rng: &mut R,
) -> WorldSequence {
    let sc = SuiteConfig {
        distance_range: (2.0, 4.0),
        max_bearing: 0.35,
        ..Default::default()
    };
    let ep = episode_with(EpisodeCategory::Obstacle, 0, &sc, cfg, rng);
    let world = ep.world;
    let dt = 1.0 / fps;
    let mut pose = ep.start;
    let mut poses = Vec::with_capacity(frames);
    for f in 0..frames {
        poses.push(pose);
        let t = f as f64 * dt;
        let goal = world.object_position(ep.target, t).expect("target exists");
        if pose.position().distance(&goal) < 0.3 {
            continue;
        }
        let u = plan_step(&pose, goal, &world.planner_obstacles(t, Some(ep.target)), planner);
        pose = integrate_step(&pose, &u, dt).expect("finite approach state");
    }
    WorldSequence { world, fps, poses }
}

fn segment_distance(p: &Point2, a: &Point2, b: &Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.distance(&Point2::new(a.x + t * dx, a.y + t * dy))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub distance_range: (f64, f64),
    pub max_bearing: f64,
    pub max_steps: usize,
    pub distractors: (usize, usize),
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            distance_range: (1.2, 3.5),
            max_bearing: 0.45,
            max_steps: 150,
            distractors: (0, 3),
        }
    }
}

fn target_phrase(o: &ObjectSpec) -> String {
    format!("go to the {}", o.descriptor())
}

/// Builds `n` episodes of one category; seeded per episode.
pub fn suite(category: EpisodeCategory, n: usize, seed: u64, cfg: &ScenarioConfig, sc: &SuiteConfig) -> Vec<Episode> {
    (0..n)
        .map(|i| episode(category, i, derive_seed(seed, category as u64 + 100, i as u64), cfg, sc))
        .collect()
}

fn episode(category: EpisodeCategory, id: usize, seed: u64, cfg: &ScenarioConfig, sc: &SuiteConfig) -> Episode {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = sc.distance_range;
    let sc = if category == EpisodeCategory::Obstacle {
        SuiteConfig {
            distance_range: (lo.max(2.4), hi.max(2.4)),
            ..*sc
        }
    } else {
        *sc
    };
    episode_with(category, id, &sc, cfg, &mut rng)
}

fn episode_with<R: Rng + ?Sized>(
    category: EpisodeCategory,
    id: usize,
    sc: &SuiteConfig,
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Episode {
    let lim = cfg.arena_half - 0.5;
    let (start, goal) = loop {
        let dist = rng.random_range(sc.distance_range.0..=sc.distance_range.1);
        let bearing = rng.random_range(-sc.max_bearing..=sc.max_bearing);
        let start = Pose2::new(
            rng.random_range(-lim..lim),
            rng.random_range(-lim..lim),
            rng.random_range(-3.14..3.14),
        );
        let goal = start.transform_point(&Point2::new(dist * bearing.cos(), dist * bearing.sin()));
        if goal.x.abs() < lim - 0.5 && goal.y.abs() < lim - 0.5 {
            break (start, goal);
        }
    };
    let start_pos = start.position();

    let mut world = World::empty(Bounds::square(cfg.arena_half));
    let mut target = random_object(1, goal, cfg, rng);
    let mut next_id = 2;
    let mut taken = vec![goal, start_pos];

    match category {
        EpisodeCategory::MultiObject => {
            // same noun, different attributes
            let k = rng.random_range(2..=4);
            for _ in 0..k {
                let mut o = random_object(next_id, Point2::ORIGIN, cfg, rng);
                o.class_noun = target.class_noun.clone();
                while o.attributes == target.attributes {
                    o.attributes = vec![ATTRIBUTES.choose(rng).expect("non-empty").to_string()];
                }
                let p = clear_spot(&taken, &start_pos, &goal, cfg, rng);
                o.pose = Point3::new(p.x, p.y, 0.0);
                taken.push(p);
                world.objects.push(o);
                next_id += 1;
            }
        }
        _ => {
            let k = rng.random_range(sc.distractors.0..=sc.distractors.1);
            for _ in 0..k {
                let p = clear_spot(&taken, &start_pos, &goal, cfg, rng);
                let mut o = random_object(next_id, p, cfg, rng);
                while o.class_noun == target.class_noun {
                    o.class_noun = NOUNS.choose(rng).expect("non-empty").to_string();
                }
                taken.push(p);
                world.objects.push(o);
                next_id += 1;
            }
        }
    }
    if category == EpisodeCategory::Obstacle {
        let t = rng.random_range(0.45..0.55);
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let lateral = side * rng.random_range(0.1..0.3);
        let along = Point2::new(start_pos.x + t * (goal.x - start_pos.x), start_pos.y + t * (goal.y - start_pos.y));
        let dir = (goal.y - start_pos.y).atan2(goal.x - start_pos.x);
        let p = Point2::new(along.x - lateral * dir.sin(), along.y + lateral * dir.cos());
        let mut o = random_object(next_id, p, cfg, rng);
        while o.class_noun == target.class_noun {
            o.class_noun = NOUNS.choose(rng).expect("non-empty").to_string();
        }
        // low enough that the target stays visible over it
        o.height = rng.random_range(0.2..0.35);
        target.height = target.height.max(0.8);
        world.objects.push(o);
    }

    let instruction = match category {
        EpisodeCategory::Noisy => noisy_instruction(&target, rng),
        EpisodeCategory::Simple if rng.random_bool(0.5) => format!("go to the {}", target.class_noun),
        _ => target_phrase(&target),
    };
    if category == EpisodeCategory::Dynamic {
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let shift = rng.random_range(0.3..0.6) * side;
        let dir = (goal.y - start_pos.y).atan2(goal.x - start_pos.x);
        let t0 = rng.random_range(0.5..1.5);
        world.dynamic_scripts.push(DynamicScript {
            object: 1,
            waypoints: vec![
                Waypoint { t: t0, position: goal },
                Waypoint {
                    t: t0 + 4.0,
                    position: Point2::new(goal.x - shift * dir.sin(), goal.y + shift * dir.cos()),
                },
            ],
        });
    }
    target.pose.z = 0.0;
    world.objects.insert(0, target);
    Episode {
        id,
        world,
        start,
        instruction,
        target: 1,
        category,
        max_steps: sc.max_steps,
        success_radius: 0.2,
    }
}

/// A spot at least `min_separation` from everything and well off the
/// start-to-goal corridor.
fn clear_spot<R: Rng + ?Sized>(taken: &[Point2], a: &Point2, b: &Point2, cfg: &ScenarioConfig, rng: &mut R) -> Point2 {
    let lim = cfg.arena_half - 0.5;
    let mut last = Point2::new(lim, lim);
    for _ in 0..500 {
        let p = Point2::new(rng.random_range(-lim..lim), rng.random_range(-lim..lim));
        last = p;
        let gap = taken.iter().map(|q| q.distance(&p)).fold(f64::INFINITY, f64::min);
        if gap >= cfg.min_separation && segment_distance(&p, a, b) >= 0.8 {
            return p;
        }
    }
    last
}

fn noisy_instruction<R: Rng + ?Sized>(target: &ObjectSpec, rng: &mut R) -> String {
    if rng.random_bool(0.5) {
        let mut attrs = target.attributes.clone();
        let slot = rng.random_range(0..attrs.len());
        let decoys: Vec<&&str> = DECOY_ADJECTIVES
            .iter()
            .filter(|d| !target.attributes.iter().any(|a| a == **d))
            .collect();
        attrs[slot] = decoys.choose(rng).map_or("odd".to_string(), |d| d.to_string());
        format!("go to the {} {}", attrs.join(" "), target.class_noun)
    } else {
        format!("go to the {} one", target.attributes.join(" "))
    }
}

/// A straight route of `nodes` memory poses 1.5 m apart, with the target
/// 2 m beyond the last node and distractors along the way.
pub fn long_distance_world(nodes: usize, seed: u64) -> (World, Vec<Pose2>, ObjectId, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spacing = 1.5;
    let length = spacing * (nodes.saturating_sub(1)) as f64 + 2.0;
    let half = length / 2.0 + 2.0;
    let x0 = -length / 2.0;
    let cfg = ScenarioConfig {
        arena_half: half,
        ..Default::default()
    };
    let route: Vec<Pose2> = (0..nodes).map(|k| Pose2::new(x0 + spacing * k as f64, 0.0, 0.0)).collect();
    let mut world = World::empty(Bounds::square(half));
    let goal = Point2::new(route.last().map_or(x0, |p| p.x) + 2.0, rng.random_range(-0.2..0.2));
    let mut target = random_object(1, goal, &cfg, &mut rng);
    target.class_noun = "chair".into();
    target.attributes = vec!["white".into()];
    world.objects.push(target);
    let others = ["sofa", "lamp", "plant", "cabinet"];
    for (k, x) in (0..nodes.saturating_sub(2)).step_by(2).enumerate() {
        let side = if k % 2 == 0 { 1.2 } else { -1.2 };
        let mut o = random_object(k as ObjectId + 2, Point2::new(x0 + spacing * x as f64 + 0.7, side), &cfg, &mut rng);
        o.class_noun = others[k % others.len()].into();
        o.attributes = vec![["red", "blue", "green"][k % 3].into()];
        world.objects.push(o);
    }
    (world, route, 1, "go to the white chair".into())
}
