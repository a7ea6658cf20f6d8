use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backend::{AnnotationBackend, FrameRequest, PromptRequest};
use super::render::{render_frame, Camera};
use super::{
    confidence_filter, crop_goal_box, label_object_pose, AnnotatedFrame, AnnotatedObject,
    CropConfig, LabeledPose,
};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::geom::{back_project_pixels, to_planar, DepthMap, Point2, Pose2};
use crate::planner::{teacher_trajectory, PlannerConfig};
use crate::policy::Detection;
use crate::sim::World;

/// A recorded traversal of one world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSequence {
    pub world: World,
    pub fps: f64,
    pub poses: Vec<Pose2>,
}

/// Robot radius used when labeling teacher trajectories. Larger than the
/// 0.3 m collision radius so imitation error does not turn into contact.
pub const TEACHER_CLEARANCE: f64 = 0.45;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotateConfig {
    /// `None` keeps every frame.
    pub sampling_fps: Option<f64>,
    pub visibility_threshold: f64,
    pub neighbor_radius: f64,
    pub teacher_steps: usize,
    /// Points lower than this above the floor are not obstacles.
    pub floor_height: f64,
    pub voxel_size: f64,
    pub seed: u64,
    pub camera: Camera,
    pub planner: PlannerConfig,
    pub crop: CropConfig,
}

impl Default for AnnotateConfig {
    fn default() -> Self {
        Self {
            sampling_fps: Some(2.0),
            visibility_threshold: 0.5,
            neighbor_radius: 1.5,
            teacher_steps: 8,
            floor_height: 0.05,
            voxel_size: 0.05,
            seed: 0,
            camera: Camera::default(),
            planner: PlannerConfig {
                robot_radius: TEACHER_CLEARANCE,
                ..PlannerConfig::default()
            },
            crop: CropConfig::default(),
        }
    }
}

impl AnnotateConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(f) = self.sampling_fps {
            if !(f > 0.0) {
                return Err(Error::config("sampling_fps must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.visibility_threshold) {
            return Err(Error::config("visibility_threshold must lie in [0, 1]"));
        }
        if self.teacher_steps == 0 {
            return Err(Error::config("teacher_steps must be at least 1"));
        }
        if !(self.voxel_size > 0.0) {
            return Err(Error::config("voxel_size must be positive"));
        }
        self.camera.intrinsics.validate()
    }
}

/// Frame indices kept when resampling a `fps` recording of `n` frames to
/// `sampling_fps`: one frame per sampling period, nearest in time.
pub fn sample_indices(n: usize, fps: f64, sampling_fps: Option<f64>) -> Vec<usize> {
    match sampling_fps {
        Some(s) if s < fps => {
            let duration = n as f64 / fps;
            let count = (duration * s - 1e-9).ceil().max(0.0) as usize;
            let mut out: Vec<usize> = (0..count)
                .map(|k| ((k as f64 * fps / s).round() as usize).min(n - 1))
                .collect();
            out.dedup();
            out
        }
        _ => (0..n).collect(),
    }
}

fn obstacle_cloud(
    depth: &DepthMap,
    target_pixels: &[usize],
    cfg: &AnnotateConfig,
) -> Result<Vec<Point2>> {
    let skip: BTreeSet<usize> = target_pixels.iter().copied().collect();
    let mut cells = BTreeSet::new();
    let mut out = Vec::new();
    for (idx, p) in back_project_pixels(depth, &cfg.camera.intrinsics)? {
        if skip.contains(&idx) || cfg.camera.mount_height - p.y < cfg.floor_height {
            continue;
        }
        let q = to_planar(&p, cfg.camera.ground);
        let cell = (
            (q.x / cfg.voxel_size).floor() as i64,
            (q.y / cfg.voxel_size).floor() as i64,
        );
        if cells.insert(cell) {
            out.push(q);
        }
    }
    Ok(out)
}

struct Kept {
    label: LabeledPose,
    visibility: f64,
    pixels: Vec<usize>,
    description: super::ObjectDescription,
    object: super::ObjectId,
}

fn annotate_frame(
    seq_idx: usize,
    seq: &WorldSequence,
    index: usize,
    frame_id: usize,
    backend: &dyn AnnotationBackend,
    cfg: &AnnotateConfig,
) -> Result<AnnotatedFrame> {
    let frame_err = |e: Error| match e {
        Error::Frame { .. } => e,
        other => Error::Frame {
            frame: frame_id,
            message: other.to_string(),
        },
    };
    let time = index as f64 / seq.fps;
    let pose = seq.poses[index];
    let rendered = render_frame(&seq.world, time, &pose, &cfg.camera);
    let request = FrameRequest {
        sequence: seq_idx,
        frame_id,
        time,
        robot_pose: pose,
        width: rendered.depth.width(),
        height: rendered.depth.height(),
        depth: rendered.depth.data().to_vec(),
    };
    let n_pix = cfg.camera.intrinsics.pixel_count();

    let mut kept = Vec::new();
    for mask in backend.segment(&request).map_err(frame_err)? {
        if mask.pixels.is_empty() || !confidence_filter(mask.confidence, cfg.visibility_threshold) {
            continue;
        }
        let mut bits = vec![false; n_pix];
        for &p in &mask.pixels {
            if p < n_pix {
                bits[p] = true;
            }
        }
        let label = match label_object_pose(&rendered.depth, &bits, &cfg.camera, &pose) {
            Ok(l) => l,
            Err(Error::EmptyMask) => continue,
            Err(e) => return Err(frame_err(e)),
        };
        let desc = backend.describe(&request, &mask).map_err(frame_err)?;
        kept.push(Kept {
            label,
            visibility: mask.confidence,
            pixels: mask.pixels,
            description: desc.description,
            object: mask.object,
        });
    }

    let detections: Vec<Detection> = kept
        .iter()
        .map(|k| Detection {
            rel: k.label.robot_frame,
            descriptor: k.description.text(),
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, frame_id as u64, 0));
    let mut objects = Vec::with_capacity(kept.len());
    for (j, k) in kept.iter().enumerate() {
        let mut neighbors: Vec<(f64, usize)> = kept
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .map(|(i, o)| (o.label.world_frame.distance(&k.label.world_frame), i))
            .filter(|(d, _)| *d <= cfg.neighbor_radius)
            .collect();
        neighbors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let prompts = backend
            .propose_prompts(&PromptRequest {
                target: k.description.clone(),
                neighbors: neighbors
                    .iter()
                    .map(|(_, i)| kept[*i].description.clone())
                    .collect(),
                seed: derive_seed(cfg.seed, frame_id as u64, j as u64 + 1),
            })
            .map_err(frame_err)?
            .into_iter()
            .map(|p| p.prompt)
            .collect::<Vec<_>>();
        if prompts.is_empty() {
            continue;
        }
        let obstacles = obstacle_cloud(&rendered.depth, &k.pixels, cfg).map_err(frame_err)?;
        let goal = k.label.robot_frame;
        let teacher = teacher_trajectory(
            &Pose2::IDENTITY,
            goal,
            &obstacles,
            &cfg.planner,
            cfg.teacher_steps,
        );
        let goal_crop = crop_goal_box(goal, &cfg.camera, &cfg.crop, &mut rng).map_err(frame_err)?;
        objects.push(AnnotatedObject {
            object_id: k.object,
            pose: goal,
            visibility: k.visibility,
            prompts,
            teacher,
            goal_crop,
        });
    }

    Ok(AnnotatedFrame {
        frame_id,
        sequence: seq_idx,
        time,
        robot_pose: pose,
        detections,
        previous_detections: Vec::new(),
        objects,
    })
}

/// Runs the labeling pipeline over every sequence. Frame ids are global and
/// follow sequence order; the output is independent of thread count.
pub fn annotate_dataset(
    sequences: &[WorldSequence],
    backend: &dyn AnnotationBackend,
    cfg: &AnnotateConfig,
) -> Result<Vec<AnnotatedFrame>> {
    cfg.validate()?;
    if sequences.is_empty() {
        return Err(Error::domain("no sequences to annotate"));
    }
    let mut jobs = Vec::new();
    for (s, seq) in sequences.iter().enumerate() {
        if seq.poses.is_empty() {
            return Err(Error::domain(format!("sequence {s} has no poses")));
        }
        if !(seq.fps > 0.0) {
            return Err(Error::domain(format!("sequence {s} has non-positive fps")));
        }
        seq.world.validate()?;
        for i in sample_indices(seq.poses.len(), seq.fps, cfg.sampling_fps) {
            jobs.push((s, i));
        }
    }
    let mut frames: Vec<AnnotatedFrame> = jobs
        .par_iter()
        .enumerate()
        .map(|(id, &(s, i))| annotate_frame(s, &sequences[s], i, id, backend, cfg))
        .collect::<Result<_>>()?;
    for k in 1..frames.len() {
        if frames[k].sequence == frames[k - 1].sequence {
            frames[k].previous_detections = frames[k - 1].detections.clone();
        }
    }
    Ok(frames)
}
