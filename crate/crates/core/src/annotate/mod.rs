//! Synthetic labeling pipeline: render, segment, describe, filter by
//! confidence, estimate object poses from depth, generate prompts, and attach
//! planner teacher trajectories.

mod backend;
mod dataset;
mod pipeline;
mod prompts;
mod render;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{
    back_project_pixels, masked_median_pose, project_to_pixel, to_planar, DepthMap, Point2,
    Point3, Pose2,
};
use crate::policy::Detection;

pub use backend::{
    AnnotationBackend, Description, FrameRequest, PromptRequest, ScoredPrompt, SegmentMask,
    SyntheticBackend,
};
pub use dataset::{
    read_dataset, validate_dataset, write_dataset, DatasetHeader, SchemaViolation, DATASET_SCHEMA,
    DATASET_VERSION,
};
pub use pipeline::{
    annotate_dataset, sample_indices, AnnotateConfig, WorldSequence, TEACHER_CLEARANCE,
};
pub use prompts::{generate_prompts, ObjectDescription, PromptConfig, DECOY_ADJECTIVES};
pub use render::{
    render_frame, Camera, ObjectMask, RenderedFrame, OBSTACLE_POST_HEIGHT, OBSTACLE_POST_RADIUS,
};

pub type ObjectId = u32;

fn default_height() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: ObjectId,
    pub class_noun: String,
    pub attributes: Vec<String>,
    /// World position; `z` is unused by the planar simulator.
    pub pose: Point3,
    pub footprint_radius: f64,
    #[serde(default = "default_height")]
    pub height: f64,
}

impl ObjectSpec {
    pub fn validate(&self) -> Result<()> {
        if self.class_noun.trim().is_empty() {
            return Err(Error::config(format!("object {} has an empty noun", self.id)));
        }
        if !(self.footprint_radius > 0.0) || !(self.height > 0.0) {
            return Err(Error::config(format!(
                "object {} needs positive radius and height",
                self.id
            )));
        }
        if !self.pose.is_finite() {
            return Err(Error::config(format!("object {} pose is not finite", self.id)));
        }
        Ok(())
    }

    pub fn planar(&self) -> Point2 {
        Point2::new(self.pose.x, self.pose.y)
    }

    pub fn description(&self) -> ObjectDescription {
        ObjectDescription {
            noun: self.class_noun.clone(),
            attributes: self.attributes.clone(),
        }
    }

    /// Attributes followed by the noun, e.g. `"white chair"`.
    pub fn descriptor(&self) -> String {
        self.description().text()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptCategory {
    Simple,
    Descriptive,
    Noisy,
    Implicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptLabel {
    pub text: String,
    pub category: PromptCategory,
}

/// Axis-aligned pixel box; `(u, v)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelBox {
    pub u: usize,
    pub v: usize,
    pub w: usize,
    pub h: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedObject {
    pub object_id: ObjectId,
    /// Estimated planar position in the robot frame.
    pub pose: Point2,
    pub visibility: f64,
    pub prompts: Vec<PromptLabel>,
    /// Teacher poses in the robot frame, length M.
    pub teacher: Vec<Pose2>,
    pub goal_crop: PixelBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedFrame {
    pub frame_id: usize,
    pub sequence: usize,
    pub time: f64,
    pub robot_pose: Pose2,
    /// Candidates seen in this frame; together with `previous_detections`
    /// these determine the observation feature for any instruction.
    pub detections: Vec<Detection>,
    pub previous_detections: Vec<Detection>,
    pub objects: Vec<AnnotatedObject>,
}

/// Keeps detections whose visibility reaches the threshold (closed boundary).
pub fn confidence_filter(visibility: f64, threshold: f64) -> bool {
    visibility >= threshold
}

/// Object position estimate from a depth frame and an instance mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPose {
    pub robot_frame: Point2,
    pub world_frame: Point2,
    /// Median point in the camera frame.
    pub camera_point: Point3,
}

/// Back-projects the masked pixels and takes the component-wise median.
pub fn label_object_pose(
    depth: &DepthMap,
    mask: &[bool],
    camera: &Camera,
    robot_pose: &Pose2,
) -> Result<LabeledPose> {
    if mask.len() != depth.width() * depth.height() {
        return Err(Error::LengthMismatch {
            what: "pixel mask",
            expected: depth.width() * depth.height(),
            got: mask.len(),
        });
    }
    let cloud = back_project_pixels(depth, &camera.intrinsics)?;
    let points: Vec<Point3> = cloud.iter().map(|(_, p)| *p).collect();
    let selection: Vec<bool> = cloud.iter().map(|(i, _)| mask[*i]).collect();
    let median = masked_median_pose(&points, &selection)?;
    let robot_frame = to_planar(&median, camera.ground);
    Ok(LabeledPose {
        robot_frame,
        world_frame: robot_pose.transform_point(&robot_frame),
        camera_point: median,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropConfig {
    /// Sampled target height above the floor, meters.
    pub height_range: (f64, f64),
    /// Box side bounds in pixels.
    pub size_range: (usize, usize),
}

impl Default for CropConfig {
    fn default() -> Self {
        Self {
            height_range: (0.0, 0.5),
            size_range: (8, 24),
        }
    }
}

/// Samples a target height, projects the goal into the image and returns a
/// randomly sized box around it, clipped to the image and at least 1x1.
pub fn crop_goal_box<R: Rng + ?Sized>(
    goal: Point2,
    camera: &Camera,
    cfg: &CropConfig,
    rng: &mut R,
) -> Result<PixelBox> {
    let intr = &camera.intrinsics;
    let (lo, hi) = cfg.height_range;
    let height = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let pt = Point3::new(-goal.y, camera.mount_height - height, goal.x);
    let px = project_to_pixel(&pt, intr)?;
    let (smin, smax) = (cfg.size_range.0.max(1), cfg.size_range.1.max(1));
    let mut side = |_: ()| {
        if smax > smin {
            rng.random_range(smin..=smax)
        } else {
            smin
        }
    };
    let (bw, bh) = (side(()), side(()));
    let clamp_i = |x: f64, max: usize| x.round().clamp(0.0, max as f64 - 1.0) as usize;
    let u0 = (px.u - bw as f64 / 2.0).round().max(0.0) as usize;
    let v0 = (px.v - bh as f64 / 2.0).round().max(0.0) as usize;
    let u1 = ((px.u + bw as f64 / 2.0).round() as usize).min(intr.width);
    let v1 = ((px.v + bh as f64 / 2.0).round() as usize).min(intr.height);
    if u1 <= u0 || v1 <= v0 || u0 >= intr.width || v0 >= intr.height {
        return Ok(PixelBox {
            u: clamp_i(px.u, intr.width),
            v: clamp_i(px.v, intr.height),
            w: 1,
            h: 1,
        });
    }
    Ok(PixelBox {
        u: u0,
        v: v0,
        w: u1 - u0,
        h: v1 - v0,
    })
}
