//! Request/response contract for the perception and language models, plus
//! the deterministic simulator-backed implementation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::prompts::{generate_prompts, ObjectDescription, PromptConfig};
use super::render::{render_frame, Camera};
use super::{ObjectId, PromptLabel};
use crate::error::{Error, Result};
use crate::geom::Pose2;
use crate::sim::World;

/// One frame as handed to a backend. `depth` is row-major meters; NaN marks
/// missing returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRequest {
    pub sequence: usize,
    pub frame_id: usize,
    pub time: f64,
    pub robot_pose: Pose2,
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentMask {
    /// Instance id; stable across frames of one sequence.
    pub object: ObjectId,
    /// Row-major pixel indices.
    pub pixels: Vec<usize>,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub object: ObjectId,
    pub description: ObjectDescription,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub target: ObjectDescription,
    /// Nearest first.
    pub neighbors: Vec<ObjectDescription>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrompt {
    pub prompt: PromptLabel,
    pub confidence: f64,
}

pub trait AnnotationBackend: Sync {
    fn segment(&self, frame: &FrameRequest) -> Result<Vec<SegmentMask>>;
    fn describe(&self, frame: &FrameRequest, mask: &SegmentMask) -> Result<Description>;
    fn propose_prompts(&self, request: &PromptRequest) -> Result<Vec<ScoredPrompt>>;
}

/// Answers from the simulated worlds: masks come from the renderer,
/// descriptions from the object catalog and prompts from templates.
#[derive(Debug, Clone)]
pub struct SyntheticBackend {
    worlds: Vec<World>,
    camera: Camera,
    prompts: PromptConfig,
}

impl SyntheticBackend {
    /// `worlds[i]` answers requests whose `sequence == i`.
    pub fn new(worlds: Vec<World>, camera: Camera, prompts: PromptConfig) -> Self {
        Self {
            worlds,
            camera,
            prompts,
        }
    }

    fn world(&self, sequence: usize) -> Result<&World> {
        self.worlds.get(sequence).ok_or_else(|| Error::Frame {
            frame: sequence,
            message: format!("no world registered for sequence {sequence}"),
        })
    }
}

impl AnnotationBackend for SyntheticBackend {
    fn segment(&self, frame: &FrameRequest) -> Result<Vec<SegmentMask>> {
        let world = self.world(frame.sequence)?;
        let rendered = render_frame(world, frame.time, &frame.robot_pose, &self.camera);
        Ok(rendered
            .masks
            .into_iter()
            .map(|m| SegmentMask {
                object: m.object,
                pixels: m.pixels,
                confidence: m.visibility,
            })
            .collect())
    }

    fn describe(&self, frame: &FrameRequest, mask: &SegmentMask) -> Result<Description> {
        let world = self.world(frame.sequence)?;
        let obj = world.object(mask.object).ok_or_else(|| Error::Frame {
            frame: frame.frame_id,
            message: format!("mask refers to unknown object {}", mask.object),
        })?;
        Ok(Description {
            object: obj.id,
            description: obj.description(),
        })
    }

    fn propose_prompts(&self, request: &PromptRequest) -> Result<Vec<ScoredPrompt>> {
        let mut rng = ChaCha8Rng::seed_from_u64(request.seed);
        Ok(
            generate_prompts(&request.target, &request.neighbors, &self.prompts, &mut rng)
                .into_iter()
                .map(|prompt| ScoredPrompt {
                    prompt,
                    confidence: 1.0,
                })
                .collect(),
        )
    }
}
