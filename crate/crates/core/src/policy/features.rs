//! Fixed-size observation features fed to the policy.
//!
//! An observation holds `K` candidate slots for the current frame and `K` for
//! the previous frame. Slots are sorted by similarity to the instruction
//! (descending), ties broken by distance (ascending); unused slots are zero.

use serde::{Deserialize, Serialize};

use super::encoder::{encode_instruction, InstructionEmbedding};
use crate::error::Result;
use crate::geom::Point2;

pub const DEFAULT_SLOTS: usize = 8;

/// A detected candidate object in the robot frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub rel: Point2,
    pub descriptor: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Slot {
    pub rel_x: f64,
    pub rel_y: f64,
    pub sim: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationBlock {
    pub slots: Vec<Slot>,
}

impl ObservationBlock {
    pub fn empty(k: usize) -> Self {
        Self {
            slots: vec![Slot::default(); k],
        }
    }

    /// Builds a block from `(position, similarity)` candidates.
    pub fn from_candidates(candidates: &[(Point2, f64)], k: usize) -> Self {
        let mut sorted: Vec<(Point2, f64)> = candidates.to_vec();
        sorted.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| a.0.norm().total_cmp(&b.0.norm()))
        });
        let mut block = Self::empty(k);
        for (slot, (p, s)) in block.slots.iter_mut().zip(sorted) {
            *slot = Slot {
                rel_x: p.x,
                rel_y: p.y,
                sim: s,
                valid: true,
            };
        }
        block
    }

    pub fn from_detections(
        detections: &[Detection],
        instr: &InstructionEmbedding,
        k: usize,
    ) -> Result<Self> {
        let mut cands = Vec::with_capacity(detections.len());
        for d in detections {
            let e = encode_instruction(&d.descriptor, instr.dim())?;
            cands.push((d.rel, instr.cosine(&e)));
        }
        Ok(Self::from_candidates(&cands, k))
    }

    pub fn valid_count(&self) -> usize {
        self.slots.iter().filter(|s| s.valid).count()
    }

    fn push_inputs(&self, out: &mut Vec<f64>) {
        for s in &self.slots {
            if s.valid {
                out.extend([s.rel_x, s.rel_y, s.sim]);
            } else {
                out.extend([0.0; 3]);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationFeature {
    pub current: ObservationBlock,
    pub previous: ObservationBlock,
}

impl ObservationFeature {
    pub fn new(current: ObservationBlock, previous: ObservationBlock) -> Self {
        Self { current, previous }
    }

    pub fn slots(&self) -> usize {
        self.current.slots.len()
    }

    /// Flat network input: current slots then previous slots, three values each.
    pub fn to_input(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(6 * self.slots());
        self.current.push_inputs(&mut out);
        self.previous.push_inputs(&mut out);
        out
    }
}
