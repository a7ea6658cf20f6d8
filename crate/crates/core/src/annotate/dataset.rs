//! JSON Lines dataset: a header line followed by one frame per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::AnnotatedFrame;
use crate::error::{Error, Result};

pub const DATASET_SCHEMA: &str = "lastmile.dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema: String,
    pub version: u32,
    pub frames: usize,
    pub teacher_steps: usize,
    pub visibility_threshold: f64,
    pub seed: u64,
}

impl DatasetHeader {
    pub fn new(frames: usize, teacher_steps: usize, visibility_threshold: f64, seed: u64) -> Self {
        Self {
            schema: DATASET_SCHEMA.into(),
            version: DATASET_VERSION,
            frames,
            teacher_steps,
            visibility_threshold,
            seed,
        }
    }
}

pub fn write_dataset<W: Write>(header: &DatasetHeader, frames: &[AnnotatedFrame], mut w: W) -> Result<()> {
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for f in frames {
        serde_json::to_writer(&mut w, f)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<(DatasetHeader, Vec<AnnotatedFrame>)> {
    let mut lines = r.lines().enumerate();
    let header: DatasetHeader = match lines.next() {
        Some((_, line)) => serde_json::from_str(&line?).map_err(|e| Error::Schema {
            line: 1,
            message: format!("bad header: {e}"),
        })?,
        None => {
            return Err(Error::Schema {
                line: 1,
                message: "empty dataset file".into(),
            })
        }
    };
    if header.schema != DATASET_SCHEMA || header.version != DATASET_VERSION {
        return Err(Error::Schema {
            line: 1,
            message: format!(
                "expected {DATASET_SCHEMA} v{DATASET_VERSION}, found {} v{}",
                header.schema, header.version
            ),
        });
    }
    let mut frames = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        frames.push(serde_json::from_str(&line).map_err(|e| Error::Schema {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok((header, frames))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaViolation {
    /// 1-based file line (the header is line 1).
    pub line: usize,
    pub message: String,
}

/// Checks every frame against the record invariants.
pub fn validate_dataset(header: &DatasetHeader, frames: &[AnnotatedFrame]) -> Vec<SchemaViolation> {
    let mut out = Vec::new();
    let mut flag = |line: usize, message: String| out.push(SchemaViolation { line, message });
    if header.frames != frames.len() {
        flag(1, format!("header lists {} frames, file has {}", header.frames, frames.len()));
    }
    let mut last_id: Option<usize> = None;
    for (i, f) in frames.iter().enumerate() {
        let line = i + 2;
        if last_id.is_some_and(|p| f.frame_id <= p) {
            flag(line, format!("frame id {} not increasing", f.frame_id));
        }
        last_id = Some(f.frame_id);
        if !f.robot_pose.is_finite() {
            flag(line, "robot pose not finite".into());
        }
        for o in &f.objects {
            let id = o.object_id;
            if o.teacher.len() != header.teacher_steps {
                flag(line, format!("object {id}: teacher has {} poses", o.teacher.len()));
            }
            if o.prompts.is_empty() {
                flag(line, format!("object {id}: no prompts"));
            }
            for p in &o.prompts {
                if !p.text.to_lowercase().starts_with("go to") {
                    flag(line, format!("object {id}: prompt {:?} does not start with 'go to'", p.text));
                }
            }
            if !(o.visibility >= header.visibility_threshold && o.visibility <= 1.0) {
                flag(line, format!("object {id}: visibility {} fails the filter", o.visibility));
            }
            if !o.pose.is_finite() || o.teacher.iter().any(|p| !p.is_finite()) {
                flag(line, format!("object {id}: non-finite pose"));
            }
            if o.goal_crop.w == 0 || o.goal_crop.h == 0 {
                flag(line, format!("object {id}: empty goal crop"));
            }
        }
    }
    out
}
