use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::PolicyParams;
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::objective::ObjectiveConfig;

pub const CHECKPOINT_SCHEMA: &str = "lastmile.checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Policy weights with optimizer state and the configs that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema: String,
    pub version: u32,
    pub train: TrainConfig,
    pub objective: ObjectiveConfig,
    pub params: PolicyParams,
}

impl Checkpoint {
    pub fn new(params: PolicyParams, train: TrainConfig, objective: ObjectiveConfig) -> Self {
        Self {
            schema: CHECKPOINT_SCHEMA.into(),
            version: CHECKPOINT_VERSION,
            train,
            objective,
            params,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.schema != CHECKPOINT_SCHEMA || c.version != CHECKPOINT_VERSION {
            return Err(Error::Schema {
                line: 1,
                message: format!("expected {CHECKPOINT_SCHEMA} v{CHECKPOINT_VERSION}, found {} v{}", c.schema, c.version),
            });
        }
        c.params.check_shapes()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}
