//! Flat key-value run configuration.
//!
//! A config file is a TOML table of plain keys. `--set key=value` overrides
//! are merged on top before deserializing, so unknown keys are rejected in
//! both places.

use std::path::{Path, PathBuf};

use lastmile_core::annotate::{AnnotateConfig, CropConfig};
use lastmile_core::objective::ObjectiveConfig;
use lastmile_core::planner::PlannerConfig;
use lastmile_core::policy::{AblationConfig, PolicyConfig, Stage, TrainConfig};
use lastmile_core::sim::scenario::{DatasetScenario, SuiteConfig};
use lastmile_core::sim::{EpisodeCategory, RunParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stages {
    Pretrain,
    Finetune,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Policy,
    Planner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,

    // paths
    /// World file for `annotate` and `plan`. Without one, `annotate` builds
    /// synthetic sequences from the scenario keys.
    pub world: Option<PathBuf>,
    pub dataset: PathBuf,
    pub checkpoint: PathBuf,
    /// Written by `train` when both stages run.
    pub pretrain_checkpoint: PathBuf,
    /// Starting weights: resumes pretraining, or seeds a finetune-only run.
    pub init_checkpoint: Option<PathBuf>,
    /// Optional lambda_col = 0 checkpoint evaluated next to `checkpoint`.
    pub baseline_checkpoint: Option<PathBuf>,
    pub loss_csv: PathBuf,
    pub suite: PathBuf,
    pub report: PathBuf,
    pub trace: PathBuf,
    pub ablation_csv: PathBuf,
    pub svg_dir: Option<PathBuf>,
    pub plot_csv: PathBuf,
    pub plot_svg: PathBuf,

    // objective
    pub horizon: usize,
    pub teacher_steps: usize,
    pub mask_radius: f64,
    pub lambda_col: f64,

    // policy
    pub slots: usize,
    pub embed_dim: usize,
    pub hidden: usize,

    // training
    pub stages: Stages,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub steps_per_epoch: usize,

    // planner and simulation
    pub robot_radius: f64,
    pub collision_penalty: f64,
    pub dt: f64,

    // annotation
    pub teacher_clearance: f64,
    pub visibility_threshold: f64,
    /// Zero keeps every frame.
    pub sampling_fps: f64,
    pub neighbor_radius: f64,
    pub scenario_sequences: usize,
    pub scenario_frames: usize,
    pub scenario_approaches: usize,
    pub scenario_approach_frames: usize,

    // evaluation
    pub controller: ControllerKind,
    pub generate_suite: bool,
    /// A category name or "all".
    pub suite_category: String,
    pub suite_episodes: usize,
    pub suite_seed: u64,
    pub max_steps: usize,

    // plan
    pub start: [f64; 3],
    pub target: u32,

    // plot
    pub episode: usize,

    // ablation
    pub fractions: Vec<f64>,
    pub ablation_seeds: Vec<u64>,
    pub holdout: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let objective = ObjectiveConfig::default();
        let policy = PolicyConfig::default();
        let train = TrainConfig::default();
        let planner = PlannerConfig::default();
        let annotate = AnnotateConfig::default();
        let scenario = DatasetScenario::default();
        let suite = SuiteConfig::default();
        let ablation = AblationConfig::default();
        Self {
            seed: 0,
            world: None,
            dataset: "dataset.jsonl".into(),
            checkpoint: "checkpoint.json".into(),
            pretrain_checkpoint: "pretrain.json".into(),
            init_checkpoint: None,
            baseline_checkpoint: None,
            loss_csv: "loss.csv".into(),
            suite: "suite.jsonl".into(),
            report: "report.json".into(),
            trace: "trace.jsonl".into(),
            ablation_csv: "ablation.csv".into(),
            svg_dir: None,
            plot_csv: "trajectory.csv".into(),
            plot_svg: "trajectory.svg".into(),
            horizon: objective.horizon,
            teacher_steps: objective.teacher_steps,
            mask_radius: objective.mask_radius,
            lambda_col: objective.lambda_col,
            slots: policy.slots,
            embed_dim: policy.embed_dim,
            hidden: policy.hidden,
            stages: Stages::Both,
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            epochs: train.epochs,
            steps_per_epoch: train.steps_per_epoch,
            robot_radius: planner.robot_radius,
            collision_penalty: planner.collision_penalty,
            dt: policy.dt,
            teacher_clearance: annotate.planner.robot_radius,
            visibility_threshold: annotate.visibility_threshold,
            sampling_fps: annotate.sampling_fps.unwrap_or(0.0),
            neighbor_radius: annotate.neighbor_radius,
            scenario_sequences: scenario.sequences,
            scenario_frames: scenario.frames_per_sequence,
            scenario_approaches: scenario.approaches,
            scenario_approach_frames: scenario.frames_per_approach,
            controller: ControllerKind::Policy,
            generate_suite: false,
            suite_category: "simple".into(),
            suite_episodes: 100,
            suite_seed: 1000,
            max_steps: suite.max_steps,
            start: [0.0, 0.0, 0.0],
            target: 1,
            episode: 0,
            fractions: ablation.fractions,
            ablation_seeds: ablation.seeds,
            holdout: ablation.holdout,
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn parse_override(item: &str) -> Result<(String, toml::Value), ConfigError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| ConfigError(format!("override {item:?} is not key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError(format!("override {item:?} has an empty key")));
    }
    // Anything that is not a TOML literal is taken as a bare string.
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

impl RunConfig {
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| ConfigError(format!("config {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            let (k, v) = parse_override(item)?;
            table.insert(k, v);
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let wrap = |r: lastmile_core::Result<()>| r.map_err(|e| ConfigError(e.to_string()));
        wrap(self.objective().validate())?;
        wrap(self.policy().validate())?;
        wrap(self.train_config(Stage::Pretrain).validate())?;
        wrap(self.annotate_config().validate())?;
        wrap(self.ablation_config().validate())?;
        if self.suite_category != "all" {
            self.categories()?;
        }
        if !(self.robot_radius > 0.0) || !(self.teacher_clearance > 0.0) {
            return Err(ConfigError("robot_radius and teacher_clearance must be positive".into()));
        }
        if self.max_steps == 0 || self.suite_episodes == 0 {
            return Err(ConfigError("max_steps and suite_episodes must be at least 1".into()));
        }
        Ok(())
    }

    pub fn objective(&self) -> ObjectiveConfig {
        ObjectiveConfig {
            horizon: self.horizon,
            teacher_steps: self.teacher_steps,
            mask_radius: self.mask_radius,
            lambda_col: self.lambda_col,
        }
    }

    pub fn policy(&self) -> PolicyConfig {
        PolicyConfig {
            slots: self.slots,
            embed_dim: self.embed_dim,
            hidden: self.hidden,
            horizon: self.horizon,
            dt: self.dt,
            ..PolicyConfig::default()
        }
    }

    pub fn train_config(&self, stage: Stage) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            stage,
            epochs: self.epochs,
            steps_per_epoch: self.steps_per_epoch,
            seed: self.seed,
        }
    }

    pub fn planner(&self) -> PlannerConfig {
        let mut p = PlannerConfig {
            robot_radius: self.robot_radius,
            collision_penalty: self.collision_penalty,
            ..PlannerConfig::default()
        };
        p.primitives.dt = self.dt;
        p
    }

    pub fn annotate_config(&self) -> AnnotateConfig {
        let mut planner = self.planner();
        planner.robot_radius = self.teacher_clearance;
        AnnotateConfig {
            sampling_fps: (self.sampling_fps > 0.0).then_some(self.sampling_fps),
            visibility_threshold: self.visibility_threshold,
            neighbor_radius: self.neighbor_radius,
            teacher_steps: self.teacher_steps,
            seed: self.seed,
            planner,
            crop: CropConfig::default(),
            ..AnnotateConfig::default()
        }
    }

    pub fn scenario(&self) -> DatasetScenario {
        DatasetScenario {
            sequences: self.scenario_sequences,
            frames_per_sequence: self.scenario_frames,
            approaches: self.scenario_approaches,
            frames_per_approach: self.scenario_approach_frames,
            seed: self.seed,
            ..DatasetScenario::default()
        }
    }

    pub fn suite_config(&self) -> SuiteConfig {
        SuiteConfig {
            max_steps: self.max_steps,
            ..SuiteConfig::default()
        }
    }

    pub fn run_params(&self) -> RunParams {
        RunParams {
            planner: self.planner(),
            dt: self.dt,
            ..RunParams::default()
        }
    }

    pub fn ablation_config(&self) -> AblationConfig {
        AblationConfig {
            fractions: self.fractions.clone(),
            seeds: self.ablation_seeds.clone(),
            holdout: self.holdout,
            split_seed: self.seed,
            train: self.train_config(Stage::Pretrain),
        }
    }

    pub fn categories(&self) -> Result<Vec<EpisodeCategory>, ConfigError> {
        if self.suite_category == "all" {
            return Ok(EpisodeCategory::ALL.to_vec());
        }
        EpisodeCategory::ALL
            .iter()
            .find(|c| c.as_str() == self.suite_category)
            .map(|c| vec![*c])
            .ok_or_else(|| {
                let names: Vec<&str> = EpisodeCategory::ALL.iter().map(|c| c.as_str()).collect();
                ConfigError(format!(
                    "suite_category {:?} is not one of all, {}",
                    self.suite_category,
                    names.join(", ")
                ))
            })
    }
}
