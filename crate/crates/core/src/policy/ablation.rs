//! Dataset-size ablation: train on nested fractions of the training pool
//! and report held-out mean squared final-pose error.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{forward_raw, PolicyConfig, PolicyParams};
use super::train::{train, TrainConfig, TrainingSet};
use crate::annotate::AnnotatedFrame;
use crate::error::{Error, Result};
use crate::geom::{rollout, Pose2};
use crate::objective::ObjectiveConfig;

pub const ABLATION_SCHEMA: &str = "lastmile.ablation";
pub const ABLATION_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Share of annotated frames kept aside for evaluation.
    pub holdout: f64,
    pub split_seed: u64,
    pub train: TrainConfig,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            fractions: vec![0.1, 0.25, 0.5, 1.0],
            seeds: vec![0, 1, 2],
            holdout: 0.2,
            split_seed: 0,
            train: TrainConfig::default(),
        }
    }
}

impl AblationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fractions.is_empty() || self.seeds.is_empty() {
            return Err(Error::config("ablation needs at least one fraction and one seed"));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(Error::config(format!("dataset fraction {f} must lie in (0, 1]")));
        }
        if !(self.holdout > 0.0 && self.holdout < 1.0) {
            return Err(Error::config("holdout must lie in (0, 1)"));
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub fraction: f64,
    pub frames: usize,
    pub mse: Vec<f64>,
    pub median_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub schema: String,
    pub version: u32,
    pub holdout_frames: usize,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# schema={} version={}", self.schema, self.version)?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["fraction", "frames", "median_mse", "mse_per_seed"])?;
        for r in &self.rows {
            let per: Vec<String> = r.mse.iter().map(|m| m.to_string()).collect();
            out.write_record([
                r.fraction.to_string(),
                r.frames.to_string(),
                r.median_mse.to_string(),
                per.join(";"),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Index sets for each fraction, all prefixes of one shuffled order.
pub fn nested_subsets(n: usize, fractions: &[f64], seed: u64) -> Result<Vec<Vec<usize>>> {
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::config(format!("dataset fraction {f} must lie in (0, 1]")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(fractions
        .iter()
        .map(|f| {
            let k = ((f * n as f64).ceil() as usize).clamp(1.min(n), n);
            order[..k].to_vec()
        })
        .collect())
}

/// Mean squared distance between the final rollout pose and the goal over
/// every (object, prompt) pair of `set`.
pub fn heldout_mse(params: &PolicyParams, set: &TrainingSet) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for frame in &set.frames {
        for o in frame {
            for p in &o.prompts {
                let (seq, _) = forward_raw(params, &p.input, p.embedding.as_slice())?;
                let last = *rollout(&Pose2::IDENTITY, &seq).last().expect("non-empty rollout");
                sum += last.position().distance_sq(&o.goal);
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::domain("held-out set has no annotated objects"));
    }
    Ok(sum / n as f64)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

/// Pretrains one policy per (fraction, seed) with the configured schedule.
pub fn data_ablation(
    frames: &[AnnotatedFrame],
    policy: &PolicyConfig,
    objective: &ObjectiveConfig,
    cfg: &AblationConfig,
) -> Result<AblationTable> {
    cfg.validate()?;
    let usable: Vec<&AnnotatedFrame> = frames.iter().filter(|f| !f.objects.is_empty()).collect();
    if usable.len() < 2 {
        return Err(Error::domain("ablation needs at least two annotated frames"));
    }
    let mut order: Vec<usize> = (0..usable.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.split_seed));
    let n_hold = ((cfg.holdout * usable.len() as f64).round() as usize).clamp(1, usable.len() - 1);
    let pick = |ix: &[usize]| -> Vec<AnnotatedFrame> { ix.iter().map(|&i| usable[i].clone()).collect() };
    let held = TrainingSet::from_frames(&pick(&order[..n_hold]), policy)?;
    let pool = &order[n_hold..];
    let subsets = nested_subsets(pool.len(), &cfg.fractions, cfg.split_seed.wrapping_add(1))?;

    let mut rows = Vec::with_capacity(subsets.len());
    for (fraction, subset) in cfg.fractions.iter().zip(&subsets) {
        let chosen: Vec<usize> = subset.iter().map(|&k| pool[k]).collect();
        let set = TrainingSet::from_frames(&pick(&chosen), policy)?;
        let mut mse = Vec::with_capacity(cfg.seeds.len());
        for &seed in &cfg.seeds {
            let tc = TrainConfig { seed, ..cfg.train };
            let out = train(&set, None, policy, &tc, objective)?;
            mse.push(heldout_mse(&out.params, &held)?);
        }
        rows.push(AblationRow {
            fraction: *fraction,
            frames: chosen.len(),
            median_mse: median(&mse),
            mse,
        });
    }
    Ok(AblationTable {
        schema: ABLATION_SCHEMA.into(),
        version: ABLATION_VERSION,
        holdout_frames: n_hold,
        rows,
    })
}
