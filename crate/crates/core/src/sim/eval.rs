use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{run_episode, Controller, Episode, EpisodeCategory, EpisodeRecord, RunParams};
use crate::error::{Error, Result};
use crate::planner::Termination;

pub const SUITE_SCHEMA: &str = "lastmile.suite";
pub const SUITE_VERSION: u32 = 1;
pub const REPORT_SCHEMA: &str = "lastmile.report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CategoryStats {
    pub episodes: usize,
    pub successes: usize,
    pub collisions: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub id: usize,
    pub category: EpisodeCategory,
    pub termination: Termination,
    pub steps: usize,
    pub final_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub version: u32,
    pub controller: String,
    /// Keyed by category name; only categories present in the suite appear.
    pub categories: BTreeMap<String, CategoryStats>,
    pub total: f64,
    pub collision_rate: f64,
    pub episodes: Vec<EpisodeSummary>,
}

impl EvalReport {
    pub fn from_records(controller: &str, records: &[EpisodeRecord]) -> Self {
        let mut categories: BTreeMap<String, CategoryStats> = BTreeMap::new();
        for r in records {
            let c = categories.entry(r.category.as_str().to_string()).or_default();
            c.episodes += 1;
            c.successes += usize::from(r.success());
            c.collisions += usize::from(r.termination == Termination::Collision);
        }
        for c in categories.values_mut() {
            c.success_rate = c.successes as f64 / c.episodes as f64;
        }
        let n = records.len().max(1) as f64;
        Self {
            schema: REPORT_SCHEMA.into(),
            version: REPORT_VERSION,
            controller: controller.into(),
            total: records.iter().filter(|r| r.success()).count() as f64 / n,
            collision_rate: records
                .iter()
                .filter(|r| r.termination == Termination::Collision)
                .count() as f64
                / n,
            categories,
            episodes: records
                .iter()
                .map(|r| EpisodeSummary {
                    id: r.id,
                    category: r.category,
                    termination: r.termination,
                    steps: r.steps,
                    final_distance: r.final_distance,
                })
                .collect(),
        }
    }

    pub fn rate(&self, category: EpisodeCategory) -> Option<f64> {
        self.categories.get(category.as_str()).map(|c| c.success_rate)
    }
}

/// Runs every episode (in parallel, reported in suite order).
pub fn evaluate(
    suite: &[Episode],
    controller: Controller<'_>,
    params: &RunParams,
) -> Result<(EvalReport, Vec<EpisodeRecord>)> {
    if suite.is_empty() {
        return Err(Error::domain("evaluation suite is empty"));
    }
    let records = suite
        .par_iter()
        .map(|ep| run_episode(ep, controller, params))
        .collect::<Result<Vec<_>>>()?;
    let name = match controller {
        Controller::Policy(_) => "policy",
        Controller::Planner => "planner",
    };
    Ok((EvalReport::from_records(name, &records), records))
}

/// Obstacle-suite comparison between a checkpoint trained without the
/// teacher term and one fine-tuned with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionAblation {
    pub pretrain: EvalReport,
    pub finetune: EvalReport,
}

pub fn collision_ablation(
    suite: &[Episode],
    pretrain: Controller<'_>,
    finetune: Controller<'_>,
    params: &RunParams,
) -> Result<CollisionAblation> {
    Ok(CollisionAblation {
        pretrain: evaluate(suite, pretrain, params)?.0,
        finetune: evaluate(suite, finetune, params)?.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SuiteHeader {
    schema: String,
    version: u32,
    episodes: usize,
}

pub fn write_suite<W: Write>(suite: &[Episode], mut w: W) -> Result<()> {
    let header = SuiteHeader {
        schema: SUITE_SCHEMA.into(),
        version: SUITE_VERSION,
        episodes: suite.len(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for ep in suite {
        serde_json::to_writer(&mut w, ep)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_suite<R: BufRead>(r: R) -> Result<Vec<Episode>> {
    let mut lines = r.lines();
    let header: SuiteHeader = match lines.next() {
        Some(l) => serde_json::from_str(&l?).map_err(|e| Error::Schema {
            line: 1,
            message: e.to_string(),
        })?,
        None => {
            return Err(Error::Schema {
                line: 1,
                message: "empty suite file".into(),
            })
        }
    };
    if header.schema != SUITE_SCHEMA || header.version != SUITE_VERSION {
        return Err(Error::Schema {
            line: 1,
            message: format!("expected {SUITE_SCHEMA} v{SUITE_VERSION}"),
        });
    }
    let mut out = Vec::new();
    for (i, l) in lines.enumerate() {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        let ep: Episode = serde_json::from_str(&l).map_err(|e| Error::Schema {
            line: i + 2,
            message: e.to_string(),
        })?;
        ep.validate().map_err(|e| Error::Schema {
            line: i + 2,
            message: e.to_string(),
        })?;
        out.push(ep);
    }
    if out.len() != header.episodes {
        return Err(Error::Schema {
            line: 1,
            message: format!("header lists {} episodes, file has {}", header.episodes, out.len()),
        });
    }
    Ok(out)
}
