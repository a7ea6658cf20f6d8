use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use lastmile_core::annotate::{
    annotate_dataset, read_dataset, validate_dataset, write_dataset, AnnotatedFrame, DatasetHeader, PromptConfig,
    SyntheticBackend, WorldSequence,
};
use lastmile_core::planner::{receding_horizon_control, write_trace_jsonl, Termination};
use lastmile_core::policy::{data_ablation, train, AblationTable, Checkpoint, LossCurve, Stage, TrainingSet};
use lastmile_core::sim::scenario::{dataset_sequences, suite, ScenarioConfig};
use lastmile_core::sim::{
    evaluate, read_suite, run_episode, trajectory_csv, trajectory_svg, write_suite, Controller, Episode, EvalReport,
    WorldFile,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ControllerKind, RunConfig, Stages};

pub type CmdResult = Result<(), Box<dyn std::error::Error>>;

pub const RUN_REPORT_SCHEMA: &str = "lastmile.run";
pub const RUN_REPORT_VERSION: u32 = 1;
pub const TRACE_SCHEMA: &str = "lastmile.trace";
pub const TRACE_VERSION: u32 = 1;

/// Report file: the command's result next to the full effective config.
#[derive(Serialize)]
struct RunReport<'a, T: Serialize> {
    schema: &'static str,
    version: u32,
    command: &'static str,
    config: &'a RunConfig,
    result: T,
}

#[derive(Serialize)]
struct SchemaLine {
    schema: &'static str,
    version: u32,
}

fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes an artifact in one go and prints its digest.
fn write_artifact(path: &Path, bytes: &[u8]) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(bytes)?;
    f.flush()?;
    println!("wrote {} sha256={}", path.display(), digest(bytes));
    Ok(())
}

fn write_report<T: Serialize>(cfg: &RunConfig, command: &'static str, result: T) -> CmdResult {
    let report = RunReport {
        schema: RUN_REPORT_SCHEMA,
        version: RUN_REPORT_VERSION,
        command,
        config: cfg,
        result,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_artifact(&cfg.report, text.as_bytes())
}

fn open(path: &Path, what: &str) -> Result<BufReader<File>, Box<dyn std::error::Error>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| format!("cannot open {what} {}: {e}", path.display()).into())
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, Box<dyn std::error::Error>> {
    Checkpoint::load(path).map_err(|e| format!("checkpoint {}: {e}", path.display()).into())
}

fn load_dataset(cfg: &RunConfig) -> Result<(DatasetHeader, Vec<AnnotatedFrame>), Box<dyn std::error::Error>> {
    let (header, frames) = read_dataset(open(&cfg.dataset, "dataset")?)?;
    let violations = validate_dataset(&header, &frames);
    if let Some(v) = violations.first() {
        return Err(format!(
            "dataset {} has {} schema violations; first at line {}: {}",
            cfg.dataset.display(),
            violations.len(),
            v.line,
            v.message
        )
        .into());
    }
    Ok((header, frames))
}

pub fn annotate(cfg: &RunConfig) -> CmdResult {
    let acfg = cfg.annotate_config();
    let seqs: Vec<WorldSequence> = match &cfg.world {
        Some(p) => {
            let wf = WorldFile::load(p).map_err(|e| format!("world {}: {e}", p.display()))?;
            wf.paths
                .iter()
                .map(|rp| WorldSequence {
                    world: wf.world.clone(),
                    fps: rp.fps,
                    poses: rp.poses.clone(),
                })
                .collect()
        }
        None => dataset_sequences(&cfg.scenario(), &ScenarioConfig::default(), &cfg.planner()),
    };
    let backend = SyntheticBackend::new(
        seqs.iter().map(|s| s.world.clone()).collect(),
        acfg.camera,
        PromptConfig::default(),
    );
    let frames = annotate_dataset(&seqs, &backend, &acfg)?;
    let header = DatasetHeader::new(frames.len(), acfg.teacher_steps, acfg.visibility_threshold, cfg.seed);
    let violations = validate_dataset(&header, &frames);
    if !violations.is_empty() {
        for v in violations.iter().take(10) {
            eprintln!("line {}: {}", v.line, v.message);
        }
        return Err(format!("annotation produced {} schema violations", violations.len()).into());
    }
    let mut buf = Vec::new();
    write_dataset(&header, &frames, &mut buf)?;
    write_artifact(&cfg.dataset, &buf)?;
    let objects: usize = frames.iter().map(|f| f.objects.len()).sum();
    let prompts: usize = frames.iter().flat_map(|f| &f.objects).map(|o| o.prompts.len()).sum();
    println!(
        "sequences {} frames {} objects {} prompts {}",
        seqs.len(),
        frames.len(),
        objects,
        prompts
    );
    Ok(())
}

pub fn train_cmd(cfg: &RunConfig) -> CmdResult {
    let (_, frames) = load_dataset(cfg)?;
    let init = cfg.init_checkpoint.as_deref().map(load_checkpoint).transpose()?;
    let policy = init.as_ref().map_or(cfg.policy(), |c| c.params.config);
    let set = TrainingSet::from_frames(&frames, &policy)?;
    println!("training samples {} (objects with prompts)", set.len());
    let objective = cfg.objective();
    let mut curve = LossCurve::default();

    let run = |stage: Stage, init, curve: &mut LossCurve| -> Result<Checkpoint, Box<dyn std::error::Error>> {
        let tc = cfg.train_config(stage);
        let out = train(&set, init, &policy, &tc, &objective)?;
        let mut used = objective;
        if stage == Stage::Pretrain {
            used.lambda_col = 0.0;
        }
        if let Some(r) = out.curve.rows.last() {
            println!(
                "{} step {} total {:.6} pose {:.6} col {:.6} smooth {:.6}",
                stage.as_str(),
                r.step,
                r.total,
                r.j_pose,
                r.j_col,
                r.j_smooth
            );
        }
        curve.rows.extend(out.curve.rows);
        Ok(Checkpoint::new(out.params, tc, used))
    };

    let init_params = init.map(|c| c.params);
    let last = match cfg.stages {
        Stages::Pretrain => run(Stage::Pretrain, init_params, &mut curve)?,
        Stages::Finetune => {
            if init_params.is_none() {
                return Err("stages = finetune needs init_checkpoint pointing at a pretrained checkpoint".into());
            }
            run(Stage::Finetune, init_params, &mut curve)?
        }
        Stages::Both => {
            let pre = run(Stage::Pretrain, init_params, &mut curve)?;
            write_artifact(&cfg.pretrain_checkpoint, pre.to_json()?.as_bytes())?;
            run(Stage::Finetune, Some(pre.params), &mut curve)?
        }
    };
    write_artifact(&cfg.checkpoint, last.to_json()?.as_bytes())?;
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    write_artifact(&cfg.loss_csv, &buf)
}

fn build_suite(cfg: &RunConfig) -> Result<Vec<Episode>, Box<dyn std::error::Error>> {
    let mut out = Vec::new();
    for c in cfg.categories()? {
        out.extend(suite(c, cfg.suite_episodes, cfg.suite_seed, &ScenarioConfig::default(), &cfg.suite_config()));
    }
    for (k, ep) in out.iter_mut().enumerate() {
        ep.id = k;
    }
    Ok(out)
}

fn load_suite(cfg: &RunConfig) -> Result<Vec<Episode>, Box<dyn std::error::Error>> {
    if cfg.generate_suite {
        let s = build_suite(cfg)?;
        let mut buf = Vec::new();
        write_suite(&s, &mut buf)?;
        write_artifact(&cfg.suite, &buf)?;
        return Ok(s);
    }
    let s = read_suite(open(&cfg.suite, "suite")?)?;
    for ep in &s {
        ep.validate()?;
    }
    Ok(s)
}

fn print_report(label: &str, r: &EvalReport) {
    let cats: Vec<String> = r
        .categories
        .iter()
        .map(|(k, c)| format!("{k} {}/{} ({:.3})", c.successes, c.episodes, c.success_rate))
        .collect();
    println!(
        "{label}: total {:.3} collision {:.3} | {}",
        r.total,
        r.collision_rate,
        cats.join(" | ")
    );
}

#[derive(Serialize)]
struct EvalResult {
    report: EvalReport,
    baseline: Option<EvalReport>,
}

pub fn eval(cfg: &RunConfig) -> CmdResult {
    let episodes = load_suite(cfg)?;
    let params = cfg.run_params();
    let ckpt = match cfg.controller {
        ControllerKind::Policy => Some(load_checkpoint(&cfg.checkpoint)?),
        ControllerKind::Planner => None,
    };
    let controller = ckpt.as_ref().map_or(Controller::Planner, |c| Controller::Policy(&c.params));
    let (report, records) = evaluate(&episodes, controller, &params)?;
    print_report(&report.controller, &report);
    let baseline = match &cfg.baseline_checkpoint {
        Some(p) => {
            let b = load_checkpoint(p)?;
            let (r, _) = evaluate(&episodes, Controller::Policy(&b.params), &params)?;
            print_report("baseline", &r);
            Some(r)
        }
        None => None,
    };
    if let Some(dir) = &cfg.svg_dir {
        for (ep, rec) in episodes.iter().zip(&records) {
            write_artifact(&dir.join(format!("episode_{:04}.svg", ep.id)), trajectory_svg(ep, rec).as_bytes())?;
            let mut buf = Vec::new();
            trajectory_csv(rec, &mut buf)?;
            write_artifact(&dir.join(format!("episode_{:04}.csv", ep.id)), &buf)?;
        }
    }
    write_report(cfg, "eval", EvalResult { report, baseline })
}

pub fn plan(cfg: &RunConfig) -> CmdResult {
    let path: &PathBuf = cfg.world.as_ref().ok_or("plan needs a world file (world = ...)")?;
    let wf = WorldFile::load(path).map_err(|e| format!("world {}: {e}", path.display()))?;
    let world = &wf.world;
    let goal = world
        .object_position(cfg.target, 0.0)
        .ok_or_else(|| format!("target {} not in world", cfg.target))?;
    let start = lastmile_core::geom::Pose2::new(cfg.start[0], cfg.start[1], cfg.start[2]);
    // The lattice planner sees a snapshot of the world at t = 0.
    let obstacles = world.planner_obstacles(0.0, Some(cfg.target));
    let out = receding_horizon_control(&start, goal, &obstacles, &cfg.planner(), cfg.max_steps, 0.2);
    let mut buf = Vec::new();
    serde_json::to_writer(
        &mut buf,
        &SchemaLine {
            schema: TRACE_SCHEMA,
            version: TRACE_VERSION,
        },
    )?;
    buf.push(b'\n');
    write_trace_jsonl(&out.trace, &mut buf)?;
    write_artifact(&cfg.trace, &buf)?;
    let end = out.trajectory.last().copied().unwrap_or(start);
    println!(
        "termination {:?} steps {} final distance {:.3}",
        out.termination,
        out.commands.len(),
        end.position().distance(&goal)
    );
    if out.termination == Termination::Collision {
        println!("planner path collided");
    }
    Ok(())
}

pub fn ablate(cfg: &RunConfig) -> CmdResult {
    let (_, frames) = load_dataset(cfg)?;
    let table: AblationTable = data_ablation(&frames, &cfg.policy(), &cfg.objective(), &cfg.ablation_config())?;
    for r in &table.rows {
        println!("fraction {:.3} frames {} median mse {:.6}", r.fraction, r.frames, r.median_mse);
    }
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    write_artifact(&cfg.ablation_csv, &buf)?;
    write_report(cfg, "ablate", table)
}

pub fn plot(cfg: &RunConfig) -> CmdResult {
    let episodes = load_suite(cfg)?;
    let ep = episodes
        .get(cfg.episode)
        .ok_or_else(|| format!("episode {} out of range (suite has {})", cfg.episode, episodes.len()))?;
    let ckpt = match cfg.controller {
        ControllerKind::Policy => Some(load_checkpoint(&cfg.checkpoint)?),
        ControllerKind::Planner => None,
    };
    let controller = ckpt.as_ref().map_or(Controller::Planner, |c| Controller::Policy(&c.params));
    let rec = run_episode(ep, controller, &cfg.run_params())?;
    let mut buf = Vec::new();
    trajectory_csv(&rec, &mut buf)?;
    write_artifact(&cfg.plot_csv, &buf)?;
    write_artifact(&cfg.plot_svg, trajectory_svg(ep, &rec).as_bytes())?;
    println!(
        "episode {} {}: {:?} after {} steps, final distance {:.3}",
        ep.id,
        ep.category.as_str(),
        rec.termination,
        rec.steps,
        rec.final_distance
    );
    Ok(())
}
