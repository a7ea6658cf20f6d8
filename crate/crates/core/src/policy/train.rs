//! Two-stage training on annotated frames: pretraining without the teacher
//! term, then fine-tuning with it.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig};
use super::encoder::{encode_instruction, InstructionEmbedding};
use super::features::{ObservationBlock, ObservationFeature};
use super::network::{backward_raw, forward_raw, PolicyConfig, PolicyParams};
use crate::annotate::AnnotatedFrame;
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::geom::{Point2, Pose2};
use crate::objective::{objective_gradient, ObjectiveBreakdown, ObjectiveConfig};

/// Samples per parallel gradient chunk. Fixed so that the reduction order,
/// and therefore every floating-point sum, is independent of thread count.
const GRAD_CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSample {
    pub input: Vec<f64>,
    pub embedding: InstructionEmbedding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSamples {
    pub goal: Point2,
    pub teacher: Vec<Pose2>,
    pub prompts: Vec<PromptSample>,
}

/// Network-ready view of a dataset; frames without objects are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub frames: Vec<Vec<ObjectSamples>>,
}

impl TrainingSet {
    pub fn from_frames(frames: &[AnnotatedFrame], cfg: &PolicyConfig) -> Result<Self> {
        let built: Vec<Vec<ObjectSamples>> = frames
            .par_iter()
            .map(|f| {
                f.objects
                    .iter()
                    .map(|o| {
                        let prompts = o
                            .prompts
                            .iter()
                            .map(|p| {
                                let embedding = encode_instruction(&p.text, cfg.embed_dim)?;
                                let obs = ObservationFeature::new(
                                    ObservationBlock::from_detections(&f.detections, &embedding, cfg.slots)?,
                                    ObservationBlock::from_detections(
                                        &f.previous_detections,
                                        &embedding,
                                        cfg.slots,
                                    )?,
                                );
                                Ok(PromptSample {
                                    input: obs.to_input(),
                                    embedding,
                                })
                            })
                            .collect::<Result<Vec<_>>>()?;
                        Ok(ObjectSamples {
                            goal: o.pose,
                            teacher: o.teacher.clone(),
                            prompts,
                        })
                    })
                    .filter(|o: &Result<ObjectSamples>| o.as_ref().map_or(true, |o| !o.prompts.is_empty()))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            frames: built.into_iter().filter(|f| !f.is_empty()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn get(&self, ix: BatchIndex) -> (&ObjectSamples, &PromptSample) {
        let o = &self.frames[ix.frame][ix.object];
        (o, &o.prompts[ix.prompt])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BatchIndex {
    pub frame: usize,
    pub object: usize,
    pub prompt: usize,
}

/// Uniform frame, then uniform object within it, then uniform prompt.
pub fn sample_batch<R: Rng + ?Sized>(set: &TrainingSet, batch_size: usize, rng: &mut R) -> Vec<BatchIndex> {
    (0..batch_size)
        .map(|_| {
            let frame = rng.random_range(0..set.frames.len());
            let object = rng.random_range(0..set.frames[frame].len());
            let prompt = rng.random_range(0..set.frames[frame][object].prompts.len());
            BatchIndex {
                frame,
                object,
                prompt,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pretrain,
    Finetune,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Pretrain => "pretrain",
            Stage::Finetune => "finetune",
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pretrain" => Ok(Stage::Pretrain),
            "finetune" => Ok(Stage::Finetune),
            other => Err(Error::config(format!("unknown stage {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub stage: Stage,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 256,
            stage: Stage::Pretrain,
            epochs: 10,
            steps_per_epoch: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config("learning_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        Ok(())
    }
}

pub const LOSS_SCHEMA: &str = "lastmile.loss";
pub const LOSS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub stage: Stage,
    pub epoch: usize,
    /// Optimizer step count at the end of the epoch.
    pub step: u64,
    pub j_pose: f64,
    pub j_col: f64,
    pub j_smooth: f64,
    pub total: f64,
    pub epsilon_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LossCurve {
    pub rows: Vec<LossRow>,
}

impl LossCurve {
    /// CSV with a leading `# schema=... version=...` comment line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# schema={LOSS_SCHEMA} version={LOSS_VERSION}")?;
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let rows = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(r)
            .deserialize()
            .collect::<std::result::Result<Vec<LossRow>, _>>()?;
        Ok(Self { rows })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    pub curve: LossCurve,
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    j_pose: f64,
    j_col: f64,
    j_smooth: f64,
    total: f64,
    epsilon: f64,
}

impl Sums {
    fn add(&mut self, b: &ObjectiveBreakdown) {
        self.j_pose += b.j_pose;
        self.j_col += b.j_col;
        self.j_smooth += b.j_smooth;
        self.total += b.total;
        self.epsilon += f64::from(b.epsilon);
    }

    fn add_mean(&mut self, b: &ObjectiveBreakdown, epsilon_rate: f64) {
        self.j_pose += b.j_pose;
        self.j_col += b.j_col;
        self.j_smooth += b.j_smooth;
        self.total += b.total;
        self.epsilon += epsilon_rate;
    }

    fn merge(&mut self, o: &Sums) {
        self.j_pose += o.j_pose;
        self.j_col += o.j_col;
        self.j_smooth += o.j_smooth;
        self.total += o.total;
        self.epsilon += o.epsilon;
    }

    fn scaled(&self, s: f64) -> Sums {
        Sums {
            j_pose: self.j_pose * s,
            j_col: self.j_col * s,
            j_smooth: self.j_smooth * s,
            total: self.total * s,
            epsilon: self.epsilon * s,
        }
    }
}

/// Mean objective and its gradient over a batch, reduced in a fixed order.
pub fn batch_gradient(
    params: &PolicyParams,
    set: &TrainingSet,
    batch: &[BatchIndex],
    obj: &ObjectiveConfig,
) -> Result<(ObjectiveBreakdown, Vec<f64>, f64)> {
    let n = params.len();
    let partials = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut grad = vec![0.0; n];
            let mut sums = Sums::default();
            for ix in chunk {
                let (o, p) = set.get(*ix);
                let (seq, cache) = forward_raw(params, &p.input, p.embedding.as_slice())?;
                let g = objective_gradient(&seq, &Pose2::IDENTITY, o.goal, &o.teacher, obj)?;
                sums.add(&g.breakdown);
                backward_raw(params, &cache, &g.grad, &mut grad)?;
            }
            Ok((grad, sums))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grad = vec![0.0; n];
    let mut sums = Sums::default();
    for (g, s) in &partials {
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
        sums.merge(s);
    }
    let inv = 1.0 / batch.len() as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    let mean = sums.scaled(inv);
    Ok((
        ObjectiveBreakdown {
            j_pose: mean.j_pose,
            j_col: mean.j_col,
            j_smooth: mean.j_smooth,
            total: mean.total,
            epsilon: u8::from(mean.epsilon > 0.5),
        },
        grad,
        mean.epsilon,
    ))
}

/// Pretraining ignores `lambda_col`; fine-tuning requires initial params and
/// a positive `lambda_col`. Passing `init` to pretraining resumes it.
pub fn train(
    set: &TrainingSet,
    init: Option<PolicyParams>,
    policy_cfg: &PolicyConfig,
    cfg: &TrainConfig,
    objective: &ObjectiveConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    objective.validate()?;
    if set.is_empty() {
        return Err(Error::domain("training set has no annotated objects"));
    }
    let mut obj = *objective;
    obj.horizon = policy_cfg.horizon;
    let mut params = match (cfg.stage, init) {
        (_, Some(p)) => p,
        (Stage::Pretrain, None) => PolicyParams::init(*policy_cfg, cfg.seed)?,
        (Stage::Finetune, None) => {
            return Err(Error::config("finetune stage needs a pretrained checkpoint"))
        }
    };
    params.check_shapes()?;
    if params.config != *policy_cfg {
        return Err(Error::config("initial params were built for a different policy config"));
    }
    match cfg.stage {
        Stage::Pretrain => obj.lambda_col = 0.0,
        Stage::Finetune if !(obj.lambda_col > 0.0) => {
            return Err(Error::config("finetune stage needs lambda_col > 0"))
        }
        Stage::Finetune => {}
    }
    let adam = AdamConfig::with_lr(cfg.learning_rate);
    let stage_tag = cfg.stage as u64 + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, stage_tag, params.adam.step));
    let mut curve = LossCurve::default();
    let mut last_finite: Option<LossRow> = None;

    for epoch in 0..cfg.epochs {
        let mut sums = Sums::default();
        for _ in 0..cfg.steps_per_epoch {
            let batch = sample_batch(set, cfg.batch_size, &mut rng);
            let (b, grad, eps_rate) = batch_gradient(&params, set, &batch, &obj)?;
            if !b.is_finite() {
                return Err(diverged(&last_finite, params.adam.step));
            }
            adam_step(&mut params, &grad, &adam).map_err(|_| diverged(&last_finite, params.adam.step))?;
            sums.add_mean(&b, eps_rate);
        }
        let mean = sums.scaled(1.0 / cfg.steps_per_epoch.max(1) as f64);
        let row = LossRow {
            stage: cfg.stage,
            epoch,
            step: params.adam.step,
            j_pose: mean.j_pose,
            j_col: mean.j_col,
            j_smooth: mean.j_smooth,
            total: mean.total,
            epsilon_rate: mean.epsilon,
        };
        last_finite = Some(row);
        curve.rows.push(row);
    }
    Ok(TrainOutcome { params, curve })
}

fn diverged(last: &Option<LossRow>, step: u64) -> Error {
    match last {
        Some(r) => Error::Diverged(format!(
            "non-finite loss at step {step}; last finite epoch {} total {:.6} (pose {:.6}, col {:.6}, smooth {:.6})",
            r.epoch, r.total, r.j_pose, r.j_col, r.j_smooth
        )),
        None => Error::Diverged(format!("non-finite loss at step {step} before the first epoch finished")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::{AnnotatedObject, PixelBox, PromptCategory, PromptLabel};
    use crate::geom::{rollout, TwistBounds};
    use crate::policy::{policy_forward, Detection};

    fn small_cfg() -> PolicyConfig {
        PolicyConfig {
            slots: 2,
            embed_dim: 8,
            hidden: 16,
            horizon: 12,
            ..Default::default()
        }
    }

    fn obj(id: u32, goal: Point2, prompts: &[&str], teacher: Vec<Pose2>) -> AnnotatedObject {
        AnnotatedObject {
            object_id: id,
            pose: goal,
            visibility: 1.0,
            prompts: prompts
                .iter()
                .map(|t| PromptLabel {
                    text: t.to_string(),
                    category: PromptCategory::Simple,
                })
                .collect(),
            teacher,
            goal_crop: PixelBox { u: 0, v: 0, w: 1, h: 1 },
        }
    }

    fn frame(objects: Vec<AnnotatedObject>) -> AnnotatedFrame {
        AnnotatedFrame {
            frame_id: 0,
            sequence: 0,
            time: 0.0,
            robot_pose: Pose2::IDENTITY,
            detections: objects
                .iter()
                .map(|o| Detection {
                    rel: o.pose,
                    descriptor: "chair".into(),
                })
                .collect(),
            previous_detections: vec![],
            objects,
        }
    }

    #[test]
    fn single_tuple_always_sampled() {
        let f = frame(vec![obj(1, Point2::new(2.0, 0.0), &["go to the chair"], vec![Pose2::IDENTITY; 8])]);
        let set = TrainingSet::from_frames(&[f], &small_cfg()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = sample_batch(&set, 50, &mut rng);
        assert!(b.iter().all(|i| *i == BatchIndex { frame: 0, object: 0, prompt: 0 }));
    }

    #[test]
    fn object_marginal_uniform() {
        let t = vec![Pose2::IDENTITY; 8];
        let frames = vec![
            frame(vec![
                obj(1, Point2::new(2.0, 0.0), &["go to the chair"], t.clone()),
                obj(2, Point2::new(2.0, 1.0), &["go to the chair"], t.clone()),
                obj(3, Point2::new(2.0, -1.0), &["go to the chair", "go to the white chair"], t.clone()),
            ]),
            frame(vec![obj(4, Point2::new(1.0, 0.0), &["go to the chair"], t)]),
        ];
        let set = TrainingSet::from_frames(&frames, &small_cfg()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = sample_batch(&set, 10_000, &mut rng);
        let mut counts = [0usize; 3];
        for d in draws.iter().filter(|d| d.frame == 0) {
            counts[d.object] += 1;
        }
        let n: usize = counts.iter().sum();
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let e = n as f64 / 3.0;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        // 2 degrees of freedom, p = 0.001
        assert!(chi2 < 13.8, "chi-square {chi2} for {counts:?}");
        let frame0 = draws.iter().filter(|d| d.frame == 0).count() as f64 / 10_000.0;
        assert!((frame0 - 0.5).abs() < 3.0 * (0.25f64 / 10_000.0).sqrt());
    }

    #[test]
    fn pretrain_single_record_converges() {
        let cfg = PolicyConfig {
            hidden: 32,
            ..small_cfg()
        };
        let f = frame(vec![obj(1, Point2::new(2.0, 0.0), &["go to the chair"], vec![Pose2::IDENTITY; 8])]);
        let set = TrainingSet::from_frames(&[f], &cfg).unwrap();
        let tc = TrainConfig {
            learning_rate: 3e-3,
            batch_size: 1,
            epochs: 10,
            steps_per_epoch: 50,
            seed: 2,
            ..Default::default()
        };
        let out = train(&set, None, &cfg, &tc, &ObjectiveConfig::default()).unwrap();
        let first = out.curve.rows[0].total;
        let last = out.curve.rows.last().unwrap().total;
        assert!(last <= 0.1 * first, "loss {first} -> {last}");
        assert_eq!(out.params.adam.step, 500);
    }

    #[test]
    fn finetune_toward_own_rollout_keeps_pose_loss() {
        let cfg = PolicyConfig {
            hidden: 32,
            ..small_cfg()
        };
        let goal = Point2::new(2.0, 0.5);
        let mut f = frame(vec![obj(1, goal, &["go to the chair"], vec![Pose2::IDENTITY; 8])]);
        let pre_cfg = TrainConfig {
            learning_rate: 3e-3,
            batch_size: 1,
            epochs: 4,
            steps_per_epoch: 100,
            seed: 3,
            ..Default::default()
        };
        let set = TrainingSet::from_frames(std::slice::from_ref(&f), &cfg).unwrap();
        let pre = train(&set, None, &cfg, &pre_cfg, &ObjectiveConfig::default()).unwrap();
        let (_, p) = set.get(BatchIndex { frame: 0, object: 0, prompt: 0 });
        let seq = forward_raw(&pre.params, &p.input, p.embedding.as_slice()).unwrap().0;
        f.objects[0].teacher = rollout(&Pose2::IDENTITY, &seq)[..8].to_vec();
        let set = TrainingSet::from_frames(&[f], &cfg).unwrap();
        let fine_cfg = TrainConfig {
            stage: Stage::Finetune,
            epochs: 1,
            steps_per_epoch: 20,
            ..pre_cfg
        };
        let fine = train(&set, Some(pre.params.clone()), &cfg, &fine_cfg, &ObjectiveConfig::default()).unwrap();
        let pre_pose = pre.curve.rows.last().unwrap().j_pose;
        let r = fine.curve.rows[0];
        assert!(r.j_col < 1e-2, "j_col {}", r.j_col);
        assert!(r.j_pose <= pre_pose + 1e-2, "pose {} vs {}", r.j_pose, pre_pose);
        assert_eq!(fine.params.adam.step, 420);
    }

    #[test]
    fn finetune_without_params_errors() {
        let f = frame(vec![obj(1, Point2::new(2.0, 0.0), &["go to the chair"], vec![Pose2::IDENTITY; 8])]);
        let set = TrainingSet::from_frames(&[f], &small_cfg()).unwrap();
        let tc = TrainConfig {
            stage: Stage::Finetune,
            ..Default::default()
        };
        assert!(matches!(
            train(&set, None, &small_cfg(), &tc, &ObjectiveConfig::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn deterministic_curves() {
        let t = vec![Pose2::IDENTITY; 8];
        let frames = vec![frame(vec![
            obj(1, Point2::new(2.0, 0.0), &["go to the chair"], t.clone()),
            obj(2, Point2::new(1.0, 1.0), &["go to the white chair"], t),
        ])];
        let set = TrainingSet::from_frames(&frames, &small_cfg()).unwrap();
        let tc = TrainConfig {
            batch_size: 40,
            epochs: 2,
            steps_per_epoch: 5,
            learning_rate: 1e-3,
            ..Default::default()
        };
        let a = train(&set, None, &small_cfg(), &tc, &ObjectiveConfig::default()).unwrap();
        let b = train(&set, None, &small_cfg(), &tc, &ObjectiveConfig::default()).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        a.curve.write_csv(&mut ca).unwrap();
        b.curve.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(a.params.weights, b.params.weights);
        let back = LossCurve::read_csv(ca.as_slice()).unwrap();
        assert_eq!(back, a.curve);
    }

    #[test]
    fn outputs_stay_in_bounds_after_training() {
        let f = frame(vec![obj(1, Point2::new(4.0, 3.0), &["go to the chair"], vec![Pose2::IDENTITY; 8])]);
        let set = TrainingSet::from_frames(&[f.clone()], &small_cfg()).unwrap();
        let tc = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 1,
            epochs: 1,
            steps_per_epoch: 200,
            ..Default::default()
        };
        let out = train(&set, None, &small_cfg(), &tc, &ObjectiveConfig::default()).unwrap();
        let e = encode_instruction("go to the chair", 8).unwrap();
        let obs = ObservationFeature::new(
            ObservationBlock::from_detections(&f.detections, &e, 2).unwrap(),
            ObservationBlock::empty(2),
        );
        let seq = policy_forward(&out.params, &obs, &e).unwrap();
        let b = TwistBounds::default();
        assert!(seq.commands().iter().all(|u| b.contains(u)));
    }
}
