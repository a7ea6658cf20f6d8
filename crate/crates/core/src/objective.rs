//! Training objective over a command sequence: goal reaching, distillation
//! toward a collision-avoiding teacher, and command smoothness.
//!
//! `total = j_pose + lambda_col * epsilon * j_col + j_smooth`, where `epsilon`
//! switches the teacher term off once the goal is within `mask_radius` of the
//! start pose.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{rollout_with_jacobian, CommandSequence, Point2, Pose2, DEFAULT_HORIZON};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    /// Policy horizon N.
    pub horizon: usize,
    /// Teacher horizon M.
    pub teacher_steps: usize,
    pub mask_radius: f64,
    pub lambda_col: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            teacher_steps: 8,
            mask_radius: 1.0,
            lambda_col: 1.0,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.teacher_steps == 0 || self.teacher_steps > self.horizon {
            return Err(Error::config(format!(
                "teacher_steps must be in 1..={}, got {}",
                self.horizon, self.teacher_steps
            )));
        }
        if !(self.mask_radius > 0.0) {
            return Err(Error::config("mask_radius must be positive"));
        }
        if !(self.lambda_col >= 0.0) || !self.lambda_col.is_finite() {
            return Err(Error::config("lambda_col must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub j_pose: f64,
    pub j_col: f64,
    pub j_smooth: f64,
    pub total: f64,
    pub epsilon: u8,
}

impl ObjectiveBreakdown {
    pub fn compose(j_pose: f64, j_col: f64, j_smooth: f64, epsilon: u8, lambda_col: f64) -> Self {
        Self {
            j_pose,
            j_col,
            j_smooth,
            total: j_pose + lambda_col * f64::from(epsilon) * j_col + j_smooth,
            epsilon,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.j_pose.is_finite()
            && self.j_col.is_finite()
            && self.j_smooth.is_finite()
            && self.total.is_finite()
    }
}

/// Squared planar distance from the final pose to the goal.
pub fn j_pose(poses: &[Pose2], goal: Point2) -> f64 {
    poses
        .last()
        .map_or(0.0, |p| p.position().distance_sq(&goal))
}

/// Sum of squared planar distances between the first `teacher.len()` poses
/// and the teacher trajectory.
pub fn j_col(poses: &[Pose2], teacher: &[Pose2]) -> Result<f64> {
    if teacher.len() > poses.len() {
        return Err(Error::LengthMismatch {
            what: "teacher trajectory (at most rollout length)",
            expected: poses.len(),
            got: teacher.len(),
        });
    }
    Ok(poses
        .iter()
        .zip(teacher)
        .map(|(p, t)| p.position().distance_sq(&t.position()))
        .sum())
}

pub fn j_smooth(seq: &CommandSequence) -> f64 {
    seq.commands()
        .windows(2)
        .map(|w| {
            let dv = w[1].v - w[0].v;
            let dw = w[1].omega - w[0].omega;
            dv * dv + dw * dw
        })
        .sum()
}

/// 0 when the goal lies strictly inside `mask_radius` of `p0`, else 1.
pub fn collision_mask(p0: &Pose2, goal: Point2, mask_radius: f64) -> u8 {
    let rel = p0.relative_point(&goal);
    u8::from(rel.norm() >= mask_radius)
}

fn check_inputs(seq: &CommandSequence, teacher: &[Pose2], cfg: &ObjectiveConfig) -> Result<()> {
    cfg.validate()?;
    seq.expect_len(cfg.horizon)?;
    if teacher.len() != cfg.teacher_steps {
        return Err(Error::LengthMismatch {
            what: "teacher trajectory",
            expected: cfg.teacher_steps,
            got: teacher.len(),
        });
    }
    Ok(())
}

pub fn total_objective(
    seq: &CommandSequence,
    p0: &Pose2,
    goal: Point2,
    teacher: &[Pose2],
    cfg: &ObjectiveConfig,
) -> Result<ObjectiveBreakdown> {
    check_inputs(seq, teacher, cfg)?;
    let poses = crate::geom::rollout(p0, seq);
    Ok(ObjectiveBreakdown::compose(
        j_pose(&poses, goal),
        j_col(&poses, teacher)?,
        j_smooth(seq),
        collision_mask(p0, goal, cfg.mask_radius),
        cfg.lambda_col,
    ))
}

/// Per-command gradients `[d/dv_k, d/domega_k]` of each objective term.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentGradients {
    pub pose: Vec<[f64; 2]>,
    pub col: Vec<[f64; 2]>,
    pub smooth: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveGradient {
    pub breakdown: ObjectiveBreakdown,
    pub grad: Vec<[f64; 2]>,
}

pub fn component_gradients(
    seq: &CommandSequence,
    p0: &Pose2,
    goal: Point2,
    teacher: &[Pose2],
    cfg: &ObjectiveConfig,
) -> Result<(ObjectiveBreakdown, ComponentGradients)> {
    check_inputs(seq, teacher, cfg)?;
    let n = seq.len();
    let (poses, jac) = rollout_with_jacobian(p0, seq);

    let mut pose_seed = vec![[0.0; 2]; n];
    let last = poses[n - 1];
    pose_seed[n - 1] = [2.0 * (last.x - goal.x), 2.0 * (last.y - goal.y)];
    let pose = jac.pull_back_planar(&pose_seed);

    let mut col_seed = vec![[0.0; 2]; n];
    for (k, t) in teacher.iter().enumerate() {
        col_seed[k] = [2.0 * (poses[k].x - t.x), 2.0 * (poses[k].y - t.y)];
    }
    let col = jac.pull_back_planar(&col_seed);

    let cmds = seq.commands();
    let mut smooth = vec![[0.0; 2]; n];
    for k in 0..n.saturating_sub(1) {
        let dv = 2.0 * (cmds[k + 1].v - cmds[k].v);
        let dw = 2.0 * (cmds[k + 1].omega - cmds[k].omega);
        smooth[k + 1][0] += dv;
        smooth[k + 1][1] += dw;
        smooth[k][0] -= dv;
        smooth[k][1] -= dw;
    }

    let breakdown = ObjectiveBreakdown::compose(
        j_pose(&poses, goal),
        j_col(&poses, teacher)?,
        j_smooth(seq),
        collision_mask(p0, goal, cfg.mask_radius),
        cfg.lambda_col,
    );
    Ok((breakdown, ComponentGradients { pose, col, smooth }))
}

/// Exact gradient of the total objective w.r.t. every `(v_k, omega_k)`.
pub fn objective_gradient(
    seq: &CommandSequence,
    p0: &Pose2,
    goal: Point2,
    teacher: &[Pose2],
    cfg: &ObjectiveConfig,
) -> Result<ObjectiveGradient> {
    let (breakdown, parts) = component_gradients(seq, p0, goal, teacher, cfg)?;
    let w_col = cfg.lambda_col * f64::from(breakdown.epsilon);
    let grad = (0..seq.len())
        .map(|k| {
            [
                parts.pose[k][0] + w_col * parts.col[k][0] + parts.smooth[k][0],
                parts.pose[k][1] + w_col * parts.col[k][1] + parts.smooth[k][1],
            ]
        })
        .collect();
    Ok(ObjectiveGradient { breakdown, grad })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{rollout, Twist};

    fn cfg(n: usize, m: usize) -> ObjectiveConfig {
        ObjectiveConfig {
            horizon: n,
            teacher_steps: m,
            ..Default::default()
        }
    }

    #[test]
    fn pose_term_examples() {
        let poses = [Pose2::new(0.0, 0.0, 0.0), Pose2::new(1.0, 2.0, 0.3)];
        assert_eq!(j_pose(&poses, Point2::new(1.0, 2.0)), 0.0);
        assert_eq!(j_pose(&poses, Point2::new(2.0, 2.0)), 1.0);
        // (1-(-0.5))^2 + (2-4)^2 ; heading ignored
        assert!((j_pose(&poses, Point2::new(-0.5, 4.0)) - 6.25).abs() < 1e-15);
    }

    #[test]
    fn col_term_examples() {
        let seq = CommandSequence::constant(Twist::new(0.4, 0.2), 10, 0.333).unwrap();
        let poses = rollout(&Pose2::IDENTITY, &seq);
        assert_eq!(j_col(&poses, &poses[..8]).unwrap(), 0.0);
        let shifted: Vec<Pose2> = poses[..8]
            .iter()
            .map(|p| Pose2::new(p.x, p.y + 1.0, p.theta))
            .collect();
        assert!((j_col(&poses, &shifted).unwrap() - 8.0).abs() < 1e-12);
        let too_long = vec![Pose2::IDENTITY; 11];
        assert!(j_col(&poses, &too_long).is_err());
        let hand = (poses[0].x - 0.5).powi(2) + (poses[0].y + 0.25).powi(2);
        assert!((j_col(&poses, &[Pose2::new(0.5, -0.25, 1.0)]).unwrap() - hand).abs() < 1e-15);
    }

    #[test]
    fn smooth_term_examples() {
        let c = CommandSequence::constant(Twist::new(0.3, -0.1), 24, 0.333).unwrap();
        assert_eq!(j_smooth(&c), 0.0);
        let alt = CommandSequence::new(
            vec![Twist::new(0.0, 0.0), Twist::new(1.0, 0.0), Twist::new(0.0, 0.0)],
            0.333,
        )
        .unwrap();
        assert_eq!(j_smooth(&alt), 2.0);
    }

    #[test]
    fn epsilon_mask_threshold() {
        let c = ObjectiveConfig::default();
        let seq = CommandSequence::constant(Twist::new(0.2, 0.0), 24, 0.333).unwrap();
        let teacher = vec![Pose2::new(0.0, 0.3, 0.0); 8];
        let near = total_objective(&seq, &Pose2::IDENTITY, Point2::new(0.5, 0.0), &teacher, &c)
            .unwrap();
        assert_eq!(near.epsilon, 0);
        assert_eq!(near.total, near.j_pose + near.j_smooth);
        let far = total_objective(&seq, &Pose2::IDENTITY, Point2::new(2.0, 0.0), &teacher, &c)
            .unwrap();
        assert_eq!(far.epsilon, 1);
        assert_eq!(far.total, far.j_pose + far.j_col + far.j_smooth);
        // the mask is measured in p0's frame
        let p0 = Pose2::new(5.0, 5.0, 1.0);
        assert_eq!(collision_mask(&p0, Point2::new(5.5, 5.0), 1.0), 0);
        assert_eq!(collision_mask(&p0, Point2::new(5.0, 6.0), 1.0), 1);
    }

    #[test]
    fn rejects_wrong_lengths() {
        let c = cfg(6, 3);
        let seq = CommandSequence::constant(Twist::ZERO, 5, 0.333).unwrap();
        let t = vec![Pose2::IDENTITY; 3];
        assert!(total_objective(&seq, &Pose2::IDENTITY, Point2::ORIGIN, &t, &c).is_err());
        let seq = CommandSequence::constant(Twist::ZERO, 6, 0.333).unwrap();
        assert!(total_objective(&seq, &Pose2::IDENTITY, Point2::ORIGIN, &t[..2], &c).is_err());
        let bad = ObjectiveConfig {
            teacher_steps: 7,
            ..c
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn gradient_signs() {
        let c = cfg(24, 8);
        let seq = CommandSequence::constant(Twist::new(0.1, 0.0), 24, 0.333).unwrap();
        let t = rollout(&Pose2::IDENTITY, &seq)[..8].to_vec();
        let (_, parts) =
            component_gradients(&seq, &Pose2::IDENTITY, Point2::new(3.0, 0.0), &t, &c).unwrap();
        assert!(parts.smooth.iter().all(|g| g == &[0.0, 0.0]));
        assert!(parts.pose[23][0] < 0.0);
        assert!(parts.col.iter().all(|g| g[0].abs() < 1e-15));
    }
}
