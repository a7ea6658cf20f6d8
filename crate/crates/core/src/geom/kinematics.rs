//! Unicycle kinematics with exact constant-twist arc integration and its
//! analytic Jacobian.

use super::{normalize_angle, CommandSequence, Pose2, Twist};
use crate::error::{Error, Result};

/// Below this angular rate a step is integrated as a straight segment.
const STRAIGHT_OMEGA: f64 = 1e-9;

fn sinc(a: f64) -> f64 {
    if a.abs() < 1e-4 {
        let a2 = a * a;
        1.0 - a2 / 6.0 + a2 * a2 / 120.0
    } else {
        a.sin() / a
    }
}

fn sinc_prime(a: f64) -> f64 {
    if a.abs() < 1e-3 {
        let a2 = a * a;
        -a / 3.0 + a * a2 / 30.0
    } else {
        (a * a.cos() - a.sin()) / (a * a)
    }
}

/// Chord of one arc step written with the half-angle identity, which stays
/// well conditioned as omega -> 0.
#[derive(Debug, Clone, Copy)]
struct ArcStep {
    dx: f64,
    dy: f64,
    dtheta: f64,
    // partials of (dx, dy) w.r.t. (v, omega); d(dtheta)/d(omega) = dt.
    dx_dv: f64,
    dy_dv: f64,
    dx_dw: f64,
    dy_dw: f64,
}

fn arc_step(theta: f64, u: &Twist, dt: f64) -> ArcStep {
    let half = 0.5 * u.omega * dt;
    let mid = theta + half;
    let (s_mid, c_mid) = mid.sin_cos();
    let sc = sinc(half);
    let scp = sinc_prime(half);
    let dx_dv = dt * c_mid * sc;
    let dy_dv = dt * s_mid * sc;
    ArcStep {
        dx: u.v * dx_dv,
        dy: u.v * dy_dv,
        dtheta: u.omega * dt,
        dx_dv,
        dy_dv,
        dx_dw: u.v * dt * 0.5 * dt * (-s_mid * sc + c_mid * scp),
        dy_dw: u.v * dt * 0.5 * dt * (c_mid * sc + s_mid * scp),
    }
}

/// Integrates one constant twist over `dt`.
pub fn integrate_step(p: &Pose2, u: &Twist, dt: f64) -> Result<Pose2> {
    if !p.is_finite() || !u.is_finite() || !dt.is_finite() {
        return Err(Error::domain("non-finite input to integrate_step"));
    }
    if dt <= 0.0 {
        return Err(Error::domain(format!("dt must be positive, got {dt}")));
    }
    Ok(step_unchecked(p, u, dt))
}

fn step_unchecked(p: &Pose2, u: &Twist, dt: f64) -> Pose2 {
    if u.omega.abs() < STRAIGHT_OMEGA {
        let (s, c) = p.theta.sin_cos();
        return Pose2 {
            x: p.x + u.v * dt * c,
            y: p.y + u.v * dt * s,
            theta: normalize_angle(p.theta + u.omega * dt),
        };
    }
    let st = arc_step(p.theta, u, dt);
    Pose2 {
        x: p.x + st.dx,
        y: p.y + st.dy,
        theta: normalize_angle(p.theta + st.dtheta),
    }
}

/// Poses after each command: `out[k]` is the pose once commands `0..=k` ran.
pub fn rollout(p0: &Pose2, seq: &CommandSequence) -> Vec<Pose2> {
    let mut out = Vec::with_capacity(seq.len());
    let mut p = *p0;
    for u in seq.commands() {
        p = step_unchecked(&p, u, seq.dt());
        out.push(p);
    }
    out
}

/// d(x, y, theta)_k / d(v_j, omega_j) for every output pose k and command j.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutJacobian {
    n: usize,
    // row-major [k][j], each entry [[dx/dv, dx/dw], [dy/dv, dy/dw], [dth/dv, dth/dw]]
    entries: Vec<[[f64; 2]; 3]>,
}

impl RolloutJacobian {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, pose: usize, command: usize) -> &[[f64; 2]; 3] {
        &self.entries[pose * self.n + command]
    }

    /// Pulls a per-pose planar gradient back onto the commands:
    /// returns sum_k g_k^T d(x, y)_k / d(v_j, omega_j) for every j.
    pub fn pull_back_planar(&self, pose_grads: &[[f64; 2]]) -> Vec<[f64; 2]> {
        let mut out = vec![[0.0; 2]; self.n];
        for (k, g) in pose_grads.iter().enumerate() {
            if g[0] == 0.0 && g[1] == 0.0 {
                continue;
            }
            for (j, slot) in out.iter_mut().enumerate().take(k + 1) {
                let e = self.get(k, j);
                slot[0] += g[0] * e[0][0] + g[1] * e[1][0];
                slot[1] += g[0] * e[0][1] + g[1] * e[1][1];
            }
        }
        out
    }
}

pub fn rollout_jacobian(p0: &Pose2, seq: &CommandSequence) -> RolloutJacobian {
    rollout_with_jacobian(p0, seq).1
}

/// Rollout and its Jacobian in a single forward sweep.
pub fn rollout_with_jacobian(p0: &Pose2, seq: &CommandSequence) -> (Vec<Pose2>, RolloutJacobian) {
    let n = seq.len();
    let dt = seq.dt();
    let mut entries = vec![[[0.0; 2]; 3]; n * n];
    let mut poses = Vec::with_capacity(n);
    let mut p = *p0;
    for (k, u) in seq.commands().iter().enumerate() {
        let st = arc_step(p.theta, u, dt);
        // Earlier commands reach pose k through theta_{k-1}.
        if k > 0 {
            for j in 0..k {
                let prev = entries[(k - 1) * n + j];
                entries[k * n + j] = [
                    [
                        prev[0][0] - st.dy * prev[2][0],
                        prev[0][1] - st.dy * prev[2][1],
                    ],
                    [
                        prev[1][0] + st.dx * prev[2][0],
                        prev[1][1] + st.dx * prev[2][1],
                    ],
                    prev[2],
                ];
            }
        }
        entries[k * n + k] = [[st.dx_dv, st.dx_dw], [st.dy_dv, st.dy_dw], [0.0, dt]];
        p = step_unchecked(&p, u, dt);
        poses.push(p);
    }
    (poses, RolloutJacobian { n, entries })
}
