//! Independent reference implementations. Nothing here calls into the
//! library's numerics.

/// Primitive table written out by hand, in planner index order.
pub const PRIMITIVES: [(f64, f64); 15] = [
    (0.0, 0.0),
    (0.2, 0.0),
    (0.2, 0.3),
    (0.2, 0.6),
    (0.2, 0.9),
    (0.2, -0.3),
    (0.2, -0.6),
    (0.2, -0.9),
    (0.5, 0.0),
    (0.5, 0.3),
    (0.5, 0.6),
    (0.5, 0.9),
    (0.5, -0.3),
    (0.5, -0.6),
    (0.5, -0.9),
];

/// Forward-Euler integration of the unicycle with a fine sub-step.
/// Returns the pose after each command.
pub fn euler_rollout(p0: (f64, f64, f64), cmds: &[(f64, f64)], dt: f64, sub_dt: f64) -> Vec<(f64, f64, f64)> {
    let (mut x, mut y, mut th) = p0;
    let subs = (dt / sub_dt).round() as usize;
    let h = dt / subs as f64;
    let mut out = Vec::with_capacity(cmds.len());
    for &(v, w) in cmds {
        for _ in 0..subs {
            x += v * th.cos() * h;
            y += v * th.sin() * h;
            th += w * h;
        }
        out.push((x, y, th));
    }
    out
}

/// Exact arc step in the textbook radius form.
pub fn arc_step(p: (f64, f64, f64), v: f64, w: f64, dt: f64) -> (f64, f64, f64) {
    let (x, y, th) = p;
    if w == 0.0 {
        return (x + v * dt * th.cos(), y + v * dt * th.sin(), th);
    }
    let r = v / w;
    let th1 = th + w * dt;
    (x + r * (th1.sin() - th.sin()), y - r * (th1.cos() - th.cos()), th1)
}

/// Brute-force lattice costs: for every primitive, the smallest squared
/// goal distance over its eight poses plus the penalty when any pose is
/// strictly inside the robot radius of an obstacle point.
pub fn brute_force_costs(
    p0: (f64, f64, f64),
    goal: (f64, f64),
    obstacles: &[(f64, f64)],
    robot_radius: f64,
    penalty: f64,
    dt: f64,
) -> Vec<f64> {
    PRIMITIVES
        .iter()
        .map(|&(v, w)| {
            let mut p = p0;
            let mut reach = f64::INFINITY;
            let mut hit = false;
            for _ in 0..8 {
                p = arc_step(p, v, w, dt);
                reach = reach.min((p.0 - goal.0).powi(2) + (p.1 - goal.1).powi(2));
                hit |= obstacles
                    .iter()
                    .any(|o| ((p.0 - o.0).powi(2) + (p.1 - o.1).powi(2)).sqrt() < robot_radius);
            }
            reach + if hit { penalty } else { 0.0 }
        })
        .collect()
}

/// First index of the minimum.
pub fn argmin_first(costs: &[f64]) -> usize {
    let mut best = 0;
    for (i, c) in costs.iter().enumerate() {
        if *c < costs[best] {
            best = i;
        }
    }
    best
}

/// Central finite-difference gradient of `f` at `x` along the listed coordinates.
pub fn central_diff<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], coords: &[usize], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    coords
        .iter()
        .map(|&i| {
            let orig = probe[i];
            let step = h * orig.abs().max(1.0);
            probe[i] = orig + step;
            let up = f(&probe);
            probe[i] = orig - step;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Norm-wise relative error ||a - b|| / max(||b||, floor).
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(floor)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
