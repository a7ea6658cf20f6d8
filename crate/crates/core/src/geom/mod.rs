//! Planar kinematics, pinhole camera geometry and point-cloud pose estimation.
//!
//! Conventions: the robot frame is x-forward, y-left, theta counter-clockwise.
//! The camera frame is the optical frame (z forward, x right, y down) mounted
//! at the robot origin.

mod camera;
mod depth;
mod kinematics;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use camera::{
    back_project, back_project_pixels, masked_median_pose, project_to_pixel, to_planar,
    CameraIntrinsics, GroundFrame, PixelCoord,
};
pub use depth::DepthMap;
pub use kinematics::{
    integrate_step, rollout, rollout_jacobian, rollout_with_jacobian, RolloutJacobian,
};

/// Wraps an angle into (-pi, pi]. In-range angles come back unchanged and
/// `normalize_angle(-a) == -normalize_angle(a)` away from the +-pi seam.
pub fn normalize_angle(a: f64) -> f64 {
    // fmod is exact, so no rounding is introduced before the shift.
    let mut r = a % (2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    } else if r <= -PI {
        r += 2.0 * PI;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// SE(2) pose. `theta` is kept in (-pi, pi] by every constructor in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// `self * other`: `other` expressed in this pose's frame, mapped to the parent frame.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            -c * self.x - s * self.y,
            s * self.x - c * self.y,
            -self.theta,
        )
    }

    /// Maps a point given in this pose's local frame to the parent frame.
    pub fn transform_point(&self, local: &Point2) -> Point2 {
        let (s, c) = self.theta.sin_cos();
        Point2::new(
            self.x + c * local.x - s * local.y,
            self.y + s * local.x + c * local.y,
        )
    }

    /// Expresses a parent-frame point in this pose's local frame.
    pub fn relative_point(&self, world: &Point2) -> Point2 {
        let (s, c) = self.theta.sin_cos();
        let dx = world.x - self.x;
        let dy = world.y - self.y;
        Point2::new(c * dx + s * dy, -s * dx + c * dy)
    }

    /// Expresses a parent-frame pose in this pose's local frame.
    pub fn relative_pose(&self, world: &Pose2) -> Pose2 {
        self.inverse().compose(world)
    }
}

/// Linear and angular velocity command pair.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub v: f64,
    pub omega: f64,
}

impl Twist {
    pub const ZERO: Twist = Twist { v: 0.0, omega: 0.0 };

    pub const fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.omega.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwistBounds {
    pub v_min: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for TwistBounds {
    fn default() -> Self {
        Self {
            v_min: 0.0,
            v_max: 0.5,
            omega_max: 0.9,
        }
    }
}

impl TwistBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_min < self.v_max) || !(self.omega_max > 0.0) {
            return Err(Error::config(format!("invalid twist bounds {self:?}")));
        }
        Ok(())
    }

    pub fn contains(&self, u: &Twist) -> bool {
        u.v >= self.v_min && u.v <= self.v_max && u.omega.abs() <= self.omega_max
    }

    pub fn clamp(&self, u: &Twist) -> Twist {
        Twist::new(
            u.v.clamp(self.v_min, self.v_max),
            u.omega.clamp(-self.omega_max, self.omega_max),
        )
    }
}

/// Control time step shared by the policy horizon and the lattice planner.
pub const DEFAULT_DT: f64 = 0.333;

/// Default policy horizon length.
pub const DEFAULT_HORIZON: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandSequence {
    commands: Vec<Twist>,
    dt: f64,
}

impl CommandSequence {
    pub fn new(commands: Vec<Twist>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::domain(format!("dt must be positive, got {dt}")));
        }
        if commands.is_empty() {
            return Err(Error::domain("command sequence is empty"));
        }
        if let Some(bad) = commands.iter().position(|u| !u.is_finite()) {
            return Err(Error::domain(format!("non-finite command at step {bad}")));
        }
        Ok(Self { commands, dt })
    }

    pub fn constant(u: Twist, len: usize, dt: f64) -> Result<Self> {
        Self::new(vec![u; len], dt)
    }

    pub fn commands(&self) -> &[Twist] {
        &self.commands
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    pub fn first(&self) -> Twist {
        self.commands[0]
    }

    pub fn expect_len(&self, n: usize) -> Result<()> {
        if self.commands.len() != n {
            return Err(Error::LengthMismatch {
                what: "command sequence",
                expected: n,
                got: self.commands.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_angle_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-0.5) + 0.5).abs() < 1e-15);
        for k in -20..20 {
            let a = normalize_angle(0.37 * k as f64);
            assert!(a > -PI && a <= PI);
        }
    }

    #[test]
    fn compose_inverse_is_identity() {
        let p = Pose2::new(1.0, -2.0, 0.7);
        let q = p.compose(&p.inverse());
        assert!(q.x.abs() < 1e-12 && q.y.abs() < 1e-12 && q.theta.abs() < 1e-12);
        let w = Point2::new(3.0, 4.0);
        let back = p.transform_point(&p.relative_point(&w));
        assert!(back.distance(&w) < 1e-12);
    }

    #[test]
    fn command_sequence_rejects_bad_dt() {
        assert!(CommandSequence::new(vec![Twist::ZERO], 0.0).is_err());
        assert!(CommandSequence::new(vec![], 0.1).is_err());
        assert!(CommandSequence::new(vec![Twist::new(f64::NAN, 0.0)], 0.1).is_err());
    }
}
