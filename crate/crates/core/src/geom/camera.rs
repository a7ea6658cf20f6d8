use serde::{Deserialize, Serialize};

use super::{DepthMap, Point2, Point3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if !ok {
            return Err(Error::config(format!("invalid intrinsics {self:?}")));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Half of the horizontal field of view, radians.
    pub fn half_hfov(&self) -> f64 {
        let left = self.cx;
        let right = self.width as f64 - self.cx;
        (left.max(right) / self.fx).atan()
    }
}

impl Default for CameraIntrinsics {
    /// 64x48 sensor with a 90 degree horizontal field of view.
    fn default() -> Self {
        Self {
            fx: 32.0,
            fy: 32.0,
            cx: 32.0,
            cy: 24.0,
            width: 64,
            height: 48,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
    pub in_bounds: bool,
}

fn check_dims(depth: &DepthMap, intr: &CameraIntrinsics) -> Result<()> {
    if depth.width() != intr.width || depth.height() != intr.height {
        return Err(Error::Shape(format!(
            "depth map {}x{} does not match intrinsics {}x{}",
            depth.width(),
            depth.height(),
            intr.width,
            intr.height
        )));
    }
    Ok(())
}

fn unproject(u: usize, v: usize, d: f64, intr: &CameraIntrinsics) -> Point3 {
    Point3::new(
        (u as f64 - intr.cx) * d / intr.fx,
        (v as f64 - intr.cy) * d / intr.fy,
        d,
    )
}

/// Inverse pinhole projection of every valid pixel, in row-major order.
pub fn back_project(depth: &DepthMap, intr: &CameraIntrinsics) -> Result<Vec<Point3>> {
    Ok(back_project_pixels(depth, intr)?
        .into_iter()
        .map(|(_, p)| p)
        .collect())
}

/// Like [`back_project`] but keeps the row-major pixel index of each point.
pub fn back_project_pixels(
    depth: &DepthMap,
    intr: &CameraIntrinsics,
) -> Result<Vec<(usize, Point3)>> {
    check_dims(depth, intr)?;
    let mut out = Vec::new();
    for v in 0..depth.height() {
        for u in 0..depth.width() {
            if let Some(d) = depth.valid(u, v) {
                out.push((v * depth.width() + u, unproject(u, v, d, intr)));
            }
        }
    }
    Ok(out)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Component-wise median of the selected points. Even selections average the
/// two middle values.
pub fn masked_median_pose(cloud: &[Point3], mask: &[bool]) -> Result<Point3> {
    if cloud.len() != mask.len() {
        return Err(Error::LengthMismatch {
            what: "mask",
            expected: cloud.len(),
            got: mask.len(),
        });
    }
    let selected: Vec<&Point3> = cloud
        .iter()
        .zip(mask)
        .filter_map(|(p, &m)| m.then_some(p))
        .collect();
    if selected.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut xs: Vec<f64> = selected.iter().map(|p| p.x).collect();
    let mut ys: Vec<f64> = selected.iter().map(|p| p.y).collect();
    let mut zs: Vec<f64> = selected.iter().map(|p| p.z).collect();
    Ok(Point3::new(median(&mut xs), median(&mut ys), median(&mut zs)))
}

/// Pixel centers sit at integer coordinates, so the image spans
/// `[-0.5, width - 0.5)` horizontally and likewise vertically.
pub fn project_to_pixel(pt: &Point3, intr: &CameraIntrinsics) -> Result<PixelCoord> {
    if !(pt.z > 0.0) {
        return Err(Error::BehindCamera(pt.z));
    }
    let u = intr.fx * pt.x / pt.z + intr.cx;
    let v = intr.fy * pt.y / pt.z + intr.cy;
    let in_bounds = u >= -0.5 && u < intr.width as f64 - 0.5 && v >= -0.5 && v < intr.height as f64 - 0.5;
    Ok(PixelCoord { u, v, in_bounds })
}

/// Which 3D frame point clouds are expressed in when flattened to the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundFrame {
    /// Camera optical frame: z forward, x right, y (height) down.
    #[default]
    CameraOptical,
    /// Robot frame: x forward, y left, z up.
    RobotZUp,
}

/// Drops the height axis, returning (forward, left) in the robot frame.
pub fn to_planar(pt: &Point3, frame: GroundFrame) -> Point2 {
    match frame {
        GroundFrame::CameraOptical => Point2::new(pt.z, -pt.x),
        GroundFrame::RobotZUp => Point2::new(pt.x, pt.y),
    }
}
