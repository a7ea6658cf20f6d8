//! Column ray caster producing synthetic depth frames with instance masks.
//!
//! Objects and obstacle points are vertical cylinders standing on the floor;
//! a horizontal camera at `mount_height` sees them, the floor, or nothing
//! (NaN) beyond `max_range`.

use serde::{Deserialize, Serialize};

use super::ObjectId;
use crate::geom::{CameraIntrinsics, DepthMap, GroundFrame, Point2, Pose2};
use crate::sim::World;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub intrinsics: CameraIntrinsics,
    pub mount_height: f64,
    pub max_range: f64,
    #[serde(default)]
    pub ground: GroundFrame,
}

impl Default for Camera {
    fn default() -> Self {
        Self {
            intrinsics: CameraIntrinsics::default(),
            mount_height: 0.6,
            max_range: 5.0,
            ground: GroundFrame::CameraOptical,
        }
    }
}

impl Camera {
    /// Whether a robot-frame point lies in the horizontal field of view and range.
    pub fn sees(&self, rel: &Point2) -> bool {
        rel.x > 0.05
            && rel.y.atan2(rel.x).abs() <= self.intrinsics.half_hfov()
            && rel.norm() <= self.max_range
    }
}

/// Radius and height used to render each static obstacle point.
pub const OBSTACLE_POST_RADIUS: f64 = 0.05;
pub const OBSTACLE_POST_HEIGHT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectMask {
    pub object: ObjectId,
    /// Row-major indices of visible pixels.
    pub pixels: Vec<usize>,
    /// Visible pixels over pixels the object would cover without occluders.
    pub visibility: f64,
}

impl ObjectMask {
    pub fn to_bool(&self, pixel_count: usize) -> Vec<bool> {
        let mut m = vec![false; pixel_count];
        for &p in &self.pixels {
            m[p] = true;
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    pub robot_pose: Pose2,
    pub time: f64,
    pub depth: DepthMap,
    pub masks: Vec<ObjectMask>,
}

struct Cylinder {
    center: Point2,
    radius: f64,
    height: f64,
    owner: Option<usize>,
}

fn scene(world: &World, time: f64) -> Vec<Cylinder> {
    let mut out: Vec<Cylinder> = world
        .objects
        .iter()
        .enumerate()
        .map(|(k, o)| Cylinder {
            center: world.object_position(o.id, time).expect("object exists"),
            radius: o.footprint_radius,
            height: o.height,
            owner: Some(k),
        })
        .collect();
    out.extend(world.obstacle_points().map(|p| Cylinder {
        center: *p,
        radius: OBSTACLE_POST_RADIUS,
        height: OBSTACLE_POST_HEIGHT,
        owner: None,
    }));
    out
}

pub fn render_frame(world: &World, time: f64, robot: &Pose2, camera: &Camera) -> RenderedFrame {
    let intr = &camera.intrinsics;
    let (w, h) = (intr.width, intr.height);
    let cyls = scene(world, time);
    let mut depth = DepthMap::filled(w, h, f64::NAN);
    let n_obj = world.objects.len();
    let mut visible: Vec<Vec<usize>> = vec![Vec::new(); n_obj];
    let mut alone = vec![0usize; n_obj];
    let (s, c) = robot.theta.sin_cos();
    let origin = robot.position();

    let mut hits: Vec<(f64, usize)> = Vec::new();
    for u in 0..w {
        // ray (1, -a) in the robot frame; its parameter equals optical depth
        let a = (u as f64 - intr.cx) / intr.fx;
        let d = Point2::new(c + s * a, s - c * a);
        let dd = d.x * d.x + d.y * d.y;
        hits.clear();
        for (k, cy) in cyls.iter().enumerate() {
            let r = Point2::new(cy.center.x - origin.x, cy.center.y - origin.y);
            let dr = d.x * r.x + d.y * r.y;
            let disc = dr * dr - dd * (r.x * r.x + r.y * r.y - cy.radius * cy.radius);
            if disc < 0.0 {
                continue;
            }
            let t = (dr - disc.sqrt()) / dd;
            if t > 1e-3 && t <= camera.max_range {
                hits.push((t, k));
            }
        }
        hits.sort_by(|x, y| x.0.total_cmp(&y.0));
        for v in 0..h {
            let b = (v as f64 - intr.cy) / intr.fy;
            let mut first: Option<(f64, usize)> = None;
            for &(t, k) in &hits {
                let height = camera.mount_height - b * t;
                if height < 0.0 || height > cyls[k].height {
                    continue;
                }
                if first.is_none() {
                    first = Some((t, k));
                }
                if let Some(o) = cyls[k].owner {
                    alone[o] += 1;
                }
            }
            let idx = v * w + u;
            match first {
                Some((t, k)) => {
                    depth.set(u, v, t);
                    if let Some(o) = cyls[k].owner {
                        visible[o].push(idx);
                    }
                }
                None if b > 0.0 => {
                    let t = camera.mount_height / b;
                    if t <= camera.max_range {
                        depth.set(u, v, t);
                    }
                }
                None => {}
            }
        }
    }

    let masks = world
        .objects
        .iter()
        .zip(visible)
        .zip(alone)
        .filter(|((_, px), _)| !px.is_empty())
        .map(|((o, pixels), total)| ObjectMask {
            object: o.id,
            visibility: pixels.len() as f64 / total as f64,
            pixels,
        })
        .collect();
    RenderedFrame {
        robot_pose: *robot,
        time,
        depth,
        masks,
    }
}
