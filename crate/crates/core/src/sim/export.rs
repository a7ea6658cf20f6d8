use std::fmt::Write as _;
use std::io::Write;

use super::episode::{Episode, EpisodeRecord};
use crate::error::Result;

pub const TRAJECTORY_SCHEMA: &str = "lastmile.trajectory";
pub const TRAJECTORY_VERSION: u32 = 1;

/// One row per pose: `t,x,y,theta,v,omega`, where `(v, omega)` is the
/// command applied from that pose (zero on the final pose).
pub fn trajectory_csv<W: Write>(record: &EpisodeRecord, mut w: W) -> Result<()> {
    writeln!(w, "# schema={TRAJECTORY_SCHEMA} version={TRAJECTORY_VERSION}")?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "x", "y", "theta", "v", "omega"])?;
    for (k, p) in record.trajectory.iter().enumerate() {
        let (v, omega) = record
            .commands
            .get(k)
            .map_or((0.0, 0.0), |u| (u.v, u.omega));
        out.write_record(
            [k as f64 * record.dt, p.x, p.y, p.theta, v, omega].map(|x| x.to_string()),
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Top-down render: obstacles, objects (target highlighted), the success
/// disc around the target's final position and the robot path.
pub fn trajectory_svg(ep: &Episode, record: &EpisodeRecord) -> String {
    let a = &ep.world.arena;
    let (w, h) = (a.max_x - a.min_x, a.max_y - a.min_y);
    let scale = 600.0 / w.max(h).max(1e-9);
    let px = |x: f64| (x - a.min_x) * scale;
    let py = |y: f64| (a.max_y - y) * scale;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" data-schema="{TRAJECTORY_SCHEMA}" data-version="{TRAJECTORY_VERSION}" width="{:.1}" height="{:.1}" viewBox="0 0 {:.1} {:.1}">"#,
        w * scale,
        h * scale,
        w * scale,
        h * scale
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{:.1}" height="{:.1}" fill="#fafafa" stroke="#333"/>"##, w * scale, h * scale);
    for p in ep.world.obstacle_points() {
        let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="2" fill="#555"/>"##, px(p.x), py(p.y));
    }
    let t_end = record.steps as f64 * record.dt;
    for o in &ep.world.objects {
        let c = ep.world.object_position(o.id, t_end).unwrap_or(o.planar());
        let fill = if o.id == ep.target { "#d62728" } else { "#1f77b4" };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="{fill}"><title>{}</title></circle>"#,
            px(c.x),
            py(c.y),
            o.footprint_radius * scale,
            xml_escape(&o.descriptor())
        );
        if o.id == ep.target {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="#2ca02c" stroke-dasharray="4 2"/>"##,
                px(c.x),
                py(c.y),
                ep.success_radius * scale
            );
        }
    }
    let points: Vec<String> = record
        .trajectory
        .iter()
        .map(|p| format!("{:.2},{:.2}", px(p.x), py(p.y)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#000" stroke-width="1.5"/>"##,
        points.join(" ")
    );
    let _ = writeln!(s, "</svg>");
    s
}

fn xml_escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
