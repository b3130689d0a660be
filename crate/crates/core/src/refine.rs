//! High-level routes to timed trajectories.
//!
//! The route becomes a polyline through waypoint positions, with a helical
//! loop around the target for every inspection. The vehicle stops at each
//! waypoint. Between stops the speed follows a trapezoidal profile
//! (accelerate at `a_max`, cruise, decelerate) under a piecewise-constant
//! limit: `v_crit` inside critical zones, `v_max` elsewhere.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{Limits, RouteStep, Scenario, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefineError {
    #[error("no edge between `{from}` and `{to}`")]
    DisconnectedPlan { from: String, to: String },
    #[error("unknown waypoint `{0}`")]
    UnknownWaypoint(String),
    #[error("unknown inspection target `{0}`")]
    UnknownTarget(String),
    #[error("invalid refinement parameters: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HelixConfig {
    pub points: usize,
    pub turns: f64,
    /// Horizontal distance kept from the target's bounding box.
    pub clearance: f64,
}

impl Default for HelixConfig {
    fn default() -> Self {
        HelixConfig { points: 50, turns: 1.0, clearance: 0.6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineConfig {
    pub dt: f64,
    pub helix: HelixConfig,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig { dt: 0.1, helix: HelixConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub position: Vec3,
    /// Average speed over the interval ending at this sample.
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub plan_id: String,
    pub samples: Vec<Sample>,
    /// Arc length of the planned polyline, meters.
    pub length_m: f64,
    pub duration_s: f64,
    pub dt: f64,
}

impl Trajectory {
    pub fn low_level_length(&self) -> f64 {
        self.length_m
    }

    pub fn sampled_length(&self) -> f64 {
        self.samples.windows(2).map(|w| dist(w[0].position, w[1].position)).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y,z,v\n");
        for s in &self.samples {
            let p = s.position;
            out.push_str(&format!("{:.4},{:.6},{:.6},{:.6},{:.6}\n", s.t, p[0], p[1], p[2], s.speed));
        }
        out
    }
}

pub fn low_level_length(t: &Trajectory) -> f64 {
    t.low_level_length()
}

fn dist(a: Vec3, b: Vec3) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
}

fn lerp(a: Vec3, b: Vec3, t: f64) -> Vec3 {
    std::array::from_fn(|k| a[k] + t * (b[k] - a[k]))
}

/// Piece of a leg with constant speed limit.
#[derive(Debug, Clone, Copy)]
struct Piece {
    a: Vec3,
    b: Vec3,
    length: f64,
    limit: f64,
    /// True if `b` is a polyline vertex.
    ends_at_vertex: bool,
}

/// Constant-acceleration phase of the profile.
#[derive(Debug, Clone, Copy)]
struct Phase {
    t0: f64,
    duration: f64,
    s0: f64,
    v0: f64,
    accel: f64,
}

/// Polyline between two stops.
type Leg = Vec<Vec3>;

fn helix(center: Vec3, half: Vec3, from: Vec3, cfg: &HelixConfig) -> Vec<Vec3> {
    let radius = half[0].hypot(half[1]) + cfg.clearance;
    let theta0 = (from[1] - center[1]).atan2(from[0] - center[0]);
    let pitch = 2.0 * half[2];
    let n = cfg.points.max(2);
    (0..n)
        .map(|i| {
            let f = i as f64 / (n - 1) as f64;
            let theta = theta0 + TAU * cfg.turns * f;
            [center[0] + radius * theta.cos(), center[1] + radius * theta.sin(), from[2] + pitch * cfg.turns * f]
        })
        .collect()
}

fn legs(s: &Scenario, route: &[RouteStep], cfg: &RefineConfig) -> Result<Vec<Leg>, RefineError> {
    let pos = |id: &str| s.waypoint(id).map(|w| w.position).ok_or_else(|| RefineError::UnknownWaypoint(id.to_string()));
    let mut out = Vec::new();
    let mut at: Option<&str> = None;
    for step in route {
        match step {
            RouteStep::Goto { from, to } => {
                if at.is_some_and(|a| a != from) || s.edge_probability(from, to).is_none() {
                    let from = at.unwrap_or(from).to_string();
                    return Err(RefineError::DisconnectedPlan { from, to: to.clone() });
                }
                out.push(vec![pos(from)?, pos(to)?]);
                at = Some(to);
            }
            RouteStep::Inspect { waypoint, target } => {
                if let Some(a) = at.filter(|a| *a != waypoint) {
                    return Err(RefineError::DisconnectedPlan { from: a.to_string(), to: waypoint.clone() });
                }
                let o = s.obstacle(target).ok_or_else(|| RefineError::UnknownTarget(target.clone()))?;
                let w = pos(waypoint)?;
                let mut leg = vec![w];
                leg.extend(helix(o.center, o.half_extents, w, &cfg.helix));
                leg.push(w);
                out.push(leg);
                at = Some(waypoint);
            }
        }
    }
    Ok(out)
}

/// Splits a leg at the boundaries of the (enlarged) critical spheres.
fn pieces(leg: &Leg, zones: &[Vec3], radius: f64, limits: &Limits) -> Vec<Piece> {
    let mut out = Vec::new();
    for w in leg.windows(2) {
        let (a, b) = (w[0], w[1]);
        let d: Vec3 = std::array::from_fn(|k| b[k] - a[k]);
        let dd: f64 = d.iter().map(|x| x * x).sum();
        if dd == 0.0 {
            continue;
        }
        let mut cuts = vec![0.0, 1.0];
        for c in zones {
            let f: Vec3 = std::array::from_fn(|k| a[k] - c[k]);
            let bq = 2.0 * (0..3).map(|k| f[k] * d[k]).sum::<f64>();
            let cq = f.iter().map(|x| x * x).sum::<f64>() - radius * radius;
            let disc = bq * bq - 4.0 * dd * cq;
            if disc > 0.0 {
                for t in [(-bq - disc.sqrt()) / (2.0 * dd), (-bq + disc.sqrt()) / (2.0 * dd)] {
                    if t > 0.0 && t < 1.0 {
                        cuts.push(t);
                    }
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let last = cuts.len() - 2;
        for (i, c) in cuts.windows(2).enumerate() {
            let (p, q) = (lerp(a, b, c[0]), lerp(a, b, c[1]));
            let mid = lerp(a, b, 0.5 * (c[0] + c[1]));
            let inside = zones.iter().any(|z| dist(mid, *z) <= radius);
            let length = dist(p, q);
            if length > 0.0 {
                let limit = if inside { limits.v_crit } else { limits.v_max };
                out.push(Piece { a: p, b: q, length, limit, ends_at_vertex: i == last });
            }
        }
    }
    out
}

/// Trapezoidal profile over consecutive pieces starting and ending at rest.
fn profile(pieces: &[Piece], a_max: f64, t_start: f64, s_start: f64, phases: &mut Vec<Phase>) -> f64 {
    let n = pieces.len();
    let mut u = vec![0.0; n + 1];
    for j in 1..n {
        u[j] = pieces[j - 1].limit.min(pieces[j].limit);
    }
    for j in 0..n {
        u[j + 1] = u[j + 1].min((u[j] * u[j] + 2.0 * a_max * pieces[j].length).sqrt());
    }
    for j in (0..n).rev() {
        u[j] = u[j].min((u[j + 1] * u[j + 1] + 2.0 * a_max * pieces[j].length).sqrt());
    }
    let (mut t, mut s) = (t_start, s_start);
    for (j, p) in pieces.iter().enumerate() {
        let (u0, u1, d) = (u[j], u[j + 1], p.length);
        let peak = p.limit.min(((2.0 * a_max * d + u0 * u0 + u1 * u1) / 2.0).sqrt()).max(u0.max(u1));
        let d1 = ((peak * peak - u0 * u0) / (2.0 * a_max)).max(0.0);
        let d3 = ((peak * peak - u1 * u1) / (2.0 * a_max)).max(0.0);
        let d2 = (d - d1 - d3).max(0.0);
        let mut push = |duration: f64, v0: f64, accel: f64, len: f64| {
            if duration > 0.0 {
                phases.push(Phase { t0: t, duration, s0: s, v0, accel });
                t += duration;
                s += len;
            }
        };
        push((peak - u0) / a_max, u0, a_max, d1);
        push(d2 / peak, peak, 0.0, d2);
        push((peak - u1) / a_max, peak, -a_max, d - d1 - d2);
    }
    t
}

/// Refines a route into a trajectory. An empty route yields an empty
/// trajectory of zero duration.
pub fn refine(s: &Scenario, plan_id: &str, route: &[RouteStep], cfg: &RefineConfig) -> Result<Trajectory, RefineError> {
    let l = s.limits;
    if !(cfg.dt > 0.0 && l.a_max > 0.0 && l.v_max > 0.0 && l.v_crit > 0.0 && l.v_crit <= l.v_max) {
        return Err(RefineError::InvalidConfig(format!("dt={}, limits={l:?}", cfg.dt)));
    }
    let zones: Vec<Vec3> = s.waypoints.iter().filter(|w| w.critical).map(|w| w.position).collect();
    let radius = l.critical_radius + l.v_max * cfg.dt + 1e-6;

    let mut all_pieces = Vec::new();
    let mut phases = Vec::new();
    let (mut t, mut s_acc) = (0.0, 0.0);
    for leg in legs(s, route, cfg)? {
        let ps = pieces(&leg, &zones, radius, &l);
        t = profile(&ps, l.a_max, t, s_acc, &mut phases);
        s_acc += ps.iter().map(|p| p.length).sum::<f64>();
        all_pieces.extend(ps);
    }
    let duration = t;
    let length: f64 = all_pieces.iter().map(|p| p.length).sum();
    if all_pieces.is_empty() {
        return Ok(Trajectory { plan_id: plan_id.to_string(), samples: Vec::new(), length_m: 0.0, duration_s: 0.0, dt: cfg.dt });
    }

    // Vertex arc positions, so corners are sampled exactly.
    let mut starts = Vec::with_capacity(all_pieces.len());
    let mut vertex_s = Vec::new();
    let mut acc = 0.0;
    for p in &all_pieces {
        starts.push(acc);
        acc += p.length;
        if p.ends_at_vertex {
            vertex_s.push(acc);
        }
    }
    let position_at = |arc: f64| {
        let i = starts.partition_point(|&x| x <= arc).saturating_sub(1);
        let p = &all_pieces[i];
        lerp(p.a, p.b, ((arc - starts[i]) / p.length).clamp(0.0, 1.0))
    };
    let arc_at = |time: f64| {
        let i = phases.partition_point(|ph| ph.t0 <= time).saturating_sub(1);
        let ph = &phases[i];
        let tau = (time - ph.t0).clamp(0.0, ph.duration);
        (ph.s0 + ph.v0 * tau + 0.5 * ph.accel * tau * tau).min(length)
    };
    // Time at which the profile passes arc length `target` (bisection on the
    // monotone phase containing it).
    let time_at = |target: f64| {
        let i = phases.partition_point(|ph| ph.s0 <= target).saturating_sub(1);
        let ph = &phases[i];
        let (mut lo, mut hi) = (0.0, ph.duration);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if ph.s0 + ph.v0 * mid + 0.5 * ph.accel * mid * mid < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        ph.t0 + hi
    };

    let mut times: Vec<(f64, Option<f64>)> = Vec::new();
    let ticks = (duration / cfg.dt).floor() as usize;
    times.extend((0..=ticks).map(|k| (k as f64 * cfg.dt, None)));
    for &vs in &vertex_s {
        times.push((time_at(vs), Some(vs)));
    }
    times.push((duration, Some(length)));
    times.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.is_some().cmp(&a.1.is_some())));
    let mut kept: Vec<(f64, f64)> = Vec::with_capacity(times.len());
    for (tt, vs) in times {
        let arc = vs.unwrap_or_else(|| arc_at(tt));
        match kept.last_mut() {
            Some(last) if tt - last.0 < 1e-9 => {
                if vs.is_some() {
                    last.1 = arc;
                }
            }
            _ => kept.push((tt, arc)),
        }
    }
    let mut samples: Vec<Sample> = kept
        .windows(2)
        .map(|w| Sample { t: w[1].0, position: position_at(w[1].1), speed: (w[1].1 - w[0].1) / (w[1].0 - w[0].0) })
        .collect();
    let first = Sample { t: 0.0, position: position_at(0.0), speed: samples.first().map_or(l.v_max, |s| s.speed) };
    samples.insert(0, first);
    for smp in &mut samples {
        smp.speed = smp.speed.clamp(1e-6 * l.v_max, l.v_max);
    }
    Ok(Trajectory { plan_id: plan_id.to_string(), samples, length_m: length, duration_s: duration, dt: cfg.dt })
}
