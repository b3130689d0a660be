//! Scenario files: world geometry plus a grounded inspection problem.
//!
//! A scenario is a line-oriented text file (extension `.scn`). Every
//! non-blank line starts with a section keyword; `#` starts a comment.
//!
//! ```text
//! LIMITS   v_max=1.0 v_crit=0.25 critical_radius=2.0 a_max=0.5
//! OBSTACLE quad_tank center=10,0,-5 half=3,3,3 [perturb]
//! WAYPOINT quad_front pos=10,-6,-5 [critical] [inspect=quad_tank] [label="in front of quad tank"]
//! EDGE     start quad_front [p=0.05] [oneway]
//! MISSION  start=start final=final [inspect=quad_tank,lg_tank] [collision=absorb|restart]
//! ```
//!
//! Coordinates are meters, speeds m/s, accelerations m/s². Edges are
//! undirected unless flagged `oneway`; `p` is the probability of a collision
//! while traversing the edge. `LIMITS` may be omitted (defaults below);
//! exactly one `MISSION` line is required.

mod ground;
mod parse;
mod plan_file;

pub use ground::{ground_to_mdp, nominal_route, GroundError, Grounding, Move, RouteStep, MAX_TARGETS};
pub use parse::{parse_scenario, parse_scenario_bytes, ErrorKind, ScenarioError};
pub use plan_file::{
    from_json_strict, read_plan_file, write_plan_file, PlanFile, PlanFileError, SchemaMismatch, FORMAT_VERSION,
};

use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub label: String,
    pub center: Vec3,
    pub half_extents: Vec3,
    /// Displaced at random once per simulated episode.
    pub perturbable: bool,
}

impl Obstacle {
    /// Euclidean distance from `p` to the box surface (0 inside).
    pub fn distance_to(&self, p: Vec3) -> f64 {
        self.distance_with_offset(p, [0.0; 3])
    }

    pub fn distance_with_offset(&self, p: Vec3, offset: Vec3) -> f64 {
        let mut d2 = 0.0;
        for k in 0..3 {
            let excess = (p[k] - self.center[k] - offset[k]).abs() - self.half_extents[k];
            if excess > 0.0 {
                d2 += excess * excess;
            }
        }
        d2.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub id: String,
    pub label: String,
    pub position: Vec3,
    pub critical: bool,
    pub inspection_target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub collision_probability: f64,
    pub oneway: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CollisionOutcome {
    /// The mission ends in an absorbing failure state.
    #[default]
    Absorb,
    /// The vehicle recovers at the start waypoint and the mission restarts.
    Restart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mission {
    pub start: String,
    pub final_waypoint: String,
    pub inspect: Vec<String>,
    pub collision: CollisionOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub v_max: f64,
    pub v_crit: f64,
    pub critical_radius: f64,
    pub a_max: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { v_max: 1.0, v_crit: 0.25, critical_radius: 2.0, a_max: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub obstacles: Vec<Obstacle>,
    pub waypoints: Vec<Waypoint>,
    pub edges: Vec<Edge>,
    pub mission: Mission,
    pub limits: Limits,
}

impl Scenario {
    pub fn waypoint_index(&self, id: &str) -> Option<usize> {
        self.waypoints.iter().position(|w| w.id == id)
    }

    pub fn waypoint(&self, id: &str) -> Option<&Waypoint> {
        self.waypoints.iter().find(|w| w.id == id)
    }

    pub fn obstacle(&self, label: &str) -> Option<&Obstacle> {
        self.obstacles.iter().find(|o| o.label == label)
    }

    /// Collision probability of moving from `a` to `b`, if such a move exists.
    pub fn edge_probability(&self, a: &str, b: &str) -> Option<f64> {
        self.edges.iter().find_map(|e| {
            if (e.from == a && e.to == b) || (!e.oneway && e.from == b && e.to == a) {
                Some(e.collision_probability)
            } else {
                None
            }
        })
    }

    /// Renders the scenario in the `.scn` grammar. Parsing the output yields
    /// an equal scenario.
    pub fn to_scn(&self) -> String {
        use std::fmt::Write;
        let v = |p: &Vec3| format!("{},{},{}", p[0], p[1], p[2]);
        let mut out = String::new();
        let l = &self.limits;
        let _ = writeln!(
            out,
            "LIMITS v_max={} v_crit={} critical_radius={} a_max={}",
            l.v_max, l.v_crit, l.critical_radius, l.a_max
        );
        for o in &self.obstacles {
            let _ = write!(out, "OBSTACLE {} center={} half={}", o.label, v(&o.center), v(&o.half_extents));
            if o.perturbable {
                out.push_str(" perturb");
            }
            out.push('\n');
        }
        for w in &self.waypoints {
            let _ = write!(out, "WAYPOINT {} pos={}", w.id, v(&w.position));
            if w.critical {
                out.push_str(" critical");
            }
            if let Some(t) = &w.inspection_target {
                let _ = write!(out, " inspect={t}");
            }
            if w.label != w.id {
                let _ = write!(out, " label=\"{}\"", w.label);
            }
            out.push('\n');
        }
        for e in &self.edges {
            let _ = write!(out, "EDGE {} {} p={}", e.from, e.to, e.collision_probability);
            if e.oneway {
                out.push_str(" oneway");
            }
            out.push('\n');
        }
        let m = &self.mission;
        let _ = write!(out, "MISSION start={} final={}", m.start, m.final_waypoint);
        if !m.inspect.is_empty() {
            let _ = write!(out, " inspect={}", m.inspect.join(","));
        }
        let collision = match m.collision {
            CollisionOutcome::Absorb => "absorb",
            CollisionOutcome::Restart => "restart",
        };
        let _ = writeln!(out, " collision={collision}");
        out
    }
}
