//! Seeded Monte-Carlo execution of trajectories.
//!
//! The vehicle is a point that chases the trajectory samples in order at
//! their commanded speeds while a current pushes it around. Perturbable
//! obstacles are displaced once per episode. Coming closer than the
//! clearance threshold to a displaced obstacle is an incident and costs a
//! fixed recovery time. Static obstacles are not monitored.

use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::refine::Trajectory;
use crate::scenario::{Scenario, Vec3};
use crate::seed::{stream, Part};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("trajectory `{0}` has fewer than two samples")]
    EmptyTrajectory(String),
    #[error("invalid disturbance configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisturbanceConfig {
    /// Standard deviation of the per-axis current velocity, m/s.
    pub current_sigma: f64,
    /// Lag-one correlation of the current between ticks; 0 gives i.i.d. drift.
    pub current_correlation: f64,
    /// Standard deviation of the horizontal obstacle displacement, m.
    pub obstacle_sigma: f64,
    /// Displace every obstacle, not only those marked perturbable.
    pub perturb_all: bool,
    /// Fixed displacements by obstacle label, overriding the random draw.
    pub forced_displacements: BTreeMap<String, Vec3>,
    pub capture_radius: f64,
    pub clearance: f64,
    pub recovery_penalty_s: f64,
    /// End the episode at the first incident instead of recovering.
    pub abort_on_incident: bool,
    /// Simulation step; defaults to the trajectory's sampling step when absent.
    pub dt: Option<f64>,
}

impl Default for DisturbanceConfig {
    fn default() -> Self {
        DisturbanceConfig {
            current_sigma: 0.05,
            current_correlation: 0.0,
            obstacle_sigma: 0.3,
            perturb_all: false,
            forced_displacements: BTreeMap::new(),
            capture_radius: 0.1,
            clearance: 0.5,
            recovery_penalty_s: 60.0,
            abort_on_incident: false,
            dt: None,
        }
    }
}

impl DisturbanceConfig {
    /// No current, no obstacle motion.
    pub fn calm() -> Self {
        DisturbanceConfig { current_sigma: 0.0, obstacle_sigma: 0.0, ..Default::default() }
    }

    fn check(&self) -> Result<(), SimError> {
        let nonneg = [self.current_sigma, self.obstacle_sigma, self.capture_radius, self.clearance, self.recovery_penalty_s];
        if nonneg.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(SimError::InvalidConfig("parameters must be finite and nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.current_correlation) {
            return Err(SimError::InvalidConfig("current_correlation must lie in [0, 1)".into()));
        }
        if self.dt.is_some_and(|dt| !(dt > 0.0)) {
            return Err(SimError::InvalidConfig("dt must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incident {
    pub time_s: f64,
    pub obstacle: String,
    pub min_distance_m: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedTuple {
    pub master: u64,
    pub plan_id: String,
    pub episode: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub plan_id: String,
    pub episode: u64,
    pub execution_time_s: f64,
    pub incidents: Vec<Incident>,
    pub completed: bool,
    pub seed: SeedTuple,
}

/// Simulated time is capped at this multiple of the nominal duration.
pub const TIMEOUT_FACTOR: f64 = 10.0;

fn norm(v: Vec3) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs one episode. The random stream is derived from
/// `(master, "episode", plan id, episode)`.
pub fn run_episode(
    traj: &Trajectory,
    scenario: &Scenario,
    cfg: &DisturbanceConfig,
    master: u64,
    episode: u64,
) -> Result<EpisodeRecord, SimError> {
    cfg.check()?;
    if traj.samples.len() < 2 {
        return Err(SimError::EmptyTrajectory(traj.plan_id.clone()));
    }
    let mut rng = stream(master, &[Part::Label("episode"), Part::Label(&traj.plan_id), Part::Index(episode)]);
    let dt = cfg.dt.unwrap_or(traj.dt);

    // `None` marks a static obstacle.
    let offsets: Vec<Option<Vec3>> = scenario
        .obstacles
        .iter()
        .map(|o| {
            let dx: f64 = StandardNormal.sample(&mut rng);
            let dy: f64 = StandardNormal.sample(&mut rng);
            if let Some(f) = cfg.forced_displacements.get(&o.label) {
                Some(*f)
            } else if o.perturbable || cfg.perturb_all {
                Some([cfg.obstacle_sigma * dx, cfg.obstacle_sigma * dy, 0.0])
            } else {
                None
            }
        })
        .collect();

    let samples = &traj.samples;
    let cap = TIMEOUT_FACTOR * traj.duration_s.max(dt);
    let mut pos = samples[0].position;
    let mut next = 1;
    let mut current = [0.0f64; 3];
    let rho = cfg.current_correlation;
    let innovation = (1.0 - rho * rho).sqrt();
    let mut clock = 0.0;
    let mut penalty = 0.0;
    let mut incidents: Vec<Incident> = Vec::new();
    let mut open: Vec<Option<usize>> = vec![None; scenario.obstacles.len()];
    let mut finished_at = None;
    let mut aborted = false;

    'ticks: while clock + penalty < cap {
        let mut budget = dt;
        while budget > 0.0 && next < samples.len() {
            let target = samples[next].position;
            let gap: Vec3 = std::array::from_fn(|k| target[k] - pos[k]);
            let d = norm(gap);
            let v = samples[next].speed;
            if d <= v * budget {
                pos = target;
                budget -= d / v;
                next += 1;
            } else {
                let f = v * budget / d;
                pos = std::array::from_fn(|k| pos[k] + f * gap[k]);
                budget = 0.0;
            }
        }
        if next == samples.len() {
            finished_at = Some(clock + (dt - budget));
            break;
        }
        let before = norm(std::array::from_fn(|k| samples[next].position[k] - pos[k]));
        for (k, c) in current.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *c = rho * *c + innovation * cfg.current_sigma * z;
            pos[k] += *c * dt;
        }
        clock += dt;
        let after = norm(std::array::from_fn(|k| samples[next].position[k] - pos[k]));
        if after < before && after <= cfg.capture_radius {
            next += 1;
            if next == samples.len() {
                finished_at = Some(clock);
                break;
            }
        }
        for (i, o) in scenario.obstacles.iter().enumerate() {
            let Some(offset) = offsets[i] else { continue };
            let d = o.distance_with_offset(pos, offset);
            match (&mut open[i], d < cfg.clearance) {
                (None, true) => {
                    open[i] = Some(incidents.len());
                    incidents.push(Incident { time_s: clock + penalty, obstacle: o.label.clone(), min_distance_m: d });
                    penalty += cfg.recovery_penalty_s;
                    if cfg.abort_on_incident {
                        aborted = true;
                        break 'ticks;
                    }
                }
                (Some(j), true) => {
                    let m = &mut incidents[*j].min_distance_m;
                    *m = m.min(d);
                }
                (Some(_), false) => open[i] = None,
                (None, false) => {}
            }
        }
    }

    let (time, completed) = match finished_at {
        Some(t) if !aborted => (t + penalty, true),
        _ => (clock + penalty, false),
    };
    Ok(EpisodeRecord {
        plan_id: traj.plan_id.clone(),
        episode,
        execution_time_s: time,
        incidents,
        completed,
        seed: SeedTuple { master, plan_id: traj.plan_id.clone(), episode },
    })
}

/// Runs episodes `0..n` in parallel; the output is ordered by episode.
pub fn run_batch(
    traj: &Trajectory,
    scenario: &Scenario,
    cfg: &DisturbanceConfig,
    n: usize,
    master: u64,
) -> Result<Vec<EpisodeRecord>, SimError> {
    (0..n as u64).into_par_iter().map(|e| run_episode(traj, scenario, cfg, master, e)).collect()
}

/// JSON-lines episode log: a header line, then one record per line.
pub fn episode_log(header: &serde_json::Value, records: &[EpisodeRecord]) -> String {
    let mut out = serde_json::to_string(header).expect("header serializes");
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refine::{refine, RefineConfig};
    use crate::scenario::{parse_scenario, RouteStep};

    fn setup() -> (Scenario, Trajectory) {
        let s = parse_scenario(
            "OBSTACLE rock center=5,3,0 half=0.5,0.5,0.5 perturb\n\
             WAYPOINT a pos=0,0,0\nWAYPOINT b pos=10,0,0\nEDGE a b\nMISSION start=a final=b\n",
        )
        .unwrap();
        let route = [RouteStep::Goto { from: "a".into(), to: "b".into() }];
        let t = refine(&s, "P1", &route, &RefineConfig::default()).unwrap();
        (s, t)
    }

    #[test]
    fn calm_execution_matches_nominal() {
        let (s, t) = setup();
        let r = run_episode(&t, &s, &DisturbanceConfig::calm(), 1, 0).unwrap();
        assert!(r.completed);
        assert!((r.execution_time_s - t.duration_s).abs() <= t.dt);
        assert!(r.incidents.is_empty());
    }

    #[test]
    fn forced_obstacle_costs_one_penalty() {
        let (s, t) = setup();
        let mut cfg = DisturbanceConfig::calm();
        cfg.forced_displacements.insert("rock".into(), [0.0, -3.0, 0.0]);
        let r = run_episode(&t, &s, &cfg, 1, 0).unwrap();
        assert_eq!(r.incidents.len(), 1);
        assert_eq!(r.incidents[0].obstacle, "rock");
        assert!(r.incidents[0].min_distance_m < cfg.clearance);
        assert!((r.execution_time_s - t.duration_s - cfg.recovery_penalty_s).abs() <= t.dt);
    }

    #[test]
    fn abort_mode_stops_at_incident() {
        let (s, t) = setup();
        let mut cfg = DisturbanceConfig::calm();
        cfg.forced_displacements.insert("rock".into(), [0.0, -3.0, 0.0]);
        cfg.abort_on_incident = true;
        assert!(!run_episode(&t, &s, &cfg, 1, 0).unwrap().completed);
    }

    #[test]
    fn batch_is_ordered_and_deterministic() {
        let (s, t) = setup();
        let cfg = DisturbanceConfig::default();
        let a = run_batch(&t, &s, &cfg, 10, 3).unwrap();
        let b = run_batch(&t, &s, &cfg, 10, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().enumerate().all(|(i, r)| r.episode == i as u64));
        assert_eq!(a[4], run_episode(&t, &s, &cfg, 3, 4).unwrap());
        let c = run_batch(&t, &s, &cfg, 10, 4).unwrap();
        assert!(a.iter().zip(&c).any(|(x, y)| x.execution_time_s != y.execution_time_s));
    }

    #[test]
    fn empty_trajectory_is_rejected() {
        let (s, mut t) = setup();
        t.samples.truncate(1);
        assert!(matches!(run_episode(&t, &s, &DisturbanceConfig::default(), 0, 0), Err(SimError::EmptyTrajectory(_))));
    }
}
