//! Synthetic corridor scenarios for scaling studies.
//!
//! A corridor is a chain of waypoints `w0 .. w{depth}` ten meters apart,
//! traversed without risk. Each critical state is a shortcut waypoint `x_j`
//! that joins `w_a` to `w_{a+3}` in two steps instead of three, passing a
//! small obstacle, so both shortcut edges carry a collision probability.
//! Collisions send the vehicle back to the start.

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::pipeline::{hash_json, PipelineError};
use crate::planner::{generate_candidates, solve, GammaInterval};
use crate::scenario::{CollisionOutcome, Edge, Limits, Mission, Obstacle, Scenario, Waypoint, FORMAT_VERSION};
use crate::seed::{stream, Part};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorridorSpec {
    pub depth: usize,
    pub criticals: usize,
    /// Dead-end side waypoints, to vary the waypoint count independently.
    pub detours: usize,
    pub p_low: f64,
    pub p_high: f64,
}

impl Default for CorridorSpec {
    fn default() -> Self {
        CorridorSpec { depth: 3, criticals: 3, detours: 0, p_low: 0.02, p_high: 0.25 }
    }
}

pub fn corridor<R: Rng + ?Sized>(spec: &CorridorSpec, rng: &mut R) -> Scenario {
    let d = spec.depth.max(1);
    let mut waypoints: Vec<Waypoint> = (0..=d)
        .map(|i| Waypoint {
            id: format!("w{i}"),
            label: format!("w{i}"),
            position: [10.0 * i as f64, 0.0, 0.0],
            critical: false,
            inspection_target: None,
        })
        .collect();
    let mut edges: Vec<Edge> = (0..d)
        .map(|i| Edge { from: format!("w{i}"), to: format!("w{}", i + 1), collision_probability: 0.0, oneway: false })
        .collect();
    let mut obstacles = Vec::new();
    let span = d.saturating_sub(2).max(1);
    for j in 0..spec.criticals {
        let a = j % span;
        let b = (a + 3).min(d);
        let x = 5.0 * (a + b) as f64;
        let y = 6.0 + 3.0 * (j / span) as f64 + 0.25 * (j % 4) as f64;
        let id = format!("x{j}");
        waypoints.push(Waypoint { id: id.clone(), label: id.clone(), position: [x, y, 0.0], critical: true, inspection_target: None });
        obstacles.push(Obstacle {
            label: format!("o{j}"),
            center: [x, y + 1.5, 0.0],
            half_extents: [0.5, 0.5, 0.5],
            perturbable: true,
        });
        for end in [a, b] {
            let p = rng.random_range(spec.p_low..spec.p_high);
            edges.push(Edge { from: format!("w{end}"), to: id.clone(), collision_probability: p, oneway: false });
        }
    }
    for k in 0..spec.detours {
        let i = k % (d + 1);
        let id = format!("d{k}");
        waypoints.push(Waypoint {
            id: id.clone(),
            label: id.clone(),
            position: [10.0 * i as f64, -6.0 - 2.0 * (k / (d + 1)) as f64, 0.0],
            critical: false,
            inspection_target: None,
        });
        edges.push(Edge { from: format!("w{i}"), to: id, collision_probability: 0.0, oneway: false });
    }
    Scenario {
        obstacles,
        waypoints,
        edges,
        mission: Mission {
            start: "w0".into(),
            final_waypoint: format!("w{d}"),
            inspect: Vec::new(),
            collision: CollisionOutcome::Restart,
        },
        limits: Limits::default(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    pub depths: Vec<usize>,
    pub criticals: Vec<usize>,
    pub detours: usize,
    pub seed: Option<u64>,
    pub gamma_samples: usize,
    pub gamma_interval: GammaInterval,
    /// Timed repetitions per row; the median is reported.
    pub repeats: usize,
    /// Each timed repetition repeats the solve until at least this much
    /// time has passed, to keep timer resolution out of the figures.
    pub min_repeat_s: f64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            depths: Vec::new(),
            criticals: Vec::new(),
            detours: 0,
            seed: None,
            gamma_samples: 20,
            gamma_interval: GammaInterval::default(),
            repeats: 21,
            min_repeat_s: 0.002,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingRow {
    pub depth: usize,
    pub criticals: usize,
    pub waypoints: usize,
    pub states: usize,
    pub solvable: bool,
    pub candidates: usize,
    /// High-level length of the safest plan (the one produced by the smallest gamma).
    pub plan_length: Option<usize>,
    /// Smallest gamma that produced the safest plan.
    pub gamma: Option<f64>,
    /// Median wall-clock time of one solve at `gamma`.
    pub planning_time_s: Option<f64>,
    pub error: Option<String>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 { xs[n / 2] } else { 0.5 * (xs[n / 2 - 1] + xs[n / 2]) }
}

/// Pairs `depths[i]` with `criticals[i]`; a single-element list is repeated.
pub fn rows_of(cfg: &ScalingConfig) -> Result<Vec<(usize, usize)>, PipelineError> {
    let (d, c) = (&cfg.depths, &cfg.criticals);
    if d.is_empty() || c.is_empty() {
        return Err(PipelineError::input("scaling", "depth and critical-state lists must be nonempty"));
    }
    let n = d.len().max(c.len());
    if (d.len() != n && d.len() != 1) || (c.len() != n && c.len() != 1) {
        return Err(PipelineError::input("scaling", "depth and critical-state lists differ in length"));
    }
    Ok((0..n).map(|i| (d[i.min(d.len() - 1)], c[i.min(c.len() - 1)])).collect())
}

/// A solved row waiting for its timing.
struct Solved {
    row: ScalingRow,
    timed: Option<(crate::mdp::Mdp, f64, usize)>,
}

fn solve_row(depth: usize, criticals: usize, cfg: &ScalingConfig, seed: u64) -> Solved {
    let spec = CorridorSpec { depth, criticals, detours: cfg.detours, ..Default::default() };
    let s = corridor(&spec, &mut stream(seed, &[Part::Label("corridor"), Part::Index(depth as u64), Part::Index(criticals as u64)]));
    let mut row = ScalingRow {
        depth,
        criticals,
        waypoints: s.waypoints.len(),
        states: 0,
        solvable: false,
        candidates: 0,
        plan_length: None,
        gamma: None,
        planning_time_s: None,
        error: None,
    };
    let g = match crate::scenario::ground_to_mdp(&s) {
        Ok(g) => g,
        Err(e) => {
            row.error = Some(e.to_string());
            return Solved { row, timed: None };
        }
    };
    row.states = g.mdp.states.len();
    let mut rng = stream(seed, &[Part::Label("gamma"), Part::Index(depth as u64), Part::Index(criticals as u64)]);
    let set = match generate_candidates(&g.mdp, cfg.gamma_samples, cfg.gamma_interval, &mut rng) {
        Ok(set) => set,
        Err(e) => {
            row.error = Some(e.to_string());
            return Solved { row, timed: None };
        }
    };
    let lowest = |gs: &[f64]| gs.iter().copied().fold(f64::INFINITY, f64::min);
    let safest = set
        .candidates
        .iter()
        .min_by(|a, b| lowest(&a.gammas).total_cmp(&lowest(&b.gammas)))
        .expect("candidate set is nonempty");
    let gamma = lowest(&safest.gammas);
    let t0 = Instant::now();
    let _ = std::hint::black_box(solve(&g.mdp, gamma));
    let once = t0.elapsed().as_secs_f64().max(1e-9);
    let batch = ((cfg.min_repeat_s / once).ceil() as usize).clamp(1, 100_000);
    row.solvable = true;
    row.candidates = set.candidates.len();
    row.plan_length = Some(safest.steps);
    row.gamma = Some(gamma);
    Solved { row, timed: Some((g.mdp, gamma, batch)) }
}

fn time_batch(m: &crate::mdp::Mdp, gamma: f64, batch: usize) -> f64 {
    let t0 = Instant::now();
    for _ in 0..batch {
        let _ = std::hint::black_box(solve(std::hint::black_box(m), gamma));
    }
    t0.elapsed().as_secs_f64() / batch as f64
}

/// Solves every row, then times them round-robin so that slow drifts of the
/// machine affect all rows alike. Rows that fail carry the error instead.
pub fn run_scaling(cfg: &ScalingConfig) -> Result<Vec<ScalingRow>, PipelineError> {
    let seed = cfg.seed.ok_or_else(|| PipelineError::input("scaling", "a master seed is required"))?;
    if cfg.gamma_samples == 0 {
        return Err(PipelineError::input("scaling", "gamma_samples must be at least 1"));
    }
    let solved: Vec<Solved> = rows_of(cfg)?.into_iter().map(|(d, c)| solve_row(d, c, cfg, seed)).collect();
    if solved.iter().all(|r| !r.row.solvable) {
        return Err(PipelineError::internal("scaling", "no scenario could be solved"));
    }
    let mut times: Vec<Vec<f64>> = vec![Vec::new(); solved.len()];
    for _ in 0..cfg.repeats.max(1) {
        for (i, r) in solved.iter().enumerate() {
            if let Some((m, gamma, batch)) = &r.timed {
                times[i].push(time_batch(m, *gamma, *batch));
            }
        }
    }
    Ok(solved
        .into_iter()
        .zip(times)
        .map(|(r, t)| ScalingRow { planning_time_s: (!t.is_empty()).then(|| median(t)), ..r.row })
        .collect())
}

pub fn scaling_csv(rows: &[ScalingRow], hash: &str, seed: u64) -> String {
    let mut out = format!("# config_hash={hash} master_seed={seed}\n");
    out.push_str("depth,critical states,waypoints,states,solvable,candidates,plan length,risk factor,planning time [s],error\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.depth,
            r.criticals,
            r.waypoints,
            r.states,
            r.solvable,
            r.candidates,
            r.plan_length.map_or("-".into(), |x| x.to_string()),
            r.gamma.map_or("-".into(), |x| format!("{x:.4}")),
            r.planning_time_s.map_or("-".into(), |x| format!("{x:.6}")),
            r.error.as_deref().unwrap_or("").replace(',', ";"),
        ));
    }
    out
}

/// Runs the study and writes `scaling.csv` and `scaling.json` under `out`.
pub fn cmd_scaling(cfg: &ScalingConfig, out: &Path) -> Result<Vec<ScalingRow>, PipelineError> {
    let rows = run_scaling(cfg)?;
    let seed = cfg.seed.expect("checked by run_scaling");
    let hash = hash_json(cfg);
    std::fs::create_dir_all(out).map_err(|e| PipelineError::internal("write", e))?;
    let json = serde_json::json!({ "format_version": FORMAT_VERSION, "config_hash": hash, "master_seed": seed, "rows": rows });
    std::fs::write(out.join("scaling.csv"), scaling_csv(&rows, &hash, seed)).map_err(|e| PipelineError::internal("write", e))?;
    std::fs::write(out.join("scaling.json"), serde_json::to_string_pretty(&json).expect("rows serialize") + "\n")
        .map_err(|e| PipelineError::internal("write", e))?;
    Ok(rows)
}
