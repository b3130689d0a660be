//! End-to-end orchestration and the single-stage commands behind the CLI.
//!
//! Every artifact carries the configuration hash and the master seed. With
//! `record_timings` off (the default) no wall-clock quantity is written, so
//! re-running a configuration reproduces every file byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::assess::{compare_means, compute_metrics, select, MetricConfig, RiskMetrics, Selection};
use crate::mdp::Plan;
use crate::occupancy::{extract_for_scenario, map_scenario, ExtractConfig, MappingConfig, VoxelGrid};
use crate::planner::{generate_candidates, GammaInterval, PlanError};
use crate::plot::{box_plot, plan_order};
use crate::refine::{refine, RefineConfig, Trajectory};
use crate::scenario::{
    from_json_strict, ground_to_mdp, nominal_route, parse_scenario_bytes, read_plan_file, write_plan_file, Grounding,
    PlanFile, Scenario, FORMAT_VERSION,
};
use crate::seed::{stream, Part};
use crate::sim::{episode_log, run_batch, DisturbanceConfig, EpisodeRecord};

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Bad user input: exit code 2.
    #[error("{stage}: {message}")]
    Input { stage: &'static str, message: String, details: serde_json::Value },
    /// Anything else: exit code 1.
    #[error("{stage}: {message}")]
    Internal { stage: &'static str, message: String },
}

impl PipelineError {
    pub fn input(stage: &'static str, message: impl Into<String>) -> Self {
        PipelineError::Input { stage, message: message.into(), details: serde_json::Value::Null }
    }

    pub fn internal(stage: &'static str, message: impl ToString) -> Self {
        PipelineError::Internal { stage, message: message.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Input { .. } => 2,
            PipelineError::Internal { .. } => 1,
        }
    }

    /// Machine-readable form written to `error.json` and stderr.
    pub fn report(&self) -> serde_json::Value {
        match self {
            PipelineError::Input { stage, message, details } => {
                json!({ "kind": "input", "stage": stage, "message": message, "details": details })
            }
            PipelineError::Internal { stage, message } => {
                json!({ "kind": "internal", "stage": stage, "message": message })
            }
        }
    }
}

type Result<T, E = PipelineError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapStage {
    pub mapping: MappingConfig,
    pub extract: ExtractConfig,
}

impl Default for MapStage {
    fn default() -> Self {
        MapStage { mapping: MappingConfig::default(), extract: ExtractConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub scenario: String,
    pub gamma_samples: usize,
    pub gamma_interval: GammaInterval,
    pub episodes: usize,
    pub seed: Option<u64>,
    pub disturbance: DisturbanceConfig,
    pub metrics: MetricConfig,
    /// Mean filter slack of the selector.
    pub alpha_mean: f64,
    pub refine: RefineConfig,
    /// Rebuild critical flags and edge risks from a synthetic sonar survey.
    pub mapping: Option<MapStage>,
    pub output: String,
    /// Write measured planning times into the artifacts.
    pub record_timings: bool,
    /// Directory that a relative `scenario` path is resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            scenario: String::new(),
            gamma_samples: 20,
            gamma_interval: GammaInterval::default(),
            episodes: 10,
            seed: None,
            disturbance: DisturbanceConfig::default(),
            metrics: MetricConfig::default(),
            alpha_mean: 0.05,
            refine: RefineConfig::default(),
            mapping: None,
            output: "out".into(),
            record_timings: false,
            base_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(PipelineError::input("config", m));
        if self.scenario.is_empty() {
            return bad("no scenario given");
        }
        if self.seed.is_none() {
            return bad("a master seed is required");
        }
        let GammaInterval { low, high } = self.gamma_interval;
        if !(low > 0.0 && low < high && high <= 1.0) {
            return bad("gamma interval must satisfy 0 < low < high <= 1");
        }
        if self.gamma_samples == 0 || self.episodes == 0 {
            return bad("gamma_samples and episodes must be at least 1");
        }
        if !(self.alpha_mean >= 0.0) {
            return bad("alpha_mean must be nonnegative");
        }
        Ok(())
    }
}

pub fn load_json<T: DeserializeOwned>(path: &Path, stage: &'static str) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| PipelineError::input(stage, format!("cannot read {}: {e}", path.display())))?;
    from_json_strict(&text).map_err(|e| PipelineError::Input {
        stage,
        message: format!("{}: {e}", path.display()),
        details: serde_json::to_value(&e).unwrap_or_default(),
    })
}

/// Loads a pipeline configuration; a relative scenario path is taken
/// relative to the configuration file.
pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let mut cfg: PipelineConfig = load_json(path, "config")?;
    cfg.base_dir = path.parent().map(Path::to_path_buf);
    Ok(cfg)
}

impl PipelineConfig {
    pub fn scenario_path(&self) -> PathBuf {
        match &self.base_dir {
            Some(dir) => dir.join(&self.scenario),
            None => PathBuf::from(&self.scenario),
        }
    }
}

/// SHA-256 over a canonical JSON rendering of `value`.
pub fn hash_json(value: &impl Serialize) -> String {
    // serde_json maps are ordered, so the rendering is canonical.
    let v = serde_json::to_value(value).expect("configuration serializes");
    let digest = Sha256::digest(v.to_string().as_bytes());
    hex::encode(digest)
}

/// Hash of the configuration (without the output directory) and the
/// scenario contents.
pub fn config_hash(cfg: &PipelineConfig, scenario_bytes: &[u8]) -> String {
    let mut c = cfg.clone();
    c.output.clear();
    hash_json(&json!({ "config": c, "scenario_sha256": hex::encode(Sha256::digest(scenario_bytes)) }))
}

fn header_line(hash: &str, seed: u64) -> String {
    format!("config_hash={hash} master_seed={seed}")
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| PipelineError::internal("write", format!("{}: {e}", path.display())))
}

fn to_pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifacts serialize");
    s.push('\n');
    s
}

pub fn read_scenario(path: &Path) -> Result<(Scenario, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| PipelineError::input("parse", format!("cannot read {}: {e}", path.display())))?;
    let s = parse_scenario_bytes(&bytes).map_err(|errors| PipelineError::Input {
        stage: "parse",
        message: format!("{}: {} error(s), first: {}", path.display(), errors.len(), errors[0]),
        details: json!({ "file": path.display().to_string(), "errors": errors }),
    })?;
    Ok((s, bytes))
}

fn ground(s: &Scenario) -> Result<Grounding> {
    ground_to_mdp(s).map_err(|e| PipelineError::input("ground", e.to_string()))
}

fn plan_error(e: PlanError) -> PipelineError {
    match e {
        PlanError::NoCandidates(inner) if matches!(*inner, PlanError::NoProperPolicy) => {
            PipelineError::input("plan", "no plan reaches the goal with probability 1")
        }
        e => PipelineError::internal("plan", e),
    }
}

/// Per-plan section of an assessment report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanReport {
    pub plan_id: String,
    pub gamma: Option<f64>,
    pub gammas: Vec<f64>,
    pub schema: Vec<String>,
    pub high_level_length: Option<usize>,
    pub low_level_length_m: Option<f64>,
    pub nominal_duration_s: Option<f64>,
    pub planning_time_s: Option<f64>,
    pub execution_times_s: Vec<f64>,
    pub completed_episodes: usize,
    pub incidents: usize,
    /// Absent for plans with fewer than two episodes.
    pub metrics: Option<RiskMetrics>,
}

/// Welch comparison of the selected plan against a rival.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comparison {
    pub rival: String,
    /// Absent when both samples are constant and the statistic is infinite.
    pub t: Option<f64>,
    pub df: Option<f64>,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessmentReport {
    pub format_version: u32,
    pub config_hash: String,
    pub master_seed: u64,
    pub scenario: Option<String>,
    pub metric_config: MetricConfig,
    pub alpha_mean: f64,
    pub plans: Vec<PlanReport>,
    pub selection: Option<Selection>,
    pub comparisons: Vec<Comparison>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Fills in metrics, the selection and the Welch comparisons.
pub fn assess_plans(plans: &mut [PlanReport], cfg: &MetricConfig, alpha_mean: f64) -> Result<(Option<Selection>, Vec<Comparison>)> {
    for p in plans.iter_mut() {
        p.metrics = match compute_metrics(&p.execution_times_s, cfg) {
            Ok(m) => Some(m),
            Err(crate::assess::AssessError::InsufficientSamples { .. }) => None,
            Err(e) => return Err(PipelineError::input("assess", e.to_string())),
        };
    }
    let table: Vec<(String, RiskMetrics)> =
        plans.iter().filter_map(|p| p.metrics.clone().map(|m| (p.plan_id.clone(), m))).collect();
    if table.is_empty() {
        return Ok((None, Vec::new()));
    }
    let selection = select(&table, alpha_mean);
    let chosen = plans.iter().find(|p| p.plan_id == selection.selected).expect("selected plan exists");
    let comparisons = plans
        .iter()
        .filter(|p| p.plan_id != selection.selected && p.metrics.is_some())
        .map(|p| {
            let w = compare_means(&chosen.execution_times_s, &p.execution_times_s).expect("both have two samples");
            Comparison { rival: p.plan_id.clone(), t: finite(w.t), df: finite(w.df), p_value: w.p_value }
        })
        .collect();
    Ok((Some(selection), comparisons))
}

/// Per-plan summary table.
pub fn summary_table(report: &AssessmentReport) -> String {
    let mut out = format!("# {}\n", header_line(&report.config_hash, report.master_seed));
    out.push_str("id,plan schema,planning time [s],high-level length,low-level length [m],mean [s],variance [s^2],entropy [bits]\n");
    let opt = |x: Option<f64>, prec: usize| x.map_or("-".to_string(), |v| format!("{v:.prec$}"));
    for p in &report.plans {
        let m = p.metrics.as_ref();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            p.plan_id,
            p.schema.join(" -> "),
            opt(p.planning_time_s, 4),
            p.high_level_length.map_or("-".into(), |n| n.to_string()),
            opt(p.low_level_length_m, 2),
            opt(m.map(|m| m.mean), 2),
            opt(m.map(|m| m.variance), 2),
            opt(m.map(|m| m.entropy_bits), 2),
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexEntry {
    pub plan_id: String,
    pub file: String,
    pub gammas: Vec<f64>,
    pub planning_time_s: Option<f64>,
}

/// Candidate-set index: every gamma drawn and the plan it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateIndex {
    pub format_version: u32,
    pub config_hash: String,
    pub master_seed: u64,
    pub gamma_samples: Vec<f64>,
    /// Plan id per drawn gamma, `None` where the solve failed.
    pub produced: Vec<Option<String>>,
    pub plans: Vec<IndexEntry>,
    pub failures: Vec<String>,
}

/// Plans and their metadata, as produced by the candidate stage.
pub struct PlannedCandidates {
    pub grounding: Grounding,
    pub files: Vec<PlanFile>,
    pub index: CandidateIndex,
}

pub fn plan_candidates(
    s: &Scenario,
    n: usize,
    interval: GammaInterval,
    seed: u64,
    hash: &str,
    record_timings: bool,
) -> Result<PlannedCandidates> {
    let g = ground(s)?;
    let set = generate_candidates(&g.mdp, n, interval, &mut stream(seed, &[Part::Label("gamma")])).map_err(plan_error)?;
    let time = |t: f64| record_timings.then_some(t);
    let files: Vec<PlanFile> = set
        .candidates
        .iter()
        .map(|c| PlanFile {
            format_version: FORMAT_VERSION,
            config_hash: hash.to_string(),
            master_seed: seed,
            plan_id: c.plan.id.clone(),
            gamma: c.plan.gamma,
            gammas: c.gammas.clone(),
            actions: c.plan.linearization.clone(),
            high_level_length: c.steps,
            planning_time_s: time(c.planning_time_s),
            trajectory: None,
            low_level_length_m: None,
            policy: c.plan.policy.clone(),
        })
        .collect();
    let produced = set
        .samples
        .iter()
        .map(|g| set.candidates.iter().find(|c| c.gammas.contains(g)).map(|c| c.plan.id.clone()))
        .collect();
    let index = CandidateIndex {
        format_version: FORMAT_VERSION,
        config_hash: hash.to_string(),
        master_seed: seed,
        gamma_samples: set.samples.clone(),
        produced,
        plans: set
            .candidates
            .iter()
            .map(|c| IndexEntry {
                plan_id: c.plan.id.clone(),
                file: format!("{}.plan.json", c.plan.id),
                gammas: c.gammas.clone(),
                planning_time_s: time(c.planning_time_s),
            })
            .collect(),
        failures: set.failures.iter().map(|(g, e)| format!("gamma {g}: {e}")).collect(),
    };
    Ok(PlannedCandidates { grounding: g, files, index })
}

/// Refines the nominal route of a stored plan.
pub fn refine_plan_file(s: &Scenario, g: &Grounding, pf: &PlanFile, cfg: &RefineConfig) -> Result<Trajectory> {
    let mut plan = Plan::new(pf.plan_id.clone(), pf.gamma, pf.policy.clone());
    plan.linearization = pf.actions.clone();
    let route = nominal_route(g, &plan).map_err(|e| PipelineError::input("refine", format!("{}: {e}", pf.plan_id)))?;
    refine(s, &pf.plan_id, &route, cfg).map_err(|e| PipelineError::input("refine", format!("{}: {e}", pf.plan_id)))
}

fn trajectory_csv(t: &Trajectory, hash: &str, seed: u64) -> String {
    format!("# {}\n{}", header_line(hash, seed), t.to_csv())
}

/// Result of a pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub output: PathBuf,
    pub config_hash: String,
    pub report: AssessmentReport,
    pub summary: String,
}

/// parse → (map + extract) → ground → candidates → refine → simulate →
/// metrics → select, writing every artifact into `cfg.output`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    cfg.check()?;
    let seed = cfg.seed.expect("checked");
    let (mut scenario, bytes) = read_scenario(&cfg.scenario_path())?;
    let hash = config_hash(cfg, &bytes);
    let out = PathBuf::from(&cfg.output);
    fs::create_dir_all(&out).map_err(|e| PipelineError::internal("write", format!("{}: {e}", out.display())))?;
    let header = header_line(&hash, seed);

    if let Some(stage) = &cfg.mapping {
        let grid = map_scenario(&scenario, &stage.mapping, &mut stream(seed, &[Part::Label("map")]))
            .map_err(|e| PipelineError::input("map", e.to_string()))?;
        let fragment =
            extract_for_scenario(&grid, &scenario, &stage.extract).map_err(|e| PipelineError::input("extract", e.to_string()))?;
        scenario = fragment.apply(&scenario);
        write(&out.join("grid.csv"), format!("# {header}\n{}", grid.to_csv()))?;
        write(&out.join("extracted.scn"), format!("# {header}\n{}", scenario.to_scn()))?;
    }

    let planned = plan_candidates(&scenario, cfg.gamma_samples, cfg.gamma_interval, seed, &hash, cfg.record_timings)?;
    let trajectories: Vec<Trajectory> = planned
        .files
        .par_iter()
        .map(|pf| refine_plan_file(&scenario, &planned.grounding, pf, &cfg.refine))
        .collect::<Result<_>>()?;
    let batches: Vec<Vec<EpisodeRecord>> = trajectories
        .par_iter()
        .map(|t| {
            if t.samples.len() < 2 {
                return Ok(Vec::new());
            }
            run_batch(t, &scenario, &cfg.disturbance, cfg.episodes, seed).map_err(|e| PipelineError::input("simulate", e.to_string()))
        })
        .collect::<Result<_>>()?;

    let mut plans = Vec::new();
    for ((pf, t), records) in planned.files.iter().zip(&trajectories).zip(&batches) {
        let mut pf = pf.clone();
        pf.trajectory = Some(format!("{}.trajectory.csv", pf.plan_id));
        pf.low_level_length_m = Some(t.length_m);
        write(&out.join(format!("{}.plan.json", pf.plan_id)), write_plan_file(&pf).map_err(|e| PipelineError::internal("write", e))?)?;
        write(&out.join(format!("{}.trajectory.csv", pf.plan_id)), trajectory_csv(t, &hash, seed))?;
        let log_header = json!({ "format_version": FORMAT_VERSION, "config_hash": hash, "master_seed": seed, "plan_id": pf.plan_id });
        write(&out.join(format!("{}.episodes.jsonl", pf.plan_id)), episode_log(&log_header, records))?;
        plans.push(PlanReport {
            plan_id: pf.plan_id.clone(),
            gamma: Some(pf.gamma),
            gammas: pf.gammas.clone(),
            schema: schema_of(&pf.actions),
            high_level_length: Some(pf.high_level_length),
            low_level_length_m: Some(t.length_m),
            nominal_duration_s: Some(t.duration_s),
            planning_time_s: pf.planning_time_s,
            execution_times_s: records.iter().map(|r| r.execution_time_s).collect(),
            completed_episodes: records.iter().filter(|r| r.completed).count(),
            incidents: records.iter().map(|r| r.incidents.len()).sum(),
            metrics: None,
        });
    }
    write(&out.join("index.json"), to_pretty(&planned.index))?;

    let (selection, comparisons) = assess_plans(&mut plans, &cfg.metrics, cfg.alpha_mean)?;
    let report = AssessmentReport {
        format_version: FORMAT_VERSION,
        config_hash: hash.clone(),
        master_seed: seed,
        scenario: Some(cfg.scenario.clone()),
        metric_config: cfg.metrics,
        alpha_mean: cfg.alpha_mean,
        plans,
        selection,
        comparisons,
    };
    write(&out.join("report.json"), to_pretty(&report))?;
    let summary = summary_table(&report);
    write(&out.join("summary.csv"), &summary)?;
    if let Ok(plot) = plot_report(&report) {
        write(&out.join("boxplot.svg"), plot.svg)?;
        write(&out.join("samples.csv"), plot.csv)?;
    }
    Ok(PipelineOutcome { output: out, config_hash: hash, report, summary })
}

fn schema_of(actions: &[String]) -> Vec<String> {
    actions.iter().filter_map(|a| a.strip_prefix("inspect ").map(str::to_string)).collect()
}

/// Runs the pipeline; on failure writes `error.json` into the output
/// directory when possible. Returns the process exit code.
pub fn cmd_pipeline(cfg: &PipelineConfig) -> i32 {
    match run_pipeline(cfg) {
        Ok(o) => {
            print!("{}", o.summary);
            if let Some(s) = &o.report.selection {
                println!("selected: {}", s.selected);
            }
            0
        }
        Err(e) => report_error(&e, Some(Path::new(&cfg.output))),
    }
}

/// Prints the machine-readable error report to stderr (and `error.json`
/// under `dir`) and returns the exit code.
pub fn report_error(e: &PipelineError, dir: Option<&Path>) -> i32 {
    let report = e.report();
    eprintln!("{}", serde_json::to_string_pretty(&report).unwrap_or_default());
    if let Some(dir) = dir {
        if fs::create_dir_all(dir).is_ok() {
            let _ = fs::write(dir.join("error.json"), to_pretty(&report));
        }
    }
    e.exit_code()
}

pub fn plot_report(report: &AssessmentReport) -> Result<crate::plot::PlotOutput> {
    let plans: Vec<(String, Vec<f64>)> =
        report.plans.iter().map(|p| (p.plan_id.clone(), p.execution_times_s.clone())).collect();
    box_plot(&plans, &[header_line(&report.config_hash, report.master_seed)])
        .map_err(|e| PipelineError::input("plot", e.to_string()))
}

// Single-stage commands. Each writes its artifacts under `out` and hashes
// its own effective arguments.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub format_version: u32,
    pub config_hash: String,
    pub master_seed: u64,
    pub grid: VoxelGrid,
}

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| PipelineError::internal("write", format!("{}: {e}", out.display())))
}

pub fn cmd_map(scenario: &Path, cfg: &MappingConfig, seed: u64, out: &Path) -> Result<()> {
    let (s, bytes) = read_scenario(scenario)?;
    let hash = hash_json(&json!({ "mapping": cfg, "scenario_sha256": hex::encode(Sha256::digest(&bytes)) }));
    let grid = map_scenario(&s, cfg, &mut stream(seed, &[Part::Label("map")])).map_err(|e| PipelineError::input("map", e.to_string()))?;
    create_dir(out)?;
    write(&out.join("grid.csv"), format!("# {}\n{}", header_line(&hash, seed), grid.to_csv()))?;
    let file = GridFile { format_version: FORMAT_VERSION, config_hash: hash, master_seed: seed, grid };
    write(&out.join("grid.json"), serde_json::to_string(&file).expect("grid serializes"))
}

pub fn cmd_gen_problem(scenario: &Path, grid: &Path, cfg: &ExtractConfig, out: &Path) -> Result<()> {
    let (s, _) = read_scenario(scenario)?;
    let g: GridFile = load_json(grid, "gen-problem")?;
    let fragment = extract_for_scenario(&g.grid, &s, cfg).map_err(|e| PipelineError::input("extract", e.to_string()))?;
    let hash = hash_json(&json!({ "extract": cfg, "grid_hash": g.config_hash }));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write(out, format!("# {}\n{}", header_line(&hash, g.master_seed), fragment.apply(&s).to_scn()))
}

pub fn cmd_plan(scenario: &Path, n: usize, interval: GammaInterval, seed: u64, record_timings: bool, out: &Path) -> Result<()> {
    let (s, bytes) = read_scenario(scenario)?;
    let hash = hash_json(&json!({ "gamma_samples": n, "gamma_interval": interval, "scenario_sha256": hex::encode(Sha256::digest(&bytes)) }));
    let planned = plan_candidates(&s, n, interval, seed, &hash, record_timings)?;
    create_dir(out)?;
    for pf in &planned.files {
        write(&out.join(format!("{}.plan.json", pf.plan_id)), write_plan_file(pf).map_err(|e| PipelineError::internal("write", e))?)?;
    }
    write(&out.join("index.json"), to_pretty(&planned.index))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryFile {
    pub format_version: u32,
    pub config_hash: String,
    pub master_seed: u64,
    pub trajectory: Trajectory,
}

pub fn cmd_refine(scenario: &Path, plan: &Path, cfg: &RefineConfig, out: &Path) -> Result<()> {
    let (s, _) = read_scenario(scenario)?;
    let text = fs::read_to_string(plan).map_err(|e| PipelineError::input("refine", format!("{}: {e}", plan.display())))?;
    let pf = read_plan_file(&text).map_err(|e| PipelineError::input("refine", format!("{}: {e}", plan.display())))?;
    let g = ground(&s)?;
    let t = refine_plan_file(&s, &g, &pf, cfg)?;
    create_dir(out)?;
    write(&out.join(format!("{}.trajectory.csv", pf.plan_id)), trajectory_csv(&t, &pf.config_hash, pf.master_seed))?;
    let file = TrajectoryFile { format_version: FORMAT_VERSION, config_hash: pf.config_hash, master_seed: pf.master_seed, trajectory: t };
    write(&out.join(format!("{}.trajectory.json", pf.plan_id)), serde_json::to_string(&file).expect("trajectory serializes"))
}

pub fn cmd_simulate(scenario: &Path, trajectory: &Path, cfg: &DisturbanceConfig, episodes: usize, seed: u64, out: &Path) -> Result<()> {
    let (s, _) = read_scenario(scenario)?;
    let tf: TrajectoryFile = load_json(trajectory, "simulate")?;
    if episodes == 0 {
        return Err(PipelineError::input("simulate", "episodes must be at least 1"));
    }
    let records =
        run_batch(&tf.trajectory, &s, cfg, episodes, seed).map_err(|e| PipelineError::input("simulate", e.to_string()))?;
    let hash = hash_json(&json!({ "disturbance": cfg, "episodes": episodes, "trajectory_hash": tf.config_hash }));
    let header = json!({ "format_version": FORMAT_VERSION, "config_hash": hash, "master_seed": seed, "plan_id": tf.trajectory.plan_id });
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write(out, episode_log(&header, &records))
}

/// Reads a JSON-lines episode log: header line, then records.
pub fn read_episode_log(path: &Path) -> Result<(serde_json::Value, Vec<EpisodeRecord>)> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::input("assess", format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: serde_json::Value = lines
        .next()
        .and_then(|l| serde_json::from_str(l).ok())
        .ok_or_else(|| PipelineError::input("assess", format!("{}: missing header line", path.display())))?;
    let records = lines
        .enumerate()
        .map(|(i, l)| {
            from_json_strict::<EpisodeRecord>(l)
                .map_err(|e| PipelineError::input("assess", format!("{} line {}: {e}", path.display(), i + 2)))
        })
        .collect::<Result<_>>()?;
    Ok((header, records))
}

pub fn cmd_assess(logs: &[PathBuf], cfg: &MetricConfig, alpha_mean: f64, out: &Path) -> Result<AssessmentReport> {
    if logs.is_empty() {
        return Err(PipelineError::input("assess", "no episode logs given"));
    }
    let mut plans = Vec::new();
    let mut seeds = Vec::new();
    let mut hashes = Vec::new();
    for path in logs {
        let (header, records) = read_episode_log(path)?;
        let plan_id = header["plan_id"].as_str().map(str::to_string).or_else(|| records.first().map(|r| r.plan_id.clone()));
        let plan_id = plan_id.ok_or_else(|| PipelineError::input("assess", format!("{}: no plan id", path.display())))?;
        seeds.push(header["master_seed"].as_u64().unwrap_or(0));
        hashes.push(header["config_hash"].as_str().unwrap_or_default().to_string());
        plans.push(PlanReport {
            plan_id,
            gamma: None,
            gammas: Vec::new(),
            schema: Vec::new(),
            high_level_length: None,
            low_level_length_m: None,
            nominal_duration_s: None,
            planning_time_s: None,
            execution_times_s: records.iter().map(|r| r.execution_time_s).collect(),
            completed_episodes: records.iter().filter(|r| r.completed).count(),
            incidents: records.iter().map(|r| r.incidents.len()).sum(),
            metrics: None,
        });
    }
    plans.sort_by(|a, b| plan_order(&a.plan_id, &b.plan_id));
    let (selection, comparisons) = assess_plans(&mut plans, cfg, alpha_mean)?;
    let report = AssessmentReport {
        format_version: FORMAT_VERSION,
        config_hash: hash_json(&json!({ "metrics": cfg, "alpha_mean": alpha_mean, "inputs": hashes })),
        master_seed: seeds[0],
        scenario: None,
        metric_config: *cfg,
        alpha_mean,
        plans,
        selection,
        comparisons,
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write(out, to_pretty(&report))?;
    Ok(report)
}

/// Re-runs the selector on a report's metric table.
pub fn cmd_select(report: &Path, alpha_mean: f64) -> Result<Selection> {
    let r: AssessmentReport = load_json(report, "select")?;
    let table: Vec<(String, RiskMetrics)> =
        r.plans.iter().filter_map(|p| p.metrics.clone().map(|m| (p.plan_id.clone(), m))).collect();
    if table.is_empty() {
        return Err(PipelineError::input("select", "report has no plan with metrics"));
    }
    Ok(select(&table, alpha_mean))
}

pub fn cmd_plot(report: &Path, out: &Path) -> Result<Vec<String>> {
    let r: AssessmentReport = load_json(report, "plot")?;
    let plot = plot_report(&r)?;
    create_dir(out)?;
    write(&out.join("boxplot.svg"), &plot.svg)?;
    write(&out.join("samples.csv"), &plot.csv)?;
    Ok(plot.skipped)
}
