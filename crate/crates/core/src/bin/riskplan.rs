//! Command-line front end. Exit codes: 0 success, 1 internal error, 2 input error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use riskplan::occupancy::{ExtractConfig, MappingConfig};
use riskplan::pipeline::{self, load_json, report_error, PipelineError};
use riskplan::planner::GammaInterval;
use riskplan::scaling::{cmd_scaling, ScalingConfig};
use riskplan::{DisturbanceConfig, MetricConfig, RefineConfig};

#[derive(Parser)]
#[command(name = "riskplan", version, about = "Risk-aware inspection planning for underwater vehicles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Survey a scenario with simulated sonar and write the occupancy grid.
    Map {
        #[arg(long)]
        scenario: PathBuf,
        /// Mapping configuration (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Derive critical waypoints and edge risks from a grid.
    GenProblem {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate candidate plans over sampled risk factors.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0.4)]
        gamma_low: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma_high: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write measured planning times (breaks byte-for-byte reproducibility).
        #[arg(long)]
        record_timings: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn a plan file into a timed trajectory.
    Refine {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Execute a trajectory under disturbances.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute risk metrics from episode logs.
    Assess {
        #[arg(long, required = true, num_args = 1..)]
        logs: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        alpha_mean: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick a plan from an assessment report.
    Select {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha_mean: f64,
    },
    /// Run every stage from a JSON configuration.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Overrides the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Planning on synthetic corridors of growing size.
    Scaling {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        depths: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        criticals: Vec<usize>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Box plot of execution times from an assessment report.
    Plot {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn config_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, PipelineError> {
    path.map_or_else(|| Ok(T::default()), |p| load_json(p, "config"))
}

fn run(cmd: Command) -> Result<(), PipelineError> {
    match cmd {
        Command::Map { scenario, config, seed, out } => {
            let cfg: MappingConfig = config_or_default(config.as_deref())?;
            pipeline::cmd_map(&scenario, &cfg, seed, &out)
        }
        Command::GenProblem { scenario, grid, config, out } => {
            let cfg: ExtractConfig = config_or_default(config.as_deref())?;
            pipeline::cmd_gen_problem(&scenario, &grid, &cfg, &out)
        }
        Command::Plan { scenario, samples, gamma_low, gamma_high, seed, record_timings, out } => {
            let interval = GammaInterval { low: gamma_low, high: gamma_high };
            pipeline::cmd_plan(&scenario, samples, interval, seed, record_timings, &out)
        }
        Command::Refine { scenario, plan, config, out } => {
            let cfg: RefineConfig = config_or_default(config.as_deref())?;
            pipeline::cmd_refine(&scenario, &plan, &cfg, &out)
        }
        Command::Simulate { scenario, trajectory, config, episodes, seed, out } => {
            let cfg: DisturbanceConfig = config_or_default(config.as_deref())?;
            pipeline::cmd_simulate(&scenario, &trajectory, &cfg, episodes, seed, &out)
        }
        Command::Assess { logs, config, alpha_mean, out } => {
            let cfg: MetricConfig = config_or_default(config.as_deref())?;
            let report = pipeline::cmd_assess(&logs, &cfg, alpha_mean, &out)?;
            if let Some(s) = report.selection {
                println!("selected: {}", s.selected);
            }
            Ok(())
        }
        Command::Select { report, alpha_mean } => {
            let s = pipeline::cmd_select(&report, alpha_mean)?;
            println!("{}", serde_json::to_string_pretty(&s).expect("selection serializes"));
            Ok(())
        }
        Command::Pipeline { .. } => unreachable!("handled in main"),
        Command::Scaling { config, depths, criticals, seed, out } => {
            let mut cfg: ScalingConfig = config_or_default(config.as_deref())?;
            if !depths.is_empty() {
                cfg.depths = depths;
            }
            if !criticals.is_empty() {
                cfg.criticals = criticals;
            }
            cfg.seed = Some(seed);
            let rows = cmd_scaling(&cfg, &out)?;
            print!("{}", std::fs::read_to_string(out.join("scaling.csv")).unwrap_or_default());
            if rows.iter().any(|r| !r.solvable) {
                eprintln!("some scenarios could not be solved; see the error column");
            }
            Ok(())
        }
        Command::Plot { report, out } => {
            for id in pipeline::cmd_plot(&report, &out)? {
                eprintln!("skipped {id}: fewer than two episodes");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match cli.command {
        Command::Pipeline { config, seed, out } => match pipeline::load_config(&config) {
            Ok(mut cfg) => {
                cfg.seed = Some(seed);
                if let Some(out) = out {
                    cfg.output = out.to_string_lossy().into_owned();
                }
                pipeline::cmd_pipeline(&cfg)
            }
            Err(e) => report_error(&e, None),
        },
        cmd => match run(cmd) {
            Ok(()) => 0,
            Err(e) => report_error(&e, None),
        },
    };
    ExitCode::from(code as u8)
}
