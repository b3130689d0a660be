//! Risk-averse mission planning.
//!
//! The crate follows one pipeline: a scenario (world geometry plus a grounded
//! inspection problem) is turned into an MDP, a sweep over the risk factor
//! `gamma` of an exponential utility produces a set of distinct candidate
//! plans, each candidate is refined into a timed trajectory, executed many
//! times in a disturbed kinematic simulator, and the plan whose execution
//! times best balance mean against spread is selected.
//!
//! Module map:
//!
//! * [`mdp`]: models, induced chains, exact cost distributions
//! * [`scenario`]: scenario grammar, grounding, plan files
//! * [`occupancy`]: log-odds voxel maps from synthetic sonar, problem extraction
//! * [`planner`]: transformed transition system, risk-sensitive solver, candidate sweep
//! * [`refine`]: waypoint sequences to timed trajectories
//! * [`sim`]: seeded Monte-Carlo execution
//! * [`assess`]: risk metrics, selection, Welch comparisons
//! * [`pipeline`], [`scaling`], [`plot`]: orchestration and reporting

pub mod assess;
pub mod mdp;
pub mod occupancy;
pub mod pipeline;
pub mod planner;
pub mod plot;
pub mod refine;
pub mod scaling;
pub mod scenario;
pub mod seed;
pub mod sim;

pub use assess::{compare_means, compute_metrics, select, MetricConfig, RiskMetrics, Selection};
pub use mdp::{MarkovChain, Mdp, Plan, RewardDistribution};
pub use planner::{generate_candidates, linearize, solve, transform, Candidate};
pub use refine::{refine, RefineConfig, Trajectory};
pub use scenario::{ground_to_mdp, parse_scenario, Scenario};
pub use sim::{run_batch, run_episode, DisturbanceConfig, EpisodeRecord};
