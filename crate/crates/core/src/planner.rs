//! Risk-sensitive planning with an exponential utility.
//!
//! For a risk factor `0 < gamma < 1` the solver minimizes the expected
//! disutility `E[(1/gamma)^C]` of the cumulative cost `C`. Each step through a
//! state `s` multiplies the disutility by `gamma^(-R(s))`, so the Bellman
//! equation only needs local changes to the model:
//!
//! ```text
//! V(goal) = 1
//! V(s)    = gamma^(-R(s)) * min_a  sum_s' P(s, a, s') * V(s')
//! ```
//!
//! As `gamma -> 1` the ordering of policies approaches the expected-cost
//! ordering; as `gamma -> 0` the worst-case cost dominates. [`transform`]
//! produces the signed pseudo-probabilities `P * (-gamma^R(s))` of the
//! transformed transition system for export; the solver applies the sign once
//! globally and works with positive disutilities.

use std::collections::{BTreeMap, VecDeque};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{ActionId, ActionTable, Mdp, MdpError, Plan, StateId, Transition};

/// Relative slack under which two action values count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("risk factor {0} outside (0, 1)")]
    GammaOutOfRange(f64),
    #[error("model is invalid: {0:?}")]
    InvalidModel(Vec<String>),
    #[error("no policy reaches a goal with probability 1 from the start state")]
    NoProperPolicy,
    #[error("value iteration did not converge within {sweeps} sweeps (last change {change:e})")]
    NonConvergence { sweeps: usize, change: f64 },
    #[error("plan is improper: {0}")]
    ImproperPolicy(MdpError),
    #[error("every gamma sample failed; first failure: {0}")]
    NoCandidates(Box<PlanError>),
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("gamma interval [{0}, {1}) is not inside (0, 1)")]
    BadInterval(f64, f64),
}

/// Transition system with signed pseudo-probabilities in `[-1, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedModel {
    pub gamma: f64,
    pub start: StateId,
    pub goals: Vec<StateId>,
    pub transitions: Vec<Transition>,
}

pub fn transform(m: &Mdp, gamma: f64) -> Result<TransformedModel, PlanError> {
    check_gamma(gamma)?;
    let transitions = m
        .transitions
        .iter()
        .map(|t| Transition {
            probability: t.probability * -gamma.powf(m.states[t.source].cost),
            ..*t
        })
        .collect();
    Ok(TransformedModel {
        gamma,
        start: m.start,
        goals: m.goals.iter().copied().collect(),
        transitions,
    })
}

fn check_gamma(gamma: f64) -> Result<(), PlanError> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(PlanError::GammaOutOfRange(gamma))
    }
}

/// Optimal disutility per state. Goals hold 1; states without a proper
/// continuation hold `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub gamma: f64,
    pub values: Vec<f64>,
    pub sweeps: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveConfig {
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig { tolerance: 1e-10, max_sweeps: 1_000_000 }
    }
}

pub fn solve(m: &Mdp, gamma: f64) -> Result<(ValueTable, Plan), PlanError> {
    solve_with(m, gamma, &SolveConfig::default())
}

pub fn solve_with(m: &Mdp, gamma: f64, cfg: &SolveConfig) -> Result<(ValueTable, Plan), PlanError> {
    check_gamma(gamma)?;
    let violations = m.validate();
    if !violations.is_empty() {
        return Err(PlanError::InvalidModel(violations.iter().map(ToString::to_string).collect()));
    }
    let table = m.action_table();
    let n = m.states.len();
    let allowed = proper_region(m, &table);
    let in_region: Vec<bool> = (0..n).map(|s| m.is_goal(s) || !allowed[s].is_empty()).collect();

    let weight: Vec<f64> = m.states.iter().map(|s| gamma.powf(-s.cost)).collect();
    let mut values: Vec<f64> =
        (0..n).map(|s| if in_region[s] { 1.0 } else { f64::INFINITY }).collect();
    let order = sweep_order(m, &table, &allowed);

    let q = |values: &[f64], s: StateId, a: ActionId| -> f64 {
        table.outcomes(s, a).unwrap().iter().map(|&(t, p)| p * values[t]).sum()
    };

    let mut sweeps = 0;
    loop {
        let mut change: f64 = 0.0;
        for &s in &order {
            let best = allowed[s].iter().map(|&a| q(&values, s, a)).fold(f64::INFINITY, f64::min);
            let v = weight[s] * best;
            let old = values[s];
            let d = if v == old { 0.0 } else { (v - old).abs() / old.abs().max(1.0) };
            change = change.max(d);
            values[s] = v;
        }
        sweeps += 1;
        if change <= cfg.tolerance {
            break;
        }
        if sweeps >= cfg.max_sweeps {
            return Err(PlanError::NonConvergence { sweeps, change });
        }
    }
    if !values[m.start].is_finite() {
        return Err(PlanError::NoProperPolicy);
    }

    // Greedy extraction: lowest action id among (near-)minimizers.
    let tied: Vec<Vec<ActionId>> = (0..n)
        .map(|s| {
            if m.is_goal(s) || allowed[s].is_empty() {
                return Vec::new();
            }
            let qs: Vec<(ActionId, f64)> = allowed[s].iter().map(|&a| (a, q(&values, s, a))).collect();
            let best = qs.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
            qs.into_iter()
                .filter(|&(_, v)| v == best || v <= best * (1.0 + TIE_TOLERANCE))
                .map(|(a, _)| a)
                .collect()
        })
        .collect();
    let greedy: BTreeMap<StateId, ActionId> =
        (0..n).filter(|&s| !tied[s].is_empty()).map(|s| (s, tied[s][0])).collect();
    let mut policy = restrict_to_reachable(m, &table, &greedy);
    if !is_proper(m, &policy) {
        // Only zero-cost cycles can make a greedy choice improper; break ties
        // towards strictly decreasing hop distance to the goal instead.
        let policy_by_distance = progress_policy(m, &table, &tied);
        policy = restrict_to_reachable(m, &table, &policy_by_distance);
    }
    let mut plan = Plan::new(String::new(), gamma, policy);
    plan.linearization = linearize(m, &plan).map(|l| l.actions).unwrap_or_default();
    Ok((ValueTable { gamma, values, sweeps }, plan))
}

/// Per state, the actions that keep the process inside the set of states
/// from which some policy reaches a goal with probability one. States outside
/// that set get an empty list.
fn proper_region(m: &Mdp, table: &ActionTable) -> Vec<Vec<ActionId>> {
    let n = m.states.len();
    let mut region = vec![true; n];
    loop {
        let allowed: Vec<Vec<ActionId>> = (0..n)
            .map(|s| {
                if !region[s] || m.is_goal(s) {
                    return Vec::new();
                }
                table
                    .available(s)
                    .iter()
                    .filter(|(_, outs)| outs.iter().all(|&(t, _)| region[t]))
                    .map(|(a, _)| *a)
                    .collect()
            })
            .collect();
        // Backward reachability of the goals using allowed actions only.
        let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); n];
        for s in 0..n {
            for &a in &allowed[s] {
                for &(t, _) in table.outcomes(s, a).unwrap() {
                    preds[t].push(s);
                }
            }
        }
        let mut next = vec![false; n];
        let mut queue: VecDeque<StateId> = m.goals.iter().copied().collect();
        for &g in &queue {
            next[g] = true;
        }
        while let Some(t) = queue.pop_front() {
            for &s in &preds[t] {
                if !next[s] {
                    next[s] = true;
                    queue.push_back(s);
                }
            }
        }
        if next == region {
            return allowed;
        }
        region = next;
    }
}

fn sweep_order(m: &Mdp, table: &ActionTable, allowed: &[Vec<ActionId>]) -> Vec<StateId> {
    let n = m.states.len();
    let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for s in 0..n {
        for &a in &allowed[s] {
            for &(t, _) in table.outcomes(s, a).unwrap() {
                preds[t].push(s);
            }
        }
    }
    let mut seen = vec![false; n];
    let mut order = Vec::new();
    let mut queue: VecDeque<StateId> = m.goals.iter().copied().collect();
    for &g in &queue {
        seen[g] = true;
    }
    while let Some(t) = queue.pop_front() {
        for &s in &preds[t] {
            if !seen[s] {
                seen[s] = true;
                order.push(s);
                queue.push_back(s);
            }
        }
    }
    order
}

fn restrict_to_reachable(
    m: &Mdp,
    table: &ActionTable,
    policy: &BTreeMap<StateId, ActionId>,
) -> BTreeMap<StateId, ActionId> {
    let mut out = BTreeMap::new();
    let mut seen = vec![false; m.states.len()];
    let mut queue = VecDeque::from([m.start]);
    seen[m.start] = true;
    while let Some(s) = queue.pop_front() {
        if m.is_goal(s) {
            continue;
        }
        let Some(&a) = policy.get(&s) else { continue };
        out.insert(s, a);
        for &(t, _) in table.outcomes(s, a).unwrap_or(&[]) {
            if !seen[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    out
}

fn is_proper(m: &Mdp, policy: &BTreeMap<StateId, ActionId>) -> bool {
    let plan = Plan::new("", 0.5, policy.clone());
    m.induce_chain(&plan).is_ok_and(|chain| chain.expected_cost().is_ok())
}

fn progress_policy(m: &Mdp, table: &ActionTable, tied: &[Vec<ActionId>]) -> BTreeMap<StateId, ActionId> {
    let n = m.states.len();
    let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for s in 0..n {
        for &a in &tied[s] {
            for &(t, _) in table.outcomes(s, a).unwrap() {
                preds[t].push(s);
            }
        }
    }
    let mut dist = vec![usize::MAX; n];
    let mut queue: VecDeque<StateId> = m.goals.iter().copied().collect();
    for &g in &queue {
        dist[g] = 0;
    }
    while let Some(t) = queue.pop_front() {
        for &s in &preds[t] {
            if dist[s] == usize::MAX {
                dist[s] = dist[t] + 1;
                queue.push_back(s);
            }
        }
    }
    (0..n)
        .filter(|&s| !tied[s].is_empty())
        .map(|s| {
            let a = tied[s]
                .iter()
                .copied()
                .find(|&a| table.outcomes(s, a).unwrap().iter().any(|&(t, _)| dist[t] < dist[s]))
                .unwrap_or(tied[s][0]);
            (s, a)
        })
        .collect()
}

/// Most-probable execution trace of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linearization {
    /// Action labels along the trace.
    pub actions: Vec<String>,
    /// Trace length in high-level steps.
    pub steps: usize,
    /// Inspection targets in visiting order, taken from `inspect <target>` actions.
    pub schema: Vec<String>,
}

/// Follows the most probable successor from the start state (ties by lowest
/// state id) until a goal is entered. A successor already on the trace is
/// skipped in favor of the next most probable one; if every successor was
/// visited, the one closest to a goal is taken.
pub fn linearize(m: &Mdp, plan: &Plan) -> Result<Linearization, PlanError> {
    let chain = m.induce_chain(plan).map_err(PlanError::ImproperPolicy)?;
    chain.expected_cost().map_err(PlanError::ImproperPolicy)?;

    let n = chain.len();
    let mut dist = vec![usize::MAX; n];
    let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for (s, row) in chain.rows.iter().enumerate() {
        for &(t, _) in row {
            preds[t].push(s);
        }
    }
    let mut queue: VecDeque<StateId> = chain.goals.iter().copied().collect();
    for &g in &queue {
        dist[g] = 0;
    }
    while let Some(t) = queue.pop_front() {
        for &s in &preds[t] {
            if dist[s] == usize::MAX {
                dist[s] = dist[t] + 1;
                queue.push_back(s);
            }
        }
    }

    let mut actions = Vec::new();
    let mut visited = vec![false; n];
    let mut state = chain.start;
    while !chain.is_goal(state) {
        visited[state] = true;
        let a = plan.policy[&state];
        actions.push(m.action_label(a).to_string());
        let mut succ: Vec<(StateId, f64)> = chain.rows[state].clone();
        succ.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        state = match succ.iter().find(|(t, _)| !visited[*t]) {
            Some(&(t, _)) => t,
            None => succ.iter().min_by_key(|(t, _)| (dist[*t], *t)).map(|&(t, _)| t).unwrap(),
        };
        if actions.len() > 4 * n {
            break;
        }
    }
    let schema = actions
        .iter()
        .filter_map(|a| a.strip_prefix("inspect ").map(str::to_string))
        .collect();
    Ok(Linearization { steps: actions.len(), actions, schema })
}

/// One distinct candidate plan and the gamma samples that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub plan: Plan,
    /// Producing gammas in draw order.
    pub gammas: Vec<f64>,
    /// Wall-clock time of the solve that first produced this plan.
    pub planning_time_s: f64,
    pub steps: usize,
    pub schema: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
    pub samples: Vec<f64>,
    pub failures: Vec<(f64, PlanError)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaInterval {
    pub low: f64,
    pub high: f64,
}

impl Default for GammaInterval {
    fn default() -> Self {
        GammaInterval { low: 0.4, high: 1.0 }
    }
}

/// Draws `n` risk factors uniformly from `[low, high)`, solves the model once
/// per draw and merges plans that are identical as policies. Candidates are
/// ordered by their largest producing gamma, descending, and named `P1`,
/// `P2`, ... in that order, so `P1` is the plan closest to risk neutrality.
pub fn generate_candidates<R: Rng + ?Sized>(
    m: &Mdp,
    n: usize,
    interval: GammaInterval,
    rng: &mut R,
) -> Result<CandidateSet, PlanError> {
    if n == 0 {
        return Err(PlanError::NoSamples);
    }
    if !(interval.low > 0.0 && interval.low < interval.high && interval.high <= 1.0) {
        return Err(PlanError::BadInterval(interval.low, interval.high));
    }
    let samples: Vec<f64> = (0..n)
        .map(|_| {
            let g = rng.random_range(interval.low..interval.high);
            if g >= 1.0 { f64::from_bits(1.0f64.to_bits() - 1) } else { g }
        })
        .collect();
    let solved: Vec<(f64, Result<Plan, PlanError>, f64)> = samples
        .par_iter()
        .map(|&g| {
            let t0 = Instant::now();
            let r = solve(m, g).map(|(_, p)| p);
            (g, r, t0.elapsed().as_secs_f64())
        })
        .collect();

    let mut merged: BTreeMap<BTreeMap<StateId, ActionId>, Candidate> = BTreeMap::new();
    let mut failures = Vec::new();
    for (g, result, secs) in solved {
        match result {
            Ok(plan) => {
                merged
                    .entry(plan.policy.clone())
                    .and_modify(|c| c.gammas.push(g))
                    .or_insert_with(|| Candidate {
                        plan,
                        gammas: vec![g],
                        planning_time_s: secs,
                        steps: 0,
                        schema: Vec::new(),
                    });
            }
            Err(e) => failures.push((g, e)),
        }
    }
    if merged.is_empty() {
        let first = failures.first().map(|(_, e)| e.clone()).unwrap_or(PlanError::NoSamples);
        return Err(PlanError::NoCandidates(Box::new(first)));
    }
    let mut candidates: Vec<Candidate> = merged.into_values().collect();
    let top = |c: &Candidate| c.gammas.iter().copied().fold(f64::MIN, f64::max);
    candidates.sort_by(|a, b| top(b).total_cmp(&top(a)));
    for (i, c) in candidates.iter_mut().enumerate() {
        c.plan.id = format!("P{}", i + 1);
        c.plan.gamma = top(c);
        let lin = linearize(m, &c.plan)?;
        c.plan.linearization = lin.actions;
        c.steps = lin.steps;
        c.schema = lin.schema;
    }
    Ok(CandidateSet { candidates, samples, failures })
}
