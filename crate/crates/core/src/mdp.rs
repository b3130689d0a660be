//! Finite goal-directed Markov decision processes.
//!
//! A model is a set of states with nonnegative per-state costs, a set of
//! actions, a probabilistic transition relation, one start state and a set of
//! goal states. Fixing a [`Plan`] resolves the action choice and yields a
//! [`MarkovChain`]; the cumulative cost accumulated before the first goal
//! entry is a discrete random variable whose exact law is computed by
//! [`MarkovChain::reward_distribution`]. That routine is the reference every
//! Monte-Carlo estimate in this crate is checked against.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type StateId = usize;
pub type ActionId = usize;

/// Outgoing probabilities of one (state, action) pair must sum to one within this.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// Accumulated costs closer than this are treated as the same support point.
pub const COST_GROUPING_TOLERANCE: f64 = 1e-9;

const EXPECTED_COST_TOLERANCE: f64 = 1e-10;
const MAX_SWEEPS: usize = 1_000_000;
const MAX_ENUMERATION_STEPS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub id: StateId,
    pub label: String,
    pub is_goal: bool,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub id: ActionId,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub source: StateId,
    pub action: ActionId,
    pub target: StateId,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mdp {
    pub states: Vec<State>,
    pub actions: Vec<Action>,
    pub transitions: Vec<Transition>,
    pub start: StateId,
    pub goals: BTreeSet<StateId>,
}

/// One broken model invariant, as reported by [`Mdp::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    StateIdMismatch { position: usize, id: StateId },
    ActionIdMismatch { position: usize, id: ActionId },
    NegativeCost { state: StateId, cost: f64 },
    UnknownStart { start: StateId },
    UnknownGoal { goal: StateId },
    GoalFlagMismatch { state: StateId },
    DanglingTransition { index: usize },
    ProbabilityOutOfRange { source: StateId, action: ActionId, target: StateId, probability: f64 },
    Unnormalized { state: StateId, action: ActionId, total: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::StateIdMismatch { position, id } => {
                write!(f, "state at position {position} carries id {id}")
            }
            Violation::ActionIdMismatch { position, id } => {
                write!(f, "action at position {position} carries id {id}")
            }
            Violation::NegativeCost { state, cost } => {
                write!(f, "state {state} has negative cost {cost}")
            }
            Violation::UnknownStart { start } => write!(f, "start state {start} does not exist"),
            Violation::UnknownGoal { goal } => write!(f, "goal state {goal} does not exist"),
            Violation::GoalFlagMismatch { state } => {
                write!(f, "state {state}: is_goal flag disagrees with the goal set")
            }
            Violation::DanglingTransition { index } => {
                write!(f, "transition #{index} references an unknown state or action")
            }
            Violation::ProbabilityOutOfRange { source, action, target, probability } => write!(
                f,
                "transition ({source}, {action}, {target}) has probability {probability} outside [0, 1]"
            ),
            Violation::Unnormalized { state, action, total } => write!(
                f,
                "outcomes of (state {state}, action {action}) sum to {total}, not 1"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MdpError {
    #[error("reachable non-goal state {0} has no policy entry")]
    MissingPolicyEntry(StateId),
    #[error("policy maps state {state} to action {action}, which has no transitions there")]
    UnavailableAction { state: StateId, action: ActionId },
    #[error("goal is reached with probability {reach_probability:.12} < 1")]
    ImproperPolicy { reach_probability: f64 },
    #[error("enumeration stalled after {steps} steps with live mass {live_mass:e} on states {witness:?}")]
    NonConvergence { steps: usize, live_mass: f64, witness: Vec<StateId> },
}

/// Outcome lists per (state, action), grouped and sorted by action id.
#[derive(Debug, Clone)]
pub struct ActionTable {
    rows: Vec<Vec<(ActionId, Vec<(StateId, f64)>)>>,
}

impl ActionTable {
    pub fn available(&self, state: StateId) -> &[(ActionId, Vec<(StateId, f64)>)] {
        &self.rows[state]
    }

    pub fn outcomes(&self, state: StateId, action: ActionId) -> Option<&[(StateId, f64)]> {
        self.rows[state]
            .binary_search_by_key(&action, |(a, _)| *a)
            .ok()
            .map(|i| self.rows[state][i].1.as_slice())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl Mdp {
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.states.len();
        for (position, s) in self.states.iter().enumerate() {
            if s.id != position {
                out.push(Violation::StateIdMismatch { position, id: s.id });
            }
            if !(s.cost >= 0.0) {
                out.push(Violation::NegativeCost { state: s.id, cost: s.cost });
            }
            if s.is_goal != self.goals.contains(&position) {
                out.push(Violation::GoalFlagMismatch { state: position });
            }
        }
        for (position, a) in self.actions.iter().enumerate() {
            if a.id != position {
                out.push(Violation::ActionIdMismatch { position, id: a.id });
            }
        }
        if self.start >= n {
            out.push(Violation::UnknownStart { start: self.start });
        }
        for &g in &self.goals {
            if g >= n {
                out.push(Violation::UnknownGoal { goal: g });
            }
        }
        let mut totals: BTreeMap<(StateId, ActionId), f64> = BTreeMap::new();
        for (index, t) in self.transitions.iter().enumerate() {
            if t.source >= n || t.target >= n || t.action >= self.actions.len() {
                out.push(Violation::DanglingTransition { index });
                continue;
            }
            if !(0.0..=1.0).contains(&t.probability) {
                out.push(Violation::ProbabilityOutOfRange {
                    source: t.source,
                    action: t.action,
                    target: t.target,
                    probability: t.probability,
                });
            }
            *totals.entry((t.source, t.action)).or_default() += t.probability;
        }
        for ((state, action), total) in totals {
            if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
                out.push(Violation::Unnormalized { state, action, total });
            }
        }
        out
    }

    pub fn is_goal(&self, s: StateId) -> bool {
        self.goals.contains(&s)
    }

    /// Groups transitions by source and action. Duplicate (s, a, s') entries
    /// are merged and zero-probability outcomes dropped.
    pub fn action_table(&self) -> ActionTable {
        let mut grouped: Vec<BTreeMap<ActionId, BTreeMap<StateId, f64>>> =
            vec![BTreeMap::new(); self.states.len()];
        for t in &self.transitions {
            if t.source >= self.states.len() {
                continue;
            }
            let slot = grouped[t.source].entry(t.action).or_default();
            *slot.entry(t.target).or_default() += t.probability;
        }
        let rows = grouped
            .into_iter()
            .map(|by_action| {
                by_action
                    .into_iter()
                    .map(|(a, targets)| {
                        let outs: Vec<_> = targets.into_iter().filter(|&(_, p)| p > 0.0).collect();
                        (a, outs)
                    })
                    .filter(|(_, outs)| !outs.is_empty())
                    .collect()
            })
            .collect();
        ActionTable { rows }
    }

    pub fn costs(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.cost).collect()
    }

    pub fn action_label(&self, a: ActionId) -> &str {
        &self.actions[a].label
    }

    /// Resolves the action choice with `plan`. Goal states and states without
    /// any available action become absorbing.
    pub fn induce_chain(&self, plan: &Plan) -> Result<MarkovChain, MdpError> {
        let table = self.action_table();
        let n = self.states.len();
        let mut rows: Vec<Vec<(StateId, f64)>> = vec![Vec::new(); n];
        for (s, row) in rows.iter_mut().enumerate() {
            if self.is_goal(s) || table.available(s).is_empty() {
                *row = vec![(s, 1.0)];
                continue;
            }
            match plan.policy.get(&s) {
                Some(&a) => match table.outcomes(s, a) {
                    Some(outs) => *row = outs.to_vec(),
                    None => return Err(MdpError::UnavailableAction { state: s, action: a }),
                },
                None => *row = vec![(s, 1.0)],
            }
        }
        // Every reachable decision state must be mapped.
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([self.start]);
        seen[self.start] = true;
        while let Some(s) = queue.pop_front() {
            if !self.is_goal(s) && !table.available(s).is_empty() && !plan.policy.contains_key(&s) {
                return Err(MdpError::MissingPolicyEntry(s));
            }
            for &(t, _) in &rows[s] {
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        Ok(MarkovChain {
            start: self.start,
            costs: self.costs(),
            rows,
            goals: self.goals.clone(),
        })
    }
}

/// A (partial) policy together with the metadata the pipeline tracks for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub id: String,
    pub gamma: f64,
    pub policy: BTreeMap<StateId, ActionId>,
    pub linearization: Vec<String>,
}

impl Plan {
    pub fn new(id: impl Into<String>, gamma: f64, policy: BTreeMap<StateId, ActionId>) -> Self {
        Plan { id: id.into(), gamma, policy, linearization: Vec::new() }
    }
}

/// Markov chain with per-state costs. Rows hold (target, probability) with
/// strictly positive probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    pub start: StateId,
    pub costs: Vec<f64>,
    pub rows: Vec<Vec<(StateId, f64)>>,
    pub goals: BTreeSet<StateId>,
}

/// Law of the cumulative cost at first goal entry. `support` is sorted by
/// cost; `residual` is the mass that had not been absorbed when enumeration
/// stopped, including mass that can never reach a goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardDistribution {
    pub support: Vec<(f64, f64)>,
    pub residual: f64,
}

impl RewardDistribution {
    pub fn total_mass(&self) -> f64 {
        self.support.iter().map(|&(_, p)| p).sum()
    }

    pub fn probability_of(&self, cost: f64) -> f64 {
        self.support
            .iter()
            .filter(|&&(c, _)| (c - cost).abs() <= COST_GROUPING_TOLERANCE)
            .map(|&(_, p)| p)
            .sum()
    }

    /// Mean conditional on reaching a goal.
    pub fn mean(&self) -> f64 {
        let total = self.total_mass();
        self.support.iter().map(|&(c, p)| c * p).sum::<f64>() / total
    }

    pub fn variance(&self) -> f64 {
        let total = self.total_mass();
        let mean = self.mean();
        self.support.iter().map(|&(c, p)| p * (c - mean).powi(2)).sum::<f64>() / total
    }
}

impl MarkovChain {
    pub fn is_goal(&self, s: StateId) -> bool {
        self.goals.contains(&s)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// States from which some goal is reachable with positive probability.
    pub fn can_reach_goal(&self) -> Vec<bool> {
        let n = self.rows.len();
        let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); n];
        for (s, row) in self.rows.iter().enumerate() {
            for &(t, p) in row {
                if p > 0.0 {
                    preds[t].push(s);
                }
            }
        }
        let mut live = vec![false; n];
        let mut queue: VecDeque<StateId> = self.goals.iter().copied().filter(|&g| g < n).collect();
        for &g in &queue {
            live[g] = true;
        }
        while let Some(t) = queue.pop_front() {
            for &s in &preds[t] {
                if !live[s] {
                    live[s] = true;
                    queue.push_back(s);
                }
            }
        }
        live
    }

    fn reachable_from_start(&self) -> Vec<bool> {
        let mut seen = vec![false; self.rows.len()];
        let mut queue = VecDeque::from([self.start]);
        seen[self.start] = true;
        while let Some(s) = queue.pop_front() {
            if self.is_goal(s) {
                continue;
            }
            for &(t, p) in &self.rows[s] {
                if p > 0.0 && !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        seen
    }

    /// Goal-first breadth order over predecessors; Gauss-Seidel sweeps in
    /// this order propagate values along chains in a single pass.
    fn sweep_order(&self) -> Vec<StateId> {
        let n = self.rows.len();
        let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); n];
        for (s, row) in self.rows.iter().enumerate() {
            for &(t, _) in row {
                preds[t].push(s);
            }
        }
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue: VecDeque<StateId> = self.goals.iter().copied().collect();
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
        order.extend((0..n).filter(|&s| !seen[s]));
        order
    }

    /// Probability of eventually entering a goal from the start state.
    pub fn goal_probability(&self) -> f64 {
        let n = self.rows.len();
        let mut reach: Vec<f64> = (0..n).map(|s| if self.is_goal(s) { 1.0 } else { 0.0 }).collect();
        let order = self.sweep_order();
        for _ in 0..MAX_SWEEPS {
            let mut delta: f64 = 0.0;
            for &s in &order {
                if self.is_goal(s) {
                    continue;
                }
                let v: f64 = self.rows[s].iter().map(|&(t, p)| p * reach[t]).sum();
                delta = delta.max((v - reach[s]).abs());
                reach[s] = v;
            }
            if delta <= EXPECTED_COST_TOLERANCE * 1e-2 {
                break;
            }
        }
        reach[self.start]
    }

    /// Exact law of the cumulative cost at first goal entry.
    ///
    /// Dynamic programming over a (state, accumulated cost) frontier, one
    /// transition per step. The cost of the entered goal state is not
    /// counted. Mass entering a state that cannot reach any goal is moved to
    /// the residual immediately; enumeration stops once the remaining live
    /// mass drops below `epsilon`.
    pub fn reward_distribution(&self, epsilon: f64) -> Result<RewardDistribution, MdpError> {
        assert!(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
        let live = self.can_reach_goal();
        let quantize = |c: f64| (c / COST_GROUPING_TOLERANCE).round() as i64;

        let mut absorbed: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
        let mut lost = 0.0;
        let mut frontier: BTreeMap<(StateId, i64), (f64, f64)> = BTreeMap::new();
        if self.is_goal(self.start) {
            absorbed.insert(0, (0.0, 1.0));
        } else if live[self.start] {
            frontier.insert((self.start, 0), (0.0, 1.0));
        } else {
            lost = 1.0;
        }

        let window = self.rows.len().max(1) + 1;
        let mut window_mass = 1.0;
        let mut steps = 0;
        loop {
            let live_mass: f64 = frontier.values().map(|&(_, m)| m).sum();
            if live_mass < epsilon {
                let support = absorbed.into_values().collect();
                return Ok(RewardDistribution { support, residual: lost + live_mass });
            }
            if steps > 0 && steps % window == 0 {
                if live_mass >= window_mass || steps >= MAX_ENUMERATION_STEPS {
                    return Err(self.stall(steps, live_mass, &frontier));
                }
                window_mass = live_mass;
            }
            let mut next: BTreeMap<(StateId, i64), (f64, f64)> = BTreeMap::new();
            for (&(s, _), &(cost, mass)) in &frontier {
                let accumulated = cost + self.costs[s];
                let key = quantize(accumulated);
                for &(t, p) in &self.rows[s] {
                    let m = mass * p;
                    if m == 0.0 {
                        continue;
                    }
                    if self.is_goal(t) {
                        absorbed.entry(key).or_insert((accumulated, 0.0)).1 += m;
                    } else if live[t] {
                        next.entry((t, key)).or_insert((accumulated, 0.0)).1 += m;
                    } else {
                        lost += m;
                    }
                }
            }
            frontier = next;
            steps += 1;
        }
    }

    fn stall(&self, steps: usize, live_mass: f64, frontier: &BTreeMap<(StateId, i64), (f64, f64)>) -> MdpError {
        let mut by_state: HashMap<StateId, f64> = HashMap::new();
        for (&(s, _), &(_, m)) in frontier {
            *by_state.entry(s).or_default() += m;
        }
        let mut witness: Vec<_> = by_state.into_iter().collect();
        witness.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        MdpError::NonConvergence {
            steps,
            live_mass,
            witness: witness.into_iter().map(|(s, _)| s).collect(),
        }
    }

    /// Expected cumulative cost at first goal entry, by Gauss-Seidel
    /// iteration of `E(s) = R(s) + sum P(s, s') E(s')` with `E(goal) = 0`.
    pub fn expected_cost(&self) -> Result<f64, MdpError> {
        let live = self.can_reach_goal();
        let reachable = self.reachable_from_start();
        if reachable.iter().zip(&live).any(|(&r, &l)| r && !l) {
            return Err(MdpError::ImproperPolicy { reach_probability: self.goal_probability() });
        }
        let n = self.rows.len();
        let order: Vec<StateId> =
            self.sweep_order().into_iter().filter(|&s| !self.is_goal(s) && live[s]).collect();
        let mut value = vec![0.0; n];
        for sweep in 0..MAX_SWEEPS {
            let mut delta: f64 = 0.0;
            for &s in &order {
                let v = self.costs[s]
                    + self.rows[s].iter().map(|&(t, p)| p * value[t]).sum::<f64>();
                delta = delta.max((v - value[s]).abs() / v.abs().max(1.0));
                value[s] = v;
            }
            if delta <= EXPECTED_COST_TOLERANCE {
                return Ok(value[self.start]);
            }
            if sweep + 1 == MAX_SWEEPS {
                break;
            }
        }
        Err(MdpError::NonConvergence { steps: MAX_SWEEPS, live_mass: f64::NAN, witness: vec![self.start] })
    }

    /// Simulates one history from the start state. Returns the cost
    /// accumulated before entering a goal and whether a goal was entered
    /// within `step_cap` transitions.
    pub fn sample_history<R: Rng + ?Sized>(&self, rng: &mut R, step_cap: usize) -> (f64, bool) {
        assert!(step_cap >= 1, "step cap must be at least 1");
        let mut state = self.start;
        let mut cost = 0.0;
        let mut steps = 0;
        loop {
            if self.is_goal(state) {
                return (cost, true);
            }
            if steps == step_cap {
                return (cost, false);
            }
            cost += self.costs[state];
            let row = &self.rows[state];
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut next = row.last().map(|&(t, _)| t).unwrap_or(state);
            for &(t, p) in row {
                acc += p;
                if u < acc {
                    next = t;
                    break;
                }
            }
            state = next;
            steps += 1;
        }
    }
}
