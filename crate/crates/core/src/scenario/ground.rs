use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CollisionOutcome, Scenario};
use crate::mdp::{Action, ActionId, Mdp, Plan, State, StateId, Transition};

/// Largest number of mission targets accepted; the state space doubles per target.
pub const MAX_TARGETS: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroundError {
    #[error("inspection target `{0}` has no waypoint to inspect it from")]
    UngroundableGoal(String),
    #[error("unknown waypoint `{0}`")]
    UnknownWaypoint(String),
    #[error("{0} inspection targets exceed the supported maximum of {MAX_TARGETS}")]
    TooManyTargets(usize),
    #[error("plan has no action for state {0} on its nominal route")]
    MissingAction(StateId),
    #[error("nominal route of plan does not reach the goal")]
    RouteDoesNotTerminate,
}

/// The MDP built from a scenario, with the bookkeeping needed to map states
/// and actions back to waypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Grounding {
    pub mdp: Mdp,
    /// Waypoint ids in declaration order; index `w` in state encodings.
    pub waypoints: Vec<String>,
    /// Mission targets; bit `i` of the mask is set once target `i` is inspected.
    pub targets: Vec<String>,
    pub collided: StateId,
}

/// Decoded high-level action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Goto(usize),
    Inspect(usize),
    Recover,
}

impl Grounding {
    pub fn state(&self, waypoint: usize, mask: u32) -> StateId {
        (waypoint << self.targets.len()) | mask as usize
    }

    /// `(waypoint index, mask)` for a non-collided state.
    pub fn decode(&self, s: StateId) -> Option<(usize, u32)> {
        if s >= self.collided {
            return None;
        }
        let k = self.targets.len();
        Some((s >> k, (s & ((1 << k) - 1)) as u32))
    }

    pub fn decode_action(&self, a: ActionId) -> Move {
        let w = self.waypoints.len();
        if a < w {
            Move::Goto(a)
        } else if a < w + self.targets.len() {
            Move::Inspect(a - w)
        } else {
            Move::Recover
        }
    }
}

/// One step of the collision-free execution of a plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RouteStep {
    Goto { from: String, to: String },
    Inspect { waypoint: String, target: String },
}

/// States are (waypoint, inspection bitmask) pairs plus one collided state.
/// Every state costs 1, so a history's cost is its number of actions.
pub fn ground_to_mdp(s: &Scenario) -> Result<Grounding, GroundError> {
    let targets = s.mission.inspect.clone();
    let k = targets.len();
    if k > MAX_TARGETS {
        return Err(GroundError::TooManyTargets(k));
    }
    for t in &targets {
        if !s.waypoints.iter().any(|w| w.inspection_target.as_deref() == Some(t)) {
            return Err(GroundError::UngroundableGoal(t.clone()));
        }
    }
    let index = |id: &str| s.waypoint_index(id).ok_or_else(|| GroundError::UnknownWaypoint(id.to_string()));
    let start_w = index(&s.mission.start)?;
    let final_w = index(&s.mission.final_waypoint)?;
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); s.waypoints.len()];
    for e in &s.edges {
        let (a, b) = (index(&e.from)?, index(&e.to)?);
        adjacency[a].push((b, e.collision_probability));
        if !e.oneway {
            adjacency[b].push((a, e.collision_probability));
        }
    }
    for row in &mut adjacency {
        row.sort_by_key(|&(b, _)| b);
        row.dedup_by_key(|x| x.0);
    }

    let n_w = s.waypoints.len();
    let masks = 1usize << k;
    let full = (masks - 1) as u32;
    let collided = n_w * masks;
    let enc = |w: usize, mask: u32| (w << k) | mask as usize;

    let mut actions: Vec<Action> = s
        .waypoints
        .iter()
        .enumerate()
        .map(|(j, w)| Action { id: j, label: format!("goto {}", w.id) })
        .collect();
    for (i, t) in targets.iter().enumerate() {
        actions.push(Action { id: n_w + i, label: format!("inspect {t}") });
    }
    let recover = n_w + k;
    if s.mission.collision == CollisionOutcome::Restart {
        actions.push(Action { id: recover, label: "recover".into() });
    }

    let mut states = Vec::with_capacity(collided + 1);
    let mut transitions = Vec::new();
    let mut goals = BTreeSet::new();
    for (w, wp) in s.waypoints.iter().enumerate() {
        let local_target = wp
            .inspection_target
            .as_ref()
            .and_then(|t| targets.iter().position(|x| x == t));
        for mask in 0..masks as u32 {
            let id = enc(w, mask);
            let is_goal = w == final_w && mask == full;
            states.push(State { id, label: state_label(&wp.id, &targets, mask), is_goal, cost: 1.0 });
            if is_goal {
                goals.insert(id);
                continue;
            }
            if let Some(i) = local_target {
                if mask & (1 << i) == 0 {
                    transitions.push(Transition {
                        source: id,
                        action: n_w + i,
                        target: enc(w, mask | (1 << i)),
                        probability: 1.0,
                    });
                }
            }
            for &(b, p) in &adjacency[w] {
                transitions.push(Transition { source: id, action: b, target: enc(b, mask), probability: 1.0 - p });
                if p > 0.0 {
                    transitions.push(Transition { source: id, action: b, target: collided, probability: p });
                }
            }
        }
    }
    states.push(State { id: collided, label: "collided".into(), is_goal: false, cost: 1.0 });
    if s.mission.collision == CollisionOutcome::Restart {
        transitions.push(Transition { source: collided, action: recover, target: enc(start_w, 0), probability: 1.0 });
    }

    let mdp = Mdp { states, actions, transitions, start: enc(start_w, 0), goals };
    Ok(Grounding {
        mdp,
        waypoints: s.waypoints.iter().map(|w| w.id.clone()).collect(),
        targets,
        collided,
    })
}

fn state_label(waypoint: &str, targets: &[String], mask: u32) -> String {
    let done: Vec<&str> = targets
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, t)| t.as_str())
        .collect();
    format!("{waypoint}[{}]", done.join(","))
}

/// Follows the plan from the start along intended (collision-free) outcomes
/// until the goal is entered.
pub fn nominal_route(g: &Grounding, plan: &Plan) -> Result<Vec<RouteStep>, GroundError> {
    let mut steps = Vec::new();
    let mut state = g.mdp.start;
    let cap = g.mdp.states.len() + 1;
    while !g.mdp.is_goal(state) {
        if steps.len() > cap {
            return Err(GroundError::RouteDoesNotTerminate);
        }
        let Some((w, mask)) = g.decode(state) else {
            return Err(GroundError::RouteDoesNotTerminate);
        };
        let a = *plan.policy.get(&state).ok_or(GroundError::MissingAction(state))?;
        match g.decode_action(a) {
            Move::Goto(b) => {
                steps.push(RouteStep::Goto { from: g.waypoints[w].clone(), to: g.waypoints[b].clone() });
                state = g.state(b, mask);
            }
            Move::Inspect(i) => {
                steps.push(RouteStep::Inspect { waypoint: g.waypoints[w].clone(), target: g.targets[i].clone() });
                state = g.state(w, mask | (1 << i));
            }
            Move::Recover => return Err(GroundError::RouteDoesNotTerminate),
        }
    }
    Ok(steps)
}
