// A sure 10-step route against a gamble that takes 2 steps nine times out
// of ten and 30 otherwise. Lowering gamma makes the planner more
// risk-averse; this sweeps gamma and reports where the choice flips.

use riskplan::mdp::{Action, Mdp, State, Transition};
use riskplan::planner::{generate_candidates, solve, GammaInterval};
use riskplan::seed::{stream, Part};

pub fn gamble() -> Mdp {
    let costs = [0.0, 10.0, 2.0, 30.0, 0.0];
    let states = costs
        .iter()
        .enumerate()
        .map(|(i, &cost)| State { id: i, label: format!("s{i}"), is_goal: i == 4, cost })
        .collect();
    let t = |source, action, target, probability| Transition { source, action, target, probability };
    Mdp {
        states,
        actions: vec![
            Action { id: 0, label: "sure".into() },
            Action { id: 1, label: "gamble".into() },
            Action { id: 2, label: "finish".into() },
        ],
        transitions: vec![
            t(0, 0, 1, 1.0),
            t(0, 1, 2, 0.9),
            t(0, 1, 3, 0.1),
            t(1, 2, 4, 1.0),
            t(2, 2, 4, 1.0),
            t(3, 2, 4, 1.0),
        ],
        start: 0,
        goals: [4].into_iter().collect(),
    }
}

#[derive(Debug)]
pub struct Sweep {
    /// (gamma, chosen action label) on a 0.001 grid over [0.5, 0.999].
    pub choices: Vec<(f64, String)>,
    /// First grid gamma at which the gamble is chosen.
    pub switch: Option<f64>,
    pub candidates: Vec<(String, Vec<f64>)>,
}

pub fn run_example() -> Result<Sweep, Box<dyn std::error::Error>> {
    let m = gamble();
    let mut choices = Vec::new();
    for k in 500..=999 {
        let gamma = k as f64 / 1000.0;
        let (_, plan) = solve(&m, gamma)?;
        choices.push((gamma, m.action_label(plan.policy[&0]).to_string()));
    }
    let switch = choices.iter().find(|(_, a)| a == "gamble").map(|&(g, _)| g);

    let mut rng = stream(1, &[Part::Label("gamma")]);
    let set = generate_candidates(&m, 50, GammaInterval::default(), &mut rng)?;
    let candidates = set.candidates.iter().map(|c| (c.plan.id.clone(), c.gammas.clone())).collect();
    Ok(Sweep { choices, switch, candidates })
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sweep = run_example()?;
    match sweep.switch {
        Some(g) => println!("gamble preferred from gamma = {g:.3}"),
        None => println!("gamble never preferred"),
    }
    for (id, gammas) in &sweep.candidates {
        let lo = gammas.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = gammas.iter().copied().fold(0.0, f64::max);
        println!("{id}: {} samples in [{lo:.3}, {hi:.3}]", gammas.len());
    }
    Ok(())
}
