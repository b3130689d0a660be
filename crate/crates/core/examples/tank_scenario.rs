// Parse the bundled tank scenario, ground it into an MDP and list the
// candidate plans with their high-level traces.

use riskplan::pipeline::plan_candidates;
use riskplan::planner::GammaInterval;
use riskplan::scenario::{parse_scenario, read_plan_file, write_plan_file};

pub const TANKS: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/tanks.scn"));

#[derive(Debug)]
pub struct Overview {
    pub waypoints: usize,
    pub critical: usize,
    pub targets: usize,
    pub states: usize,
    /// (plan id, steps, action labels).
    pub plans: Vec<(String, usize, Vec<String>)>,
}

pub fn run_example() -> Result<Overview, Box<dyn std::error::Error>> {
    let s = parse_scenario(TANKS).map_err(|errs| format!("{} parse errors", errs.len()))?;
    let planned = plan_candidates(&s, 20, GammaInterval::default(), 7, "example", false)?;
    let mut plans = Vec::new();
    for pf in &planned.files {
        // every plan file survives a write/read cycle unchanged
        let back = read_plan_file(&write_plan_file(pf)?)?;
        assert_eq!(&back, pf);
        plans.push((pf.plan_id.clone(), pf.high_level_length, pf.actions.clone()));
    }
    Ok(Overview {
        waypoints: s.waypoints.len(),
        critical: s.waypoints.iter().filter(|w| w.critical).count(),
        targets: s.mission.inspect.len(),
        states: planned.grounding.mdp.states.len(),
        plans,
    })
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let o = run_example()?;
    println!(
        "{} waypoints ({} critical), {} targets, {} MDP states",
        o.waypoints, o.critical, o.targets, o.states
    );
    for (id, steps, actions) in &o.plans {
        println!("{id} ({steps} steps): {}", actions.join(", "));
    }
    Ok(())
}
