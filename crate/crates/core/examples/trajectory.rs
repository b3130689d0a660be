// Refine high-level routes into timed trajectories: a bare 10 m segment,
// the same segment inside a slow zone, and every candidate of the tank
// scenario with its helical inspections.

use riskplan::pipeline::{plan_candidates, refine_plan_file};
use riskplan::planner::GammaInterval;
use riskplan::scenario::{parse_scenario, RouteStep};
use riskplan::{refine, RefineConfig};

const TANKS: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/tanks.scn"));

#[derive(Debug)]
pub struct Refined {
    pub open_water_s: f64,
    pub slow_zone_s: f64,
    /// (plan id, length m, nominal duration s, samples).
    pub tank_plans: Vec<(String, f64, f64, usize)>,
}

fn segment(critical: bool) -> Result<f64, Box<dyn std::error::Error>> {
    let text = format!(
        "WAYPOINT a pos=0,0,0\nWAYPOINT m pos=5,0,0{}\nWAYPOINT b pos=10,0,0\nEDGE a b\nMISSION start=a final=b\nLIMITS critical_radius=20\n",
        if critical { " critical" } else { "" }
    );
    let s = parse_scenario(&text).map_err(|e| format!("{e:?}"))?;
    let route = [RouteStep::Goto { from: "a".into(), to: "b".into() }];
    Ok(refine(&s, "seg", &route, &RefineConfig::default())?.duration_s)
}

pub fn run_example() -> Result<Refined, Box<dyn std::error::Error>> {
    let s = parse_scenario(TANKS).map_err(|e| format!("{} parse errors", e.len()))?;
    let planned = plan_candidates(&s, 20, GammaInterval::default(), 7, "example", false)?;
    let mut tank_plans = Vec::new();
    for pf in &planned.files {
        let t = refine_plan_file(&s, &planned.grounding, pf, &RefineConfig::default())?;
        tank_plans.push((pf.plan_id.clone(), t.length_m, t.duration_s, t.samples.len()));
    }
    Ok(Refined { open_water_s: segment(false)?, slow_zone_s: segment(true)?, tank_plans })
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let r = run_example()?;
    println!("10 m open water: {:.2} s", r.open_water_s);
    println!("10 m slow zone:  {:.2} s", r.slow_zone_s);
    for (id, len, dur, n) in &r.tank_plans {
        println!("{id}: {len:.2} m, {dur:.1} s, {n} samples");
    }
    Ok(())
}
