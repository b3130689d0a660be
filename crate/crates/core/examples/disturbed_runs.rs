// Execute the tank candidates under currents and a drifting small tank,
// and compare them with undisturbed runs.

use riskplan::pipeline::{plan_candidates, refine_plan_file};
use riskplan::planner::GammaInterval;
use riskplan::scenario::parse_scenario;
use riskplan::{run_batch, run_episode, DisturbanceConfig, RefineConfig};

const TANKS: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/tanks.scn"));

#[derive(Debug)]
pub struct PlanRuns {
    pub plan_id: String,
    pub nominal_s: f64,
    pub calm_s: f64,
    pub times_s: Vec<f64>,
    pub incidents: usize,
}

pub fn run_example() -> Result<Vec<PlanRuns>, Box<dyn std::error::Error>> {
    let s = parse_scenario(TANKS).map_err(|e| format!("{} parse errors", e.len()))?;
    let planned = plan_candidates(&s, 20, GammaInterval::default(), 7, "example", false)?;
    let mut out = Vec::new();
    for pf in &planned.files {
        let t = refine_plan_file(&s, &planned.grounding, pf, &RefineConfig::default())?;
        let calm = run_episode(&t, &s, &DisturbanceConfig::calm(), 7, 0)?;
        let runs = run_batch(&t, &s, &DisturbanceConfig::default(), 20, 7)?;
        out.push(PlanRuns {
            plan_id: pf.plan_id.clone(),
            nominal_s: t.duration_s,
            calm_s: calm.execution_time_s,
            times_s: runs.iter().map(|r| r.execution_time_s).collect(),
            incidents: runs.iter().map(|r| r.incidents.len()).sum(),
        });
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    for p in run_example()? {
        let mean = p.times_s.iter().sum::<f64>() / p.times_s.len() as f64;
        println!(
            "{}: nominal {:.1} s, calm {:.1} s, disturbed mean {:.1} s, {} incidents in {} runs",
            p.plan_id,
            p.nominal_s,
            p.calm_s,
            mean,
            p.incidents,
            p.times_s.len()
        );
    }
    Ok(())
}
