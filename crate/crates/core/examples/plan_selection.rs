// Pick a plan from a table of per-plan metrics: drop plans whose mean is
// more than 5% above the best, then take the smallest variance.

use riskplan::assess::Elimination;
use riskplan::{compute_metrics, select, MetricConfig, RiskMetrics, Selection};
use serde::Deserialize;

const TABLE: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/metrics_table.json"));

#[derive(Deserialize)]
struct Row {
    plan_id: String,
    mean: f64,
    variance: f64,
    entropy_bits: f64,
}

pub fn metrics_table() -> Result<Vec<(String, RiskMetrics)>, Box<dyn std::error::Error>> {
    let rows: Vec<Row> = serde_json::from_str(TABLE)?;
    // only mean, variance and entropy take part in selection
    let template = compute_metrics(&[0.0, 1.0], &MetricConfig::default())?;
    Ok(rows
        .into_iter()
        .map(|r| (r.plan_id, RiskMetrics { mean: r.mean, variance: r.variance, entropy_bits: r.entropy_bits, ..template.clone() }))
        .collect())
}

pub fn run_example() -> Result<Selection, Box<dyn std::error::Error>> {
    Ok(select(&metrics_table()?, 0.05))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = run_example()?;
    println!("selected {} (mean threshold {:.2} s)", s.selected, s.mean_threshold);
    for (id, why) in &s.eliminated {
        match why {
            Elimination::MeanFilter { mean, .. } => println!("{id}: mean {mean} too high"),
            Elimination::Variance { variance, best } => println!("{id}: variance {variance} > {best}"),
            other => println!("{id}: {other:?}"),
        }
    }
    Ok(())
}
