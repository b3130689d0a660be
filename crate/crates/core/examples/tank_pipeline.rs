// The whole chain on the bundled tank scenario: candidates, trajectories,
// disturbed runs, metrics and the selected plan. Artifacts go to a
// directory under the system temp dir.

use riskplan::pipeline::{load_config, run_pipeline, PipelineOutcome};

pub fn run_example() -> Result<PipelineOutcome, Box<dyn std::error::Error>> {
    let mut cfg = load_config(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/tanks.json").as_ref())?;
    cfg.output = std::env::temp_dir().join("riskplan-example-pipeline").to_string_lossy().into_owned();
    Ok(run_pipeline(&cfg)?)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let o = run_example()?;
    print!("{}", o.summary);
    if let Some(s) = &o.report.selection {
        println!("selected {}", s.selected);
    }
    println!("artifacts in {}", o.output.display());
    Ok(())
}
