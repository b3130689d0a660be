// Planning cost on synthetic corridors with growing depth and number of
// risky shortcuts.

use riskplan::scaling::{run_scaling, scaling_csv, ScalingConfig, ScalingRow};

pub fn run_example() -> Result<Vec<ScalingRow>, Box<dyn std::error::Error>> {
    let cfg = ScalingConfig {
        depths: vec![3, 4, 5, 6, 30, 90],
        criticals: vec![3, 4, 5, 6, 10, 35],
        seed: Some(1),
        ..Default::default()
    };
    Ok(run_scaling(&cfg)?)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    print!("{}", scaling_csv(&run_example()?, "-", 1));
    Ok(())
}
