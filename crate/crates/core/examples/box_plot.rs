// Box plot of execution-time samples for a handful of plans.

use riskplan::plot::{box_plot, PlotOutput};

pub fn run_example() -> Result<PlotOutput, Box<dyn std::error::Error>> {
    let plans = vec![
        ("P1".to_string(), vec![88.7, 91.0, 150.0, 152.3, 92.9, 149.7, 90.1, 90.8, 93.6, 92.6]),
        ("P2".to_string(), vec![99.5, 98.2, 99.8, 100.3, 97.5, 97.4, 97.2, 100.6, 97.5, 98.8]),
        ("P3".to_string(), vec![104.0]),
    ];
    Ok(box_plot(&plans, &["example samples".to_string()])?)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = run_example()?;
    let path = std::env::temp_dir().join("riskplan-example-boxplot.svg");
    std::fs::write(&path, &out.svg)?;
    println!("wrote {}", path.display());
    for id in &out.skipped {
        println!("skipped {id}: fewer than two samples");
    }
    Ok(())
}
