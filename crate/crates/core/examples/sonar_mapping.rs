// Survey the tank scenario with a simulated multibeam sonar, then derive
// critical waypoints and per-edge collision risks from the occupancy grid.

use riskplan::occupancy::{extract_for_scenario, map_scenario, ExtractConfig, MappingConfig, SensorModel, VoxelGrid};
use riskplan::scenario::parse_scenario;
use riskplan::seed::{stream, Part};

const TANKS: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/tanks.scn"));

#[derive(Debug)]
pub struct Survey {
    pub two_hits: f64,
    pub occupied_voxels: usize,
    pub critical: Vec<String>,
    /// (from, to, p) for edges with nonzero risk.
    pub risky_edges: Vec<(String, String, f64)>,
}

pub fn run_example() -> Result<Survey, Box<dyn std::error::Error>> {
    let model = SensorModel::default();
    let mut g = VoxelGrid::new([0.0; 3], 1.0, [1, 1, 1])?;
    g.hit([0, 0, 0], &model);
    g.hit([0, 0, 0], &model);
    let two_hits = g.occupancy([0, 0, 0]);

    let s = parse_scenario(TANKS).map_err(|e| format!("{} parse errors", e.len()))?;
    let grid = map_scenario(&s, &MappingConfig::default(), &mut stream(3, &[Part::Label("map")]))?;
    let occupied_voxels = grid.cells.iter().filter(|&&l| l > 0.0).count();
    let fragment = extract_for_scenario(&grid, &s, &ExtractConfig::default())?;
    Ok(Survey {
        two_hits,
        occupied_voxels,
        critical: fragment.critical.iter().filter(|(_, c)| *c).map(|(id, _)| id.clone()).collect(),
        risky_edges: fragment
            .edges
            .iter()
            .filter(|e| e.collision_probability > 0.0)
            .map(|e| (e.from.clone(), e.to.clone(), e.collision_probability))
            .collect(),
    })
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = run_example()?;
    println!("two hits at p_hit = 0.7: occupancy {:.4}", s.two_hits);
    println!("{} occupied voxels", s.occupied_voxels);
    println!("critical: {}", s.critical.join(", "));
    for (a, b, p) in &s.risky_edges {
        println!("{a} -- {b}: p = {p:.3}");
    }
    Ok(())
}
