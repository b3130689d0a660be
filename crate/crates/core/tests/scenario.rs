use proptest::prelude::*;
use riskplan::planner::linearize;
use riskplan::scenario::{ground_to_mdp, nominal_route, parse_scenario, parse_scenario_bytes, RouteStep};
use riskplan::solve;

const TANKS: &str = include_str!("../fixtures/tanks.scn");
const THREE_POINT: &str = include_str!("../fixtures/three_point.scn");

const WORDS: &[&str] = &[
    "OBSTACLE", "WAYPOINT", "EDGE", "MISSION", "LIMITS", "start=a", "final=b", "inspect=t", "collision=restart",
    "critical", "perturb", "p=0.1", "p=2", "a", "b", "t", "0", "1.5", "-3", "nan", "\"x y\"", "\"", "#", "=", "\n",
];

proptest! {
    #[test]
    fn parser_never_panics_on_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..400)) {
        let _ = parse_scenario_bytes(&bytes);
    }

    #[test]
    fn parser_never_panics_on_token_soup(words in proptest::collection::vec(0..WORDS.len(), 0..60)) {
        let text: Vec<&str> = words.iter().map(|&i| WORDS[i]).collect();
        if let Err(errs) = parse_scenario(&text.join(" ")) {
            prop_assert!(!errs.is_empty());
        }
    }
}

#[test]
fn fixtures_round_trip_through_the_writer() {
    for text in [TANKS, THREE_POINT] {
        let s = parse_scenario(text).unwrap();
        assert_eq!(parse_scenario(&s.to_scn()).unwrap(), s);
    }
}

#[test]
fn tanks_grounding() {
    let s = parse_scenario(TANKS).unwrap();
    assert_eq!(s.waypoints.iter().filter(|w| w.critical).count(), 4);
    let g = ground_to_mdp(&s).unwrap();
    let k = g.targets.len();
    assert_eq!(g.mdp.states.len(), s.waypoints.len() * (1 << k) + 1);
    assert_eq!(g.collided, s.waypoints.len() << k);
    assert!(g.mdp.validate().is_empty());
}

#[test]
fn three_point_inspection_trace() {
    let s = parse_scenario(THREE_POINT).unwrap();
    let g = ground_to_mdp(&s).unwrap();
    assert_eq!(g.mdp.states.len(), 3 * 2 + 1);
    assert!(g.mdp.validate().is_empty());
    // each retry multiplies the disutility by (1/gamma)^k; too small a gamma diverges
    assert!(solve(&g.mdp, 0.3).is_err());
    for gamma in [0.7, 0.9, 0.999] {
        let (_, plan) = solve(&g.mdp, gamma).unwrap();
        let lin = linearize(&g.mdp, &plan).unwrap();
        assert_eq!(lin.steps, 3);
        assert_eq!(lin.schema, vec!["tank".to_string()]);
        let route = nominal_route(&g, &plan).unwrap();
        assert!(matches!(&route[1], RouteStep::Inspect { target, .. } if target == "tank"));
    }
}
