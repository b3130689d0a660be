use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riskplan::mdp::{Action, Mdp, State, Transition};
use riskplan::planner::GammaInterval;
use riskplan::scenario::{ground_to_mdp, parse_scenario};
use riskplan::{generate_candidates, solve, transform};

/// Layered model: every state moves forward, some actions may fall back to
/// the start. Always has a proper policy through action 0.
fn model(n: usize, costs: Vec<u8>, probs: Vec<u8>) -> Mdp {
    let goal = n - 1;
    let mut transitions = Vec::new();
    for s in 0..goal {
        transitions.push(Transition { source: s, action: 0, target: s + 1, probability: 1.0 });
        let p = f64::from(probs[s] % 10 + 1) / 10.0;
        let jump = (s + 2).min(goal);
        transitions.push(Transition { source: s, action: 1, target: jump, probability: p });
        if p < 1.0 {
            transitions.push(Transition { source: s, action: 1, target: 0, probability: 1.0 - p });
        }
    }
    Mdp {
        states: (0..n)
            .map(|i| State { id: i, label: format!("s{i}"), is_goal: i == goal, cost: if i == goal { 0.0 } else { f64::from(costs[i] % 5 + 1) } })
            .collect(),
        actions: vec![Action { id: 0, label: "step".into() }, Action { id: 1, label: "jump".into() }],
        transitions,
        start: 0,
        goals: [goal].into_iter().collect(),
    }
}

fn arb_model() -> impl Strategy<Value = Mdp> {
    (3usize..9).prop_flat_map(|n| {
        (Just(n), proptest::collection::vec(any::<u8>(), n), proptest::collection::vec(any::<u8>(), n))
            .prop_map(|(n, c, p)| model(n, c, p))
    })
}

proptest! {
    #[test]
    fn transformed_weights_lie_in_unit_negative_interval(m in arb_model(), gamma in 0.001f64..0.999) {
        let t = transform(&m, gamma).unwrap();
        prop_assert_eq!(t.transitions.len(), m.transitions.len());
        for tr in &t.transitions {
            prop_assert!((-1.0..=0.0).contains(&tr.probability), "{}", tr.probability);
        }
    }

    #[test]
    fn values_are_at_least_one_and_goals_exactly_one(m in arb_model(), gamma in 0.05f64..0.999) {
        let (v, plan) = solve(&m, gamma).unwrap();
        for s in 0..m.states.len() {
            if m.is_goal(s) {
                prop_assert_eq!(v.values[s], 1.0);
            } else {
                prop_assert!(v.values[s] >= 1.0);
            }
        }
        prop_assert!(plan.policy.contains_key(&m.start));
    }

    #[test]
    fn candidates_are_distinct_and_reproducible(m in arb_model(), seed in any::<u64>()) {
        let set = generate_candidates(&m, 12, GammaInterval::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let policies: BTreeSet<_> = set.candidates.iter().map(|c| c.plan.policy.clone()).collect();
        prop_assert_eq!(policies.len(), set.candidates.len());
        let tops: Vec<f64> = set.candidates.iter().map(|c| c.gammas.iter().copied().fold(0.0, f64::max)).collect();
        prop_assert!(tops.windows(2).all(|w| w[0] > w[1]));
        for c in &set.candidates {
            for &g in &c.gammas {
                prop_assert_eq!(&solve(&m, g).unwrap().1.policy, &c.plan.policy);
            }
        }
        let again = generate_candidates(&m, 12, GammaInterval::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let key = |cs: &[riskplan::Candidate]| cs.iter().map(|c| (c.plan.clone(), c.gammas.clone())).collect::<Vec<_>>();
        prop_assert_eq!(key(&again.candidates), key(&set.candidates));
    }
}

#[test]
fn tanks_candidates_trade_length_for_risk() {
    let s = parse_scenario(include_str!("../fixtures/tanks.scn")).unwrap();
    let g = ground_to_mdp(&s).unwrap();
    let set = generate_candidates(&g.mdp, 20, GammaInterval::default(), &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    assert!(set.candidates.len() >= 2);
    assert!(set.failures.is_empty());
    // the risk-neutral plan is the shortest
    let steps: Vec<usize> = set.candidates.iter().map(|c| c.steps).collect();
    assert!(steps[1..].iter().all(|&n| n >= steps[0]), "{steps:?}");
    for c in &set.candidates {
        assert_eq!(c.schema.iter().collect::<BTreeSet<_>>().len(), 3);
    }
}
