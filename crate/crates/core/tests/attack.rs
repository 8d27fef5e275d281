mod common;

use std::collections::BTreeSet;

use common::*;
use misgrid_core::attack::{cic, evaluate_attack, select_seeds, spa_c, spa_s, AttackSettings, PloadMethod, Strategy};
use misgrid_core::diffusion::SeedSet;
use misgrid_core::powerflow::{apply_demand_changes, run_cascade};
use misgrid_core::rng::stream;
use misgrid_core::{Coupling, Params, PowerGrid, Scenario, SocialGraph};
use proptest::prelude::*;

fn scenario(grid: PowerGrid, social: SocialGraph, pairs: &[(usize, usize)], alpha: f64, k: usize) -> Scenario {
    let mut coupling = Coupling::new();
    for &(b, u) in pairs {
        coupling.link(b, u).unwrap();
    }
    let params = Params { alpha, k, ..Params::default() };
    Scenario::new(social, grid, coupling, params).unwrap()
}

fn settings() -> AttackSettings {
    AttackSettings { trials: 200, yield_samples: 50, ..AttackSettings::default() }
}

#[test]
fn cic_on_chain() {
    // Users 1 and 2 both reach user 1 surely; the tie goes to the smaller id.
    let mut social = SocialGraph::with_nodes(3);
    social.add_edge(2, 0, 1.0).unwrap();
    social.add_edge(2, 1, 1.0).unwrap();
    let s = scenario(chain(), social, &[(1, 0), (2, 1)], 1.0, 1);
    for pload in [PloadMethod::Exhaustive, PloadMethod::Milp, PloadMethod::Heuristic] {
        let set = AttackSettings { pload, ..settings() };
        let impacts = cic(&s, &s.grid, &SeedSet::new(), &set, &mut stream(1, "cic")).unwrap();
        let b = impacts.iter().find(|c| c.bus == 2).unwrap();
        assert!(b.reachable);
        assert_eq!(b.pload, vec![2]);
        assert_eq!(b.nodes, BTreeSet::from([2]));
        assert_eq!(b.seeds, vec![1]);
        assert!(!impacts.iter().find(|c| c.bus == 1).unwrap().reachable);

        let mut replay = s.grid.clone();
        apply_demand_changes(&mut replay, &[(2, 0.25)]).unwrap();
        assert_eq!(run_cascade(&mut replay, 1.0).unwrap().newly_failed(), b.nodes);
    }
}

#[test]
fn two_stage_plan_beats_static_plan() {
    let s = scenario(two_stage(), SocialGraph::with_nodes(2), &[(2, 0), (3, 1)], 1.0, 2);
    let c = spa_c(&s, 2, &settings(), &mut stream(3, "c")).unwrap();
    let q = spa_s(&s, 2, &settings(), &mut stream(3, "s")).unwrap();
    assert!(!c.fell_back);
    assert_eq!(c.seeds.as_slice(), &[0]);
    assert_eq!(q.seeds.as_slice(), &[0, 1]);
    assert_eq!(q.predicted_failures, Some(2));
    let failed = |seeds: &SeedSet| evaluate_attack(&s, seeds, 1, 0).unwrap().trials[0].failed.clone();
    assert_eq!(failed(&c.seeds), BTreeSet::from([2]));
    assert_eq!(failed(&q.seeds), BTreeSet::from([2, 3]));
}

/// Exact expected failure count of seed user 2 on the two-stage grid, by
/// enumerating its live-edge graphs.
#[test]
fn evaluation_matches_enumeration() {
    let mut social = SocialGraph::with_nodes(3);
    let edges = [(2, 0, 0.5), (2, 1, 0.6), (0, 1, 0.3)];
    for &(a, b, p) in &edges {
        social.add_edge(a, b, p).unwrap();
    }
    let s = scenario(two_stage(), social, &[(2, 0), (3, 1)], 1.0, 1);
    let mut exact = 0.0;
    for mask in 0..8u32 {
        let live = |e: usize| mask >> e & 1 == 1;
        let w: f64 = edges.iter().enumerate().map(|(e, &(_, _, p))| if live(e) { p } else { 1.0 - p }).product();
        let user0 = live(0);
        let user1 = live(1) || (user0 && live(2));
        let mut attacked = Vec::new();
        if user0 {
            attacked.push((2, 0.25));
        }
        if user1 {
            attacked.push((3, 0.25));
        }
        let mut g = s.grid.clone();
        apply_demand_changes(&mut g, &attacked).unwrap();
        exact += w * run_cascade(&mut g, 1.0).unwrap().failed_nodes.len() as f64;
    }
    let n = 4000;
    let out = evaluate_attack(&s, &SeedSet::from_users([2]), n, 11).unwrap();
    let var = out.trials.iter().map(|t| (t.failed.len() as f64 - out.mean_failed).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((out.mean_failed - exact).abs() <= 3.0 * se, "{} vs {exact} (se {se})", out.mean_failed);
}

fn ring_scenario(spec: &GridSpec, seed: u64) -> Option<Scenario> {
    let grid = build_grid(spec, 1.1);
    let demand = grid.demand_buses();
    if demand.is_empty() {
        return None;
    }
    let n = demand.len() + 2;
    let mut social = SocialGraph::with_nodes(n);
    for i in 0..n {
        let p = 0.2 + 0.6 * ((seed.wrapping_mul(31).wrapping_add(i as u64 * 17)) % 100) as f64 / 100.0;
        social.add_edge(i, (i + 1) % n, p).unwrap();
        social.add_edge((i + 1) % n, i, p / 2.0).unwrap();
    }
    let pairs: Vec<(usize, usize)> = demand.iter().enumerate().map(|(u, &b)| (b, u)).collect();
    let mut s = scenario(grid, social, &pairs, 0.5, 2);
    s.params.utility_user = Some(n - 1);
    Some(s)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn strategies_respect_budget_and_are_deterministic(spec in grid_spec(7), k in 1..4usize, seed in any::<u64>()) {
        let Some(s) = ring_scenario(&spec, seed) else { return Ok(()) };
        for strategy in Strategy::ALL {
            let a = select_seeds(strategy, &s, k, &settings(), &mut stream(seed, strategy.name())).unwrap();
            let b = select_seeds(strategy, &s, k, &settings(), &mut stream(seed, strategy.name())).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!(a.seeds.len() <= k, "{} picked {}", strategy, a.seeds.len());
            prop_assert!(!a.seeds.contains(s.social.node_count() - 1));
        }
    }
}
