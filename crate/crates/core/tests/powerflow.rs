mod common;

use common::*;
use misgrid_core::powerflow::{apply_demand_change, balance_all, run_cascade, solve_dc_flow, Cascade};
use misgrid_core::{failed_nodes, PowerGrid};
use proptest::prelude::*;

fn residuals(grid: &PowerGrid, flows: &[f64]) -> Vec<f64> {
    let mut net: Vec<f64> = (0..grid.bus_count()).map(|b| grid.injection(b)).collect();
    for (line, &f) in grid.lines().iter().zip(flows) {
        net[line.from] -= f;
        net[line.to] += f;
    }
    net
}

#[test]
fn triangle_splits_two_to_one() {
    let g = triangle();
    let flows = solve_dc_flow(&g).unwrap().flows;
    for (got, want) in flows.iter().zip([2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]) {
        assert!((got - want).abs() < 1e-12, "{flows:?}");
    }
}

#[test]
fn parallel_lines_fail_together() {
    let mut g = parallel_lines();
    apply_demand_change(&mut g, &[1], 0.25).unwrap();
    let out = run_cascade(&mut g, 1.0).unwrap();
    assert_eq!(out.rounds[0].removed_lines, vec![0, 1]);
    assert_eq!(out.failed_lines, vec![0, 1]);
    assert_eq!(out.failed_nodes.iter().copied().collect::<Vec<_>>(), vec![1]);
    assert_eq!(out.depth(), 1);
    assert_eq!(out.final_yield, 0.0);
}

#[test]
fn square_fails_in_two_rounds() {
    let mut g = two_round_square();
    apply_demand_change(&mut g, &[3], 0.25).unwrap();
    let out = run_cascade(&mut g, 1.0).unwrap();
    assert_eq!(out.rounds.len(), 3);
    let r1 = &out.rounds[0];
    for &f in &r1.flows {
        assert!((f - 0.625).abs() < 1e-12, "{:?}", r1.flows);
    }
    assert_eq!(r1.removed_lines, vec![0]);
    assert!(r1.failed_buses.is_empty());
    let r2 = &out.rounds[1];
    assert!((r2.flows[2] - 1.25).abs() < 1e-12 && (r2.flows[3] - 1.25).abs() < 1e-12);
    assert_eq!((r2.flows[0], r2.flows[1]), (0.0, 0.0));
    assert_eq!(r2.removed_lines, vec![3]);
    assert_eq!(r2.failed_buses, vec![3]);
    assert!(out.rounds[2].removed_lines.is_empty());
    assert_eq!(out.failed_lines, vec![0, 3]);
    assert_eq!(out.depth(), 2);
}

#[test]
fn smoothing_delays_the_trip() {
    // A averages (0.5 + 0.625) / 2 = 0.5625 > 0.55 in round 1, B averages
    // (0.5625 + 1.25) / 2 = 0.90625 > 0.9 in round 2.
    let mut g = two_round_square();
    apply_demand_change(&mut g, &[3], 0.25).unwrap();
    let out = run_cascade(&mut g, 0.5).unwrap();
    assert_eq!(out.rounds[0].removed_lines, vec![0]);
    assert_eq!(out.rounds[1].removed_lines, vec![3]);
    assert_eq!(out.depth(), 2);
}

#[test]
fn unattacked_grid_is_stable() {
    let mut g = two_round_square();
    let out = run_cascade(&mut g, 0.5).unwrap();
    assert_eq!(out.rounds.len(), 1);
    assert!(out.failed_nodes.is_empty());
    assert_eq!(out.final_yield, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flows_conserve_power(spec in grid_spec(12)) {
        let g = build_grid(&spec, 1.2);
        let sol = solve_dc_flow(&g).unwrap();
        for r in residuals(&g, &sol.flows) {
            prop_assert!(r.abs() < 1e-9, "residual {r}");
        }
    }

    #[test]
    fn cascade_invariants(spec in grid_spec(12), attacked in proptest::collection::vec(any::<bool>(), 12), alpha in 0.3..=1.0f64) {
        let mut g = build_grid(&spec, 1.1);
        let targets: Vec<usize> = g.demand_buses().into_iter().filter(|&b| attacked[b]).collect();
        prop_assume!(!targets.is_empty());
        apply_demand_change(&mut g, &targets, 0.5).unwrap();

        let mut cascade = Cascade::new(&g, alpha).unwrap();
        let mut failed = failed_nodes(&g);
        let mut removed = std::collections::BTreeSet::new();
        while !cascade.step(&mut g).unwrap() {
            let now = failed_nodes(&g);
            prop_assert!(failed.is_subset(&now));
            failed = now;
            for &l in &cascade.rounds().last().unwrap().removed_lines {
                prop_assert!(removed.insert(l), "line {l} removed twice");
            }
        }
        // At stability every island balances and every averaged flow fits.
        balance_all(&mut g);
        let sol = solve_dc_flow(&g).unwrap();
        for r in residuals(&g, &sol.flows) {
            prop_assert!(r.abs() < 1e-6);
        }
        for line in g.lines().iter().filter(|l| l.alive) {
            prop_assert!(line.avg_flow.abs() <= line.capacity * (1.0 + 1e-6) + 1e-9);
        }
        let out = cascade.finish(&g).unwrap();
        prop_assert!((0.0..=1.0).contains(&out.final_yield));
        prop_assert_eq!(out.failed_nodes, failed);
    }
}
