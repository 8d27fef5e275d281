mod common;

use common::*;
use misgrid_core::powerflow::{apply_demand_change, Cascade};
use misgrid_core::protect::{apply_cls, cls_replay};
use proptest::prelude::*;

#[test]
fn replay_of_two_round_cascade() {
    let mut g = two_round_square();
    apply_demand_change(&mut g, &[3], 0.25).unwrap();
    let rows = cls_replay(&g, 1.0).unwrap();
    // Shedding before round 1 keeps 0.55 + 0.55 of 1.25 (margin aside);
    // before round 2 only D-B remains and carries 0.9.
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), vec![1, 2, 3]);
    assert!((rows[0].1 - 1.1 / 1.25).abs() < 1e-6, "{rows:?}");
    assert!((rows[1].1 - 0.9 / 1.25).abs() < 1e-6, "{rows:?}");
    assert_eq!(rows[2].1, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shedding_stops_the_next_round(
        spec in grid_spec(10),
        attacked in proptest::collection::vec(any::<bool>(), 10),
        rounds in 0..3usize,
        alpha in 0.3..=1.0f64,
    ) {
        let mut g = build_grid(&spec, 1.1);
        let targets: Vec<usize> = g.demand_buses().into_iter().filter(|&b| attacked[b]).collect();
        prop_assume!(!targets.is_empty());
        apply_demand_change(&mut g, &targets, 0.5).unwrap();
        let mut cascade = Cascade::new(&g, alpha).unwrap();
        for _ in 0..rounds {
            if cascade.step(&mut g).unwrap() {
                break;
            }
        }
        let demand = g.total_demand();
        let (mut shed, report) = apply_cls(&g).unwrap();
        prop_assert!((0.0..=1.0).contains(&report.yield_after));
        prop_assert!(shed.total_demand() <= demand + 1e-9);
        let mut next = Cascade::new(&shed, alpha).unwrap();
        prop_assert!(next.step(&mut shed).unwrap(), "a line tripped after shedding");
    }

    #[test]
    fn safe_state_sheds_nothing(spec in grid_spec(10)) {
        let g = build_grid(&spec, 1.0 + 1e-3);
        let (_, report) = apply_cls(&g).unwrap();
        prop_assert!(report.shed.is_empty(), "{:?}", report.shed);
        prop_assert_eq!(report.yield_after, 1.0);
    }

    #[test]
    fn replay_ends_with_the_uncontrolled_cascade(spec in grid_spec(8), attacked in proptest::collection::vec(any::<bool>(), 8)) {
        let mut g = build_grid(&spec, 1.05);
        let targets: Vec<usize> = g.demand_buses().into_iter().filter(|&b| attacked[b]).collect();
        prop_assume!(!targets.is_empty());
        apply_demand_change(&mut g, &targets, 0.25).unwrap();
        let rows = cls_replay(&g, 0.5).unwrap();
        let uncontrolled = Cascade::new(&g, 0.5).unwrap().run(&mut g.clone()).unwrap();
        prop_assert_eq!(rows.len(), uncontrolled.rounds.len());
        prop_assert_eq!(rows.last().unwrap().1, uncontrolled.final_yield);
        for (i, &(r, y)) in rows.iter().enumerate() {
            prop_assert_eq!(r, i + 1);
            prop_assert!((0.0..=1.0).contains(&y));
        }
    }
}
