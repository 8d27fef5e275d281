use std::path::PathBuf;

use misgrid::edgelist::parse_edge_list;
use misgrid::matpower::{parse_matpower, read_grid, write_matpower};
use misgrid::scenario::{load_scenario, ScenarioDoc};
use misgrid_core::construct::{build_scenario, WeightRange};
use misgrid_core::powerflow::solve_dc_flow;
use misgrid_core::Params;

fn data(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "data", name].iter().collect();
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn ieee30_shape() {
    let case = parse_matpower(&data("case30.m")).unwrap();
    assert_eq!((case.buses.len(), case.branches.len(), case.gens.len()), (30, 41, 6));
    let grid = read_grid(&data("case30.m"), false).unwrap().grid;
    assert_eq!(grid.bus_count(), 30);
    assert_eq!(grid.line_count(), 41);
    assert_eq!(grid.generator_buses().len(), 6);
    assert_eq!(grid.demand_buses().len(), 20);
    assert!((grid.total_demand() - 189.2).abs() < 1e-9);
}

#[test]
fn ieee300_imports_and_solves() {
    let imported = read_grid(&data("case300.m"), false).unwrap();
    let mut grid = imported.grid;
    assert_eq!(grid.bus_count(), 300);
    assert_eq!(grid.line_count(), 411);
    misgrid_core::powerflow::prepare_base_state(&mut grid).unwrap();
    let sol = solve_dc_flow(&grid).unwrap();
    assert!(sol.flows.iter().all(|f| f.is_finite()));
}

#[test]
fn matpower_round_trip() {
    let grid = read_grid(&data("case30.m"), true).unwrap().grid;
    let again = read_grid(&write_matpower(&grid, "copy"), true).unwrap().grid;
    assert_eq!(grid.buses(), again.buses());
    assert_eq!(grid.lines(), again.lines());
}

#[test]
fn scenario_round_trip() {
    let grid = read_grid(&data("case30.m"), false).unwrap().grid;
    let social = parse_edge_list(&data("social_4039.txt")).unwrap();
    assert_eq!(social.node_count(), 4039);
    let params = Params { capacity_factor: 1.3, rng_seed: 4, ..Params::default() };
    let s = build_scenario(grid, &social, WeightRange::default(), params).unwrap();
    assert_eq!(s.social.node_count(), 20);
    assert_eq!(s.coupling.len(), 20);

    let doc = ScenarioDoc::from_scenario(&s);
    let text = doc.to_json();
    let back = ScenarioDoc::from_json(&text).unwrap().to_scenario().unwrap();
    assert_eq!(back.social, s.social);
    assert_eq!(back.coupling, s.coupling);
    assert_eq!(back.params, s.params);
    assert_eq!(ScenarioDoc::from_scenario(&back).to_json(), text);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    std::fs::write(&path, &text).unwrap();
    assert_eq!(load_scenario(&path).unwrap().grid.lines(), back.grid.lines());
}

#[test]
fn malformed_scenario_is_rejected() {
    assert!(ScenarioDoc::from_json("{\"social\": 3}").is_err());
    let dir = tempfile::tempdir().unwrap();
    assert!(load_scenario(&dir.path().join("missing.json")).is_err());
}

mod properties {
    use std::collections::BTreeSet;

    use misgrid::edgelist::parse_edge_list;
    use misgrid::matpower::{read_grid, write_matpower};
    use misgrid_core::{Generator, Load, PowerGrid};
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn edge_list_counts(pairs in proptest::collection::vec((0..40u64, 0..40u64), 0..60)) {
            let text: String = pairs.iter().map(|(a, b)| format!("{a}\t{b}\n")).collect();
            let g = parse_edge_list(&text).unwrap();
            let nodes: BTreeSet<u64> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
            let undirected: BTreeSet<(u64, u64)> =
                pairs.iter().filter(|(a, b)| a != b).map(|&(a, b)| (a.min(b), a.max(b))).collect();
            prop_assert_eq!(g.node_count(), nodes.len());
            prop_assert_eq!(g.edge_count(), 2 * undirected.len());
            prop_assert!(g.labels().windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn matpower_writer_round_trips(
            buses in proptest::collection::vec((1..1000u64, 0.0..50.0f64, proptest::option::of((0.0..20.0f64, 20.0..90.0f64))), 2..12),
            lines in proptest::collection::vec((0..12usize, 0..12usize, 0.01..1.0f64, 1.0..300.0f64), 1..20),
        ) {
            let mut g = PowerGrid::new();
            let mut labels = BTreeSet::new();
            for &(label, demand, generator) in &buses {
                if !labels.insert(label) {
                    continue;
                }
                let b = g.add_bus(label);
                if demand > 1.0 {
                    g.set_load(b, Load::new(demand)).unwrap();
                }
                if let Some((min, max)) = generator {
                    g.set_generator(b, Generator { output: min, min, max }).unwrap();
                }
            }
            let n = g.bus_count();
            for &(a, b, x, u) in &lines {
                if a % n != b % n {
                    g.add_line(a % n, b % n, x, u).unwrap();
                }
            }
            let back = read_grid(&write_matpower(&g, "prop"), true).unwrap().grid;
            prop_assert_eq!(back.buses(), g.buses());
            prop_assert_eq!(back.lines(), g.lines());
        }
    }
}
