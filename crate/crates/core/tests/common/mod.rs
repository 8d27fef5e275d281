//! Small hand-checkable grids and a random grid generator.
#![allow(dead_code)]

use misgrid_core::powerflow::prepare_base_state;
use misgrid_core::{Generator, Load, PowerGrid};
use proptest::prelude::*;

pub fn gen(output: f64, max: f64) -> Generator {
    Generator { output, min: 0.0, max }
}

/// Generator at bus 0 feeding a unit load at bus 2, all reactances 1.
pub fn triangle() -> PowerGrid {
    let mut g = PowerGrid::new();
    for label in 1..=3 {
        g.add_bus(label);
    }
    g.set_generator(0, gen(1.0, 5.0)).unwrap();
    g.set_load(1, Load::new(1.0)).unwrap();
    g.add_line(0, 1, 1.0, 10.0).unwrap();
    g.add_line(0, 2, 1.0, 10.0).unwrap();
    g.add_line(2, 1, 1.0, 10.0).unwrap();
    prepare_base_state(&mut g).unwrap();
    g
}

/// Two parallel lines of capacity 0.6 between a generator and a unit load.
pub fn parallel_lines() -> PowerGrid {
    let mut g = PowerGrid::new();
    g.add_bus(1);
    g.add_bus(2);
    g.set_generator(0, gen(1.0, 5.0)).unwrap();
    g.set_load(1, Load::new(1.0)).unwrap();
    g.add_line(0, 1, 1.0, 0.6).unwrap();
    g.add_line(0, 1, 1.0, 0.6).unwrap();
    prepare_base_state(&mut g).unwrap();
    g
}

/// Square 0-1-3-2-0 with the generator at 0 and a unit load at 3. Line
/// ids: A = 0 (0-1, cap 0.55), C = 1 (1-3), D = 2 (0-2), B = 3 (2-3, cap
/// 0.9). Inflating the load to 1.25 trips A in round 1 and B in round 2.
pub fn two_round_square() -> PowerGrid {
    let mut g = PowerGrid::new();
    for label in 0..4 {
        g.add_bus(label);
    }
    g.set_generator(0, gen(1.0, 5.0)).unwrap();
    g.set_load(3, Load::new(1.0)).unwrap();
    g.add_line(0, 1, 1.0, 0.55).unwrap();
    g.add_line(1, 3, 1.0, 10.0).unwrap();
    g.add_line(0, 2, 1.0, 10.0).unwrap();
    g.add_line(2, 3, 1.0, 0.9).unwrap();
    prepare_base_state(&mut g).unwrap();
    g
}

/// Generator - A - B chain with unit loads; capacities 2.6 and 1.2.
pub fn chain() -> PowerGrid {
    let mut g = PowerGrid::new();
    for label in 0..3 {
        g.add_bus(label);
    }
    g.set_generator(0, gen(2.0, 10.0)).unwrap();
    g.set_load(1, Load::new(1.0)).unwrap();
    g.set_load(2, Load::new(1.0)).unwrap();
    g.add_line(0, 1, 1.0, 2.6).unwrap();
    g.add_line(1, 2, 1.0, 1.2).unwrap();
    prepare_base_state(&mut g).unwrap();
    g
}

#[derive(Debug, Clone)]
pub struct GridSpec {
    pub n: usize,
    /// Parent of bus `i + 1` in a spanning tree, as a fraction of `i + 1`.
    pub tree: Vec<f64>,
    pub extra: Vec<(usize, usize)>,
    pub reactance: Vec<f64>,
    pub demand: Vec<f64>,
    /// Which buses (other than bus 0) also host a generator.
    pub gens: Vec<bool>,
}

pub fn grid_spec(max_buses: usize) -> impl Strategy<Value = GridSpec> {
    (3..=max_buses).prop_flat_map(|n| {
        (
            Just(n),
            proptest::collection::vec(0.0..1.0f64, n - 1),
            proptest::collection::vec((0..n, 0..n), 0..n),
            proptest::collection::vec(0.05..2.0f64, 2 * n),
            proptest::collection::vec(0.0..3.0f64, n),
            proptest::collection::vec(proptest::bool::weighted(0.2), n),
        )
            .prop_map(|(n, tree, extra, reactance, demand, gens)| GridSpec { n, tree, extra, reactance, demand, gens })
    })
}

/// A connected grid with a generator at bus 0, enough total capacity, and
/// capacities set to `factor` times the base flow.
pub fn build_grid(spec: &GridSpec, factor: f64) -> PowerGrid {
    let mut g = PowerGrid::new();
    for i in 0..spec.n {
        g.add_bus(i as u64 + 1);
    }
    let total: f64 = spec.demand.iter().skip(1).sum();
    g.set_generator(0, gen(0.0, 2.0 * total + 1.0)).unwrap();
    for i in 1..spec.n {
        if spec.gens[i] {
            g.set_generator(i, gen(0.0, 1.0 + spec.demand[i])).unwrap();
        } else if spec.demand[i] > 0.05 {
            g.set_load(i, Load::new(spec.demand[i])).unwrap();
        }
    }
    let mut x = spec.reactance.iter().copied().cycle();
    for i in 1..spec.n {
        let parent = ((spec.tree[i - 1] * i as f64) as usize).min(i - 1);
        g.add_line(parent, i, x.next().unwrap(), 0.0).unwrap();
    }
    for &(a, b) in &spec.extra {
        if a != b {
            g.add_line(a, b, x.next().unwrap(), 0.0).unwrap();
        }
    }
    misgrid_core::construct::set_line_capacities(&mut g, factor).unwrap();
    g
}

/// Generator 0, transit bus 1, loads a = 2 (0.7) and b = 3 (1.0). Lines:
/// P = 0 (0-3, cap 1.2), Q1 = 1 (0-1, cap 0.9), Q2 = 2 (1-3), La = 3 (1-2,
/// cap 0.8). Inflating a trips La and Q1 and strands a; b then hangs on P
/// alone, where inflating it trips P. No single round can strand b on the
/// intact grid.
pub fn two_stage() -> PowerGrid {
    let mut g = PowerGrid::new();
    for label in 0..4 {
        g.add_bus(label);
    }
    g.set_generator(0, gen(1.7, 10.0)).unwrap();
    g.set_load(2, Load::new(0.7)).unwrap();
    g.set_load(3, Load::new(1.0)).unwrap();
    g.add_line(0, 3, 1.0, 1.2).unwrap();
    g.add_line(0, 1, 1.0, 0.9).unwrap();
    g.add_line(1, 3, 1.0, 10.0).unwrap();
    g.add_line(1, 2, 1.0, 0.8).unwrap();
    prepare_base_state(&mut g).unwrap();
    g
}
