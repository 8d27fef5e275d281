//! JSON scenario documents.

use std::collections::BTreeMap;

use misgrid_core::powerflow::prepare_base_state;
use misgrid_core::{Coupling, Generator, Load, Params, PowerGrid, Scenario, SocialGraph};
use serde::{Deserialize, Serialize};

use crate::error::IngestError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub from: usize,
    pub to: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialDoc {
    /// External user labels; position is the user id.
    pub nodes: Vec<u64>,
    pub edges: Vec<EdgeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenDoc {
    pub bus: usize,
    pub output: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandDoc {
    pub bus: usize,
    pub demand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineDoc {
    pub from: usize,
    pub to: usize,
    pub x: f64,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDoc {
    /// External bus numbers; position is the bus id.
    pub buses: Vec<u64>,
    pub gens: Vec<GenDoc>,
    pub demands: Vec<DemandDoc>,
    pub lines: Vec<LineDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsDoc {
    pub delta: f64,
    pub alpha: f64,
    pub capacity_factor: f64,
    pub k: usize,
    pub rng_seed: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub delta_overrides: BTreeMap<usize, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility_user: Option<usize>,
}

/// A scenario at its base operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub social: SocialDoc,
    pub grid: GridDoc,
    pub coupling: Vec<(usize, usize)>,
    pub params: ParamsDoc,
}

impl ScenarioDoc {
    pub fn from_scenario(s: &Scenario) -> Self {
        let social = SocialDoc {
            nodes: s.social.labels().to_vec(),
            edges: s.social.edges().iter().map(|e| EdgeDoc { from: e.from, to: e.to, p: e.p }).collect(),
        };
        let g = &s.grid;
        let grid = GridDoc {
            buses: g.buses().iter().map(|b| b.label).collect(),
            gens: g
                .buses()
                .iter()
                .enumerate()
                .filter_map(|(i, b)| b.generator.map(|x| GenDoc { bus: i, output: x.output, min: x.min, max: x.max }))
                .collect(),
            demands: g
                .buses()
                .iter()
                .enumerate()
                .filter_map(|(i, b)| b.load.map(|l| DemandDoc { bus: i, demand: l.demand }))
                .collect(),
            lines: g.lines().iter().map(|l| LineDoc { from: l.from, to: l.to, x: l.reactance, u: l.capacity }).collect(),
        };
        let p = &s.params;
        ScenarioDoc {
            social,
            grid,
            coupling: s.coupling.pairs().collect(),
            params: ParamsDoc {
                delta: p.delta,
                alpha: p.alpha,
                capacity_factor: p.capacity_factor,
                k: p.k,
                rng_seed: p.rng_seed,
                delta_overrides: p.delta_overrides.clone(),
                utility_user: p.utility_user,
            },
        }
    }

    /// Rebuild the scenario and re-solve its base flow.
    pub fn to_scenario(&self) -> Result<Scenario, IngestError> {
        let mut social = SocialGraph::from_labels(self.social.nodes.clone());
        for e in &self.social.edges {
            social.add_edge(e.from, e.to, e.p)?;
        }
        let mut grid = PowerGrid::new();
        for &label in &self.grid.buses {
            grid.add_bus(label);
        }
        for g in &self.grid.gens {
            grid.set_generator(g.bus, Generator { output: g.output, min: g.min, max: g.max })?;
        }
        for d in &self.grid.demands {
            grid.set_load(d.bus, Load::new(d.demand))?;
        }
        for l in &self.grid.lines {
            grid.add_line(l.from, l.to, l.x, l.u)?;
        }
        prepare_base_state(&mut grid)?;
        let mut coupling = Coupling::new();
        for &(bus, user) in &self.coupling {
            coupling.link(bus, user)?;
        }
        let p = &self.params;
        let params = Params {
            delta: p.delta,
            delta_overrides: p.delta_overrides.clone(),
            alpha: p.alpha,
            capacity_factor: p.capacity_factor,
            k: p.k,
            rng_seed: p.rng_seed,
            utility_user: p.utility_user,
        };
        Ok(Scenario::new(social, grid, coupling, params)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Read a scenario file.
pub fn load_scenario(path: &std::path::Path) -> Result<Scenario, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    ScenarioDoc::from_json(&text)?.to_scenario()
}
