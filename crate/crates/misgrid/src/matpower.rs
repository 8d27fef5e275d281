//! Reader and writer for MATPOWER version 2 case scripts.
//!
//! Only the columns the DC model needs are kept: bus id and real demand,
//! generator bus, output and limits, branch endpoints, reactance, rating and
//! status.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use misgrid_core::{Generator, Load, PowerGrid};

use crate::error::IngestError;

#[derive(Debug, Clone, PartialEq)]
pub struct BusRow {
    pub id: u64,
    pub kind: u32,
    /// Real demand (MW).
    pub pd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenRow {
    pub bus: u64,
    pub pg: f64,
    pub pmax: f64,
    pub pmin: f64,
    pub in_service: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchRow {
    pub from: u64,
    pub to: u64,
    /// Series reactance (p.u.).
    pub x: f64,
    /// Long-term rating (MW), 0 meaning unlimited.
    pub rate_a: f64,
    pub in_service: bool,
}

/// The tables of a case file.
#[derive(Debug, Clone, PartialEq)]
pub struct MatpowerCase {
    pub base_mva: f64,
    pub buses: Vec<BusRow>,
    pub gens: Vec<GenRow>,
    pub branches: Vec<BranchRow>,
}

/// A grid built from a case together with anything odd met on the way.
#[derive(Debug, Clone)]
pub struct Imported {
    pub grid: PowerGrid,
    pub warnings: Vec<String>,
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn number(tok: &str, line: usize) -> Result<f64, IngestError> {
    tok.parse::<f64>().map_err(|_| IngestError::Parse { line, message: format!("bad number {tok:?}") })
}

/// Parse the `mpc.baseMVA`, `mpc.bus`, `mpc.gen` and `mpc.branch` entries.
pub fn parse_matpower(text: &str) -> Result<MatpowerCase, IngestError> {
    let mut base_mva = None;
    let mut tables: BTreeMap<String, Vec<(usize, Vec<f64>)>> = BTreeMap::new();
    let mut open: Option<String> = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let mut body = line;
        if open.is_none() {
            let Some(rest) = line.strip_prefix("mpc.") else { continue };
            let Some((name, value)) = rest.split_once('=') else { continue };
            let name = name.trim();
            let value = value.trim();
            if name == "baseMVA" {
                base_mva = Some(number(value.trim_end_matches(';').trim(), lineno)?);
                continue;
            }
            let Some(inner) = value.strip_prefix('[') else { continue };
            open = Some(name.to_string());
            tables.entry(name.to_string()).or_default();
            body = inner;
        }
        let name = open.clone().expect("inside a matrix");
        let (rows, closed) = match body.find(']') {
            Some(i) => (&body[..i], true),
            None => (body, false),
        };
        for row in rows.split(';') {
            let cells: Vec<&str> = row.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
            if cells.is_empty() {
                continue;
            }
            let values = cells.iter().map(|c| number(c, lineno)).collect::<Result<Vec<_>, _>>()?;
            tables.get_mut(&name).expect("opened").push((lineno, values));
        }
        if closed {
            open = None;
        }
    }
    if let Some(name) = open {
        return Err(IngestError::Parse { line: text.lines().count(), message: format!("matrix mpc.{name} is not closed") });
    }

    let take = |name: &str, min_cols: usize| -> Result<Vec<(usize, Vec<f64>)>, IngestError> {
        let rows = tables.get(name).cloned().ok_or_else(|| IngestError::Parse { line: 0, message: format!("missing mpc.{name}") })?;
        for (line, row) in &rows {
            if row.len() < min_cols {
                return Err(IngestError::Parse {
                    line: *line,
                    message: format!("mpc.{name} row has {} columns, need {min_cols}", row.len()),
                });
            }
        }
        Ok(rows)
    };
    let id = |v: f64, line: usize| -> Result<u64, IngestError> {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as u64)
        } else {
            Err(IngestError::Parse { line, message: format!("bad bus number {v}") })
        }
    };

    let buses = take("bus", 3)?
        .into_iter()
        .map(|(line, r)| Ok(BusRow { id: id(r[0], line)?, kind: r[1] as u32, pd: r[2] }))
        .collect::<Result<Vec<_>, IngestError>>()?;
    let gens = take("gen", 10)?
        .into_iter()
        .map(|(line, r)| Ok(GenRow { bus: id(r[0], line)?, pg: r[1], in_service: r[7] > 0.0, pmax: r[8], pmin: r[9] }))
        .collect::<Result<Vec<_>, IngestError>>()?;
    let branches = take("branch", 11)?
        .into_iter()
        .map(|(line, r)| {
            Ok(BranchRow { from: id(r[0], line)?, to: id(r[1], line)?, x: r[3], rate_a: r[5], in_service: r[10] > 0.0 })
        })
        .collect::<Result<Vec<_>, IngestError>>()?;
    Ok(MatpowerCase { base_mva: base_mva.unwrap_or(100.0), buses, gens, branches })
}

impl MatpowerCase {
    /// Build the DC grid.
    ///
    /// Buses keep their external numbers as labels. A bus gets a load when
    /// its demand is positive; a negative demand becomes a fixed injection
    /// merged into the bus generator. Generators on the same bus are summed,
    /// and units that can produce nothing are dropped. Out-of-service
    /// branches and generators are skipped, negative reactances are taken in
    /// absolute value. Capacities come from `rateA` when `file_ratings` is
    /// set (unrated branches get infinity) and are zero otherwise, to be
    /// calibrated later.
    pub fn to_grid(&self, file_ratings: bool) -> Result<Imported, IngestError> {
        let mut warnings = Vec::new();
        let mut grid = PowerGrid::new();
        let mut index = BTreeMap::new();
        for b in &self.buses {
            if index.insert(b.id, grid.add_bus(b.id)).is_some() {
                return Err(IngestError::Invalid(format!("bus {} declared twice", b.id)));
            }
        }
        let lookup = |bus: u64, what: &str| {
            index.get(&bus).copied().ok_or_else(|| IngestError::Invalid(format!("{what} references unknown bus {bus}")))
        };

        let mut gens: BTreeMap<usize, Generator> = BTreeMap::new();
        for g in self.gens.iter().filter(|g| g.in_service) {
            let bus = lookup(g.bus, "generator")?;
            if g.pmax <= 0.0 && g.pg <= 0.0 {
                continue;
            }
            let pmin = g.pmin.max(0.0);
            let pmax = g.pmax.max(pmin);
            let entry = gens.entry(bus).or_insert(Generator { output: 0.0, min: 0.0, max: 0.0 });
            entry.output += g.pg.max(0.0);
            entry.min += pmin;
            entry.max += pmax;
        }
        for b in &self.buses {
            let bus = index[&b.id];
            if b.pd > 0.0 {
                grid.set_load(bus, Load::new(b.pd)).map_err(IngestError::Core)?;
            } else if b.pd < 0.0 {
                warnings.push(format!("bus {}: negative demand {} treated as fixed generation", b.id, b.pd));
                let entry = gens.entry(bus).or_insert(Generator { output: 0.0, min: 0.0, max: 0.0 });
                entry.output += -b.pd;
                entry.min += -b.pd;
                entry.max += -b.pd;
            }
        }
        for (bus, g) in gens {
            grid.set_generator(bus, g).map_err(IngestError::Core)?;
        }

        for br in self.branches.iter().filter(|b| b.in_service) {
            let from = lookup(br.from, "branch")?;
            let to = lookup(br.to, "branch")?;
            if br.x == 0.0 {
                return Err(IngestError::Invalid(format!("branch {}-{} has zero reactance", br.from, br.to)));
            }
            if br.x < 0.0 {
                warnings.push(format!("branch {}-{}: negative reactance {} taken in absolute value", br.from, br.to, br.x));
            }
            let cap = if !file_ratings {
                0.0
            } else if br.rate_a > 0.0 {
                br.rate_a
            } else {
                f64::INFINITY
            };
            grid.add_line(from, to, br.x.abs(), cap).map_err(IngestError::Core)?;
        }
        Ok(Imported { grid, warnings })
    }
}

/// Parse and build in one step.
pub fn read_grid(text: &str, file_ratings: bool) -> Result<Imported, IngestError> {
    parse_matpower(text)?.to_grid(file_ratings)
}

/// Write `grid` as a case script that [`read_grid`] maps back to the same
/// buses, demands, generators, reactances and (with file ratings)
/// capacities.
pub fn write_matpower(grid: &PowerGrid, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "function mpc = {name}");
    out.push_str("mpc.version = '2';\nmpc.baseMVA = 100;\n\n");
    out.push_str("%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\nmpc.bus = [\n");
    for bus in grid.buses() {
        let kind = if bus.generator.is_some() { 2 } else { 1 };
        let pd = bus.load.map_or(0.0, |l| l.demand);
        let _ = writeln!(out, "\t{}\t{kind}\t{pd}\t0\t0\t0\t1\t1\t0\t135\t1\t1.05\t0.95;", bus.label);
    }
    out.push_str("];\n\n%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\nmpc.gen = [\n");
    for bus in grid.buses() {
        if let Some(g) = bus.generator {
            let _ = writeln!(out, "\t{}\t{}\t0\t0\t0\t1\t100\t1\t{}\t{};", bus.label, g.output, g.max, g.min);
        }
    }
    out.push_str("];\n\n%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\nmpc.branch = [\n");
    for line in grid.lines() {
        let rate = if line.capacity.is_finite() { line.capacity } else { 0.0 };
        let status = u8::from(line.alive);
        let _ = writeln!(
            out,
            "\t{}\t{}\t0\t{}\t0\t{rate}\t{rate}\t{rate}\t0\t0\t{status};",
            grid.bus(line.from).label,
            grid.bus(line.to).label,
            line.reactance
        );
    }
    out.push_str("];\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BUS: &str = "function mpc = two
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1	0	135	1	1.05	0.95;
	2	1	40	10	0	0	1	1	0	135	1	1.05	0.95;
];
mpc.gen = [
	1	40	0	10	-10	1	100	1	80	0;
];
mpc.branch = [
	1	2	0.01	0.1	0	50	50	50	0	0	1;
];
";

    #[test]
    fn hand_authored_case() {
        let imported = read_grid(TWO_BUS, true).unwrap();
        let g = &imported.grid;
        assert_eq!((g.bus_count(), g.line_count()), (2, 1));
        assert_eq!(g.demand(1), 40.0);
        assert_eq!(g.bus(0).generator.unwrap().max, 80.0);
        assert_eq!(g.line(0).capacity, 50.0);
        assert!(imported.warnings.is_empty());
    }

    #[test]
    fn inline_and_oneline_matrices() {
        let text = "mpc.bus = [1 3 0; 2 1 5];\nmpc.gen = [1 5 0 0 0 1 100 1 9 0];\nmpc.branch = [1 2 0 0.2 0 0 0 0 0 0 1];";
        let g = read_grid(text, false).unwrap().grid;
        assert_eq!(g.bus_count(), 2);
        assert_eq!(g.line(0).reactance, 0.2);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = TWO_BUS.replace("2\t1\t40", "2\t1\tforty");
        match parse_matpower(&bad) {
            Err(IngestError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        let dangling = TWO_BUS.replace("1\t2\t0.01", "1\t7\t0.01");
        assert!(matches!(read_grid(&dangling, false), Err(IngestError::Invalid(_))));
        let zero = TWO_BUS.replace("0.01\t0.1", "0.01\t0");
        assert!(read_grid(&zero, false).is_err());
    }

    #[test]
    fn negative_demand_and_reactance() {
        let text = TWO_BUS.replace("2\t1\t40", "2\t1\t-5").replace("0.01\t0.1", "0.01\t-0.1");
        let imported = read_grid(&text, false).unwrap();
        assert_eq!(imported.warnings.len(), 2);
        assert_eq!(imported.grid.bus(1).generator.unwrap().output, 5.0);
        assert_eq!(imported.grid.line(0).reactance, 0.1);
    }

    #[test]
    fn out_of_service_rows_dropped() {
        let text = TWO_BUS.replace("0\t0\t1;\n];", "0\t0\t1;\n\t1\t2\t0\t0.3\t0\t0\t0\t0\t0\t0\t0;\n];");
        assert_eq!(read_grid(&text, false).unwrap().grid.line_count(), 1);
    }
}
