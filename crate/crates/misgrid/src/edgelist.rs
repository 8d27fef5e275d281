//! Whitespace-separated edge lists (`u v` per line, `#` comments).

use std::collections::BTreeMap;

use misgrid_core::SocialGraph;

use crate::error::IngestError;

/// Read an undirected edge list. Each pair becomes two directed edges with
/// weight 0; node labels are the integers in the file, numbered densely in
/// ascending label order. Self-loops and repeated pairs are ignored.
pub fn parse_edge_list(text: &str) -> Result<SocialGraph, IngestError> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let mut next = || -> Result<u64, IngestError> {
            let tok = toks.next().ok_or(IngestError::Parse { line: idx + 1, message: "expected two node ids".into() })?;
            tok.parse().map_err(|_| IngestError::Parse { line: idx + 1, message: format!("bad node id {tok:?}") })
        };
        let (u, v) = (next()?, next()?);
        pairs.push((u, v));
    }
    let mut ids: BTreeMap<u64, usize> = BTreeMap::new();
    for &(u, v) in &pairs {
        ids.insert(u, 0);
        ids.insert(v, 0);
    }
    for (i, id) in ids.values_mut().enumerate() {
        *id = i;
    }
    let mut graph = SocialGraph::from_labels(ids.keys().copied().collect());
    for (u, v) in pairs {
        let (a, b) = (ids[&u], ids[&v]);
        if a == b || graph.has_edge(a, b) {
            continue;
        }
        graph.add_edge(a, b, 0.0)?;
        if !graph.has_edge(b, a) {
            graph.add_edge(b, a, 0.0)?;
        }
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle() {
        let g = parse_edge_list("# tri\n0 1\n1 2\n0 2\n").unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (3, 6));
    }

    #[test]
    fn empty_and_bad() {
        assert_eq!(parse_edge_list("").unwrap().node_count(), 0);
        match parse_edge_list("0 1\n1 x\n") {
            Err(IngestError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sparse_labels_are_kept() {
        let g = parse_edge_list("10 30\n30 10\n").unwrap();
        assert_eq!(g.labels(), &[10, 30]);
        assert_eq!(g.edge_count(), 2);
    }
}
