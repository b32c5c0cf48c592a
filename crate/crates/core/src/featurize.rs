// SPDX-License-Identifier: Apache-2.0
//! Netlist → graph conversion with truth-table and structural node features.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::blif::{LogicGate, Netlist};

pub const DEFAULT_TABLE_LEN: usize = 16;
/// Rank, depth, fan-in, fan-out.
pub const STRUCTURAL_FEATURES: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeatureError {
    #[error("table length {0} must be a power of two and at least 4")]
    BadTableLength(usize),
    #[error("gate `{gate}` has {arity} inputs, which needs more than {len} table entries")]
    ArityTooLarge { gate: String, arity: usize, len: usize },
    #[error("graph text, line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureConfig {
    pub table_len: usize,
    pub normalize_structural: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            table_len: DEFAULT_TABLE_LEN,
            normalize_structural: true,
        }
    }
}

impl FeatureConfig {
    pub fn width(&self) -> usize {
        self.table_len + STRUCTURAL_FEATURES
    }

    pub fn max_arity(&self) -> usize {
        self.table_len.trailing_zeros() as usize
    }

    fn check(&self) -> Result<(), FeatureError> {
        if self.table_len < 4 || !self.table_len.is_power_of_two() {
            return Err(FeatureError::BadTableLength(self.table_len));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Structural {
    pub rank: usize,
    pub depth: usize,
    pub fanin: usize,
    pub fanout: usize,
}

impl Structural {
    fn as_array(&self) -> [usize; STRUCTURAL_FEATURES] {
        [self.rank, self.depth, self.fanin, self.fanout]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitGraph {
    /// PI names in declaration order, then gate outputs in topological order.
    pub node_ids: Vec<String>,
    /// Driver → consumer.
    pub edges: Vec<(usize, usize)>,
    /// One row of `table_len + 4` values per node.
    pub features: Vec<Vec<f64>>,
    pub structural: Vec<Structural>,
    pub pi_positions: Vec<usize>,
    pub table_len: usize,
}

impl CircuitGraph {
    pub fn num_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn num_pis(&self) -> usize {
        self.pi_positions.len()
    }

    pub fn width(&self) -> usize {
        self.table_len + STRUCTURAL_FEATURES
    }
}

/// Output bits of `gate` over all input combinations, all-zeros first and
/// the leftmost input most significant, zero-padded to `len`.
pub fn truth_table_embedding(gate: &LogicGate, len: usize) -> Result<Vec<u8>, FeatureError> {
    let arity = gate.arity();
    if arity >= usize::BITS as usize || (1usize << arity) > len {
        return Err(FeatureError::ArityTooLarge {
            gate: gate.output.clone(),
            arity,
            len,
        });
    }
    let mut v = vec![0u8; len];
    let mut bits = vec![false; arity];
    for (i, slot) in v.iter_mut().enumerate().take(1 << arity) {
        for (k, b) in bits.iter_mut().enumerate() {
            *b = (i >> (arity - 1 - k)) & 1 == 1;
        }
        *slot = gate.eval(&bits) as u8;
    }
    Ok(v)
}

/// Per-node rank, depth, fan-in and fan-out in graph node order.
pub fn structural_features(netlist: &Netlist) -> Vec<Structural> {
    let (ids, edges) = skeleton(netlist);
    structural_from(netlist, &ids, &edges)
}

fn skeleton(netlist: &Netlist) -> (Vec<String>, Vec<(usize, usize)>) {
    let mut ids: Vec<String> = netlist.primary_inputs.clone();
    let topo = netlist.topo_order();
    ids.extend(topo.iter().map(|&g| netlist.gates[g].output.clone()));
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut edges = Vec::new();
    for (k, &g) in topo.iter().enumerate() {
        let dst = netlist.num_inputs() + k;
        for inp in &netlist.gates[g].inputs {
            edges.push((index[inp.as_str()], dst));
        }
    }
    (ids, edges)
}

fn structural_from(netlist: &Netlist, ids: &[String], edges: &[(usize, usize)]) -> Vec<Structural> {
    let mut s: Vec<Structural> = (0..ids.len())
        .map(|rank| Structural {
            rank,
            ..Structural::default()
        })
        .collect();
    // edges are grouped by destination in topological order
    for &(u, v) in edges {
        s[v].fanin += 1;
        s[u].fanout += 1;
        s[v].depth = s[v].depth.max(s[u].depth + 1);
    }
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    for po in &netlist.primary_outputs {
        if let Some(&i) = index.get(po.as_str()) {
            s[i].fanout += 1;
        }
    }
    s
}

pub fn blif2graph(netlist: &Netlist, config: &FeatureConfig) -> Result<CircuitGraph, FeatureError> {
    config.check()?;
    let len = config.table_len;
    let (ids, edges) = skeleton(netlist);
    let structural = structural_from(netlist, &ids, &edges);
    let pis = netlist.num_inputs();

    let mut tables = vec![vec![0u8; len]; pis];
    for g in netlist.topo_order() {
        tables.push(truth_table_embedding(&netlist.gates[g], len)?);
    }

    let raw: Vec<[usize; STRUCTURAL_FEATURES]> = structural.iter().map(Structural::as_array).collect();
    let mut lo = [usize::MAX; STRUCTURAL_FEATURES];
    let mut hi = [0usize; STRUCTURAL_FEATURES];
    for r in &raw {
        for k in 0..STRUCTURAL_FEATURES {
            lo[k] = lo[k].min(r[k]);
            hi[k] = hi[k].max(r[k]);
        }
    }
    let features = tables
        .iter()
        .zip(&raw)
        .map(|(t, r)| {
            let mut row: Vec<f64> = t.iter().map(|&b| b as f64).collect();
            for k in 0..STRUCTURAL_FEATURES {
                let x = if !config.normalize_structural {
                    r[k] as f64
                } else if hi[k] > lo[k] {
                    (r[k] - lo[k]) as f64 / (hi[k] - lo[k]) as f64
                } else {
                    0.0
                };
                row.push(x);
            }
            row
        })
        .collect();

    Ok(CircuitGraph {
        node_ids: ids,
        edges,
        features,
        structural,
        pi_positions: (0..pis).collect(),
        table_len: len,
    })
}

/// Header `nodes edges table_len pis`, then one feature row per node, then
/// one `src dst` line per edge.
pub fn write_graph(g: &CircuitGraph) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {} {} {}", g.num_nodes(), g.edges.len(), g.table_len, g.num_pis());
    for row in &g.features {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
        let _ = writeln!(s, "{}", cells.join(" "));
    }
    for (u, v) in &g.edges {
        let _ = writeln!(s, "{u} {v}");
    }
    s
}

/// Inverse of [`write_graph`]. Node names and raw structural counts are not
/// part of the format; names become `n{i}`.
pub fn read_graph(text: &str) -> Result<CircuitGraph, FeatureError> {
    let err = |line: usize, msg: &str| FeatureError::Parse {
        line,
        msg: msg.to_string(),
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "missing header"))?;
    let h: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| err(1, "bad header field")))
        .collect::<Result<_, _>>()?;
    let [nodes, nedges, table_len, pis] = h[..] else {
        return Err(err(1, "header needs 4 fields"));
    };
    let width = table_len + STRUCTURAL_FEATURES;
    let mut features = Vec::with_capacity(nodes);
    for _ in 0..nodes {
        let (i, l) = lines.next().ok_or_else(|| err(0, "truncated feature rows"))?;
        let row: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| err(i + 1, "bad feature value")))
            .collect::<Result<_, _>>()?;
        if row.len() != width {
            return Err(err(i + 1, "wrong feature width"));
        }
        features.push(row);
    }
    let mut edges = Vec::with_capacity(nedges);
    for _ in 0..nedges {
        let (i, l) = lines.next().ok_or_else(|| err(0, "truncated edge list"))?;
        let e: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| err(i + 1, "bad edge")))
            .collect::<Result<_, _>>()?;
        match e[..] {
            [u, v] if u < nodes && v < nodes => edges.push((u, v)),
            _ => return Err(err(i + 1, "bad edge")),
        }
    }
    Ok(CircuitGraph {
        node_ids: (0..nodes).map(|i| format!("n{i}")).collect(),
        edges,
        features,
        structural: Vec::new(),
        pi_positions: (0..pis).collect(),
        table_len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blif::{parse_blif, Cube};

    #[test]
    fn embeddings() {
        let and2 = LogicGate::new(&["a", "b"], "o", vec![Cube::new("11", true)]);
        assert_eq!(truth_table_embedding(&and2, 8).unwrap(), vec![0, 0, 0, 1, 0, 0, 0, 0]);
        let or2 = LogicGate::new(&["a", "b"], "o", vec![Cube::new("1-", true), Cube::new("-1", true)]);
        assert_eq!(truth_table_embedding(&or2, 4).unwrap(), vec![0, 1, 1, 1]);
        let inv = LogicGate::new(&["a"], "o", vec![Cube::new("0", true)]);
        assert_eq!(truth_table_embedding(&inv, 4).unwrap(), vec![1, 0, 0, 0]);
        // leftmost input is the most significant bit
        let a_not_b = LogicGate::new(&["a", "b"], "o", vec![Cube::new("10", true)]);
        assert_eq!(truth_table_embedding(&a_not_b, 4).unwrap(), vec![0, 0, 1, 0]);
        let wide = LogicGate::new(&["a", "b", "c"], "o", vec![Cube::new("111", true)]);
        assert!(matches!(
            truth_table_embedding(&wide, 4),
            Err(FeatureError::ArityTooLarge { arity: 3, .. })
        ));
    }

    #[test]
    fn and2_graph() {
        let n = parse_blif(".model t\n.inputs a b\n.outputs o\n.names a b o\n11 1\n.end").unwrap();
        let cfg = FeatureConfig {
            table_len: 4,
            normalize_structural: false,
        };
        let g = blif2graph(&n, &cfg).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.edges, vec![(0, 2), (1, 2)]);
        assert_eq!(g.features[2], vec![0.0, 0.0, 0.0, 1.0, 2.0, 1.0, 2.0, 1.0]);
        assert_eq!(g.features[0], vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn inverter_chain_depth() {
        let n = parse_blif(
            ".model c\n.inputs a\n.outputs d\n.names a b\n0 1\n.names b c\n0 1\n.names c d\n0 1\n.end",
        )
        .unwrap();
        let s = structural_features(&n);
        assert_eq!(s[3].depth, 3);
        assert_eq!(s[0].depth, 0);
        assert_eq!(s[0].fanin, 0);
        assert!(s[1..].iter().all(|x| x.rank > s[0].rank));
    }

    #[test]
    fn pi_only_graph() {
        let n = parse_blif(".model w\n.inputs a b\n.outputs a\n.end").unwrap();
        let g = blif2graph(&n, &FeatureConfig::default()).unwrap();
        assert_eq!(g.num_nodes(), 2);
        assert!(g.edges.is_empty());
        assert!(g.features.iter().all(|r| r.len() == 20));
    }

    #[test]
    fn text_round_trip() {
        let n = parse_blif(crate::fixtures::PAIRS).unwrap();
        let g = blif2graph(&n, &FeatureConfig::default()).unwrap();
        let text = write_graph(&g);
        let back = read_graph(&text).unwrap();
        assert_eq!(back.features, g.features);
        assert_eq!(back.edges, g.edges);
        assert_eq!(write_graph(&back), text);
        assert_eq!(g.num_nodes(), 6 + 4);
        assert!(g.structural[..6].iter().all(|s| s.fanout == 1));
    }
}
