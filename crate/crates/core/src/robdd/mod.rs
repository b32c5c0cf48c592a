// SPDX-License-Identifier: Apache-2.0
//! Reduced ordered BDDs without complement edges.
//!
//! Nodes are hash-consed per variable. Each node records its decision
//! variable rather than its level, so adjacent-level swaps can rewrite nodes
//! in place and every [`NodeRef`] keeps denoting the same function across
//! reordering. Freed slots are recycled by an explicit mark-and-sweep.

mod label;
mod reorder;

pub use label::{generate_label, Heuristic, LabelConfig, LabelReport};
pub use reorder::{brute_force_optimal_order, GaParams, BRUTE_FORCE_MAX_INPUTS};

pub use crate::order::VarOrder;

use std::collections::HashMap;

use crate::blif::{Lit, Netlist};

pub const DEFAULT_NODE_CAP: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BddError {
    #[error("BDD node limit of {0} exceeded")]
    NodeLimit(usize),
    #[error("order covers {got} variables, circuit has {expected} inputs")]
    OrderMismatch { expected: usize, got: usize },
    #[error("exhaustive search supports at most {max} inputs, circuit has {got}")]
    TooManyInputs { max: usize, got: usize },
}

/// Handle to a node. `FALSE` and `TRUE` are the terminals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef(u32);

impl NodeRef {
    pub const FALSE: NodeRef = NodeRef(0);
    pub const TRUE: NodeRef = NodeRef(1);

    pub fn constant(value: bool) -> NodeRef {
        if value {
            NodeRef::TRUE
        } else {
            NodeRef::FALSE
        }
    }

    pub fn is_terminal(self) -> bool {
        self.0 < 2
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

const TERMINAL: u32 = u32::MAX;
const FREE: u32 = u32::MAX - 1;

#[derive(Debug, Clone, Copy)]
struct Node {
    var: u32,
    low: NodeRef,
    high: NodeRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Op {
    And,
    Or,
    Xor,
    Not,
}

/// Read-only view of one internal node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeView {
    pub var: usize,
    pub level: usize,
    pub low: NodeRef,
    pub high: NodeRef,
}

#[derive(Debug, Clone)]
pub struct BddManager {
    nodes: Vec<Node>,
    free: Vec<u32>,
    live: usize,
    unique: Vec<HashMap<(NodeRef, NodeRef), NodeRef>>,
    var_at_level: Vec<usize>,
    level_of_var: Vec<usize>,
    cache: HashMap<(Op, NodeRef, NodeRef), NodeRef>,
    node_cap: usize,
    marks: Vec<u32>,
    epoch: u32,
}

impl BddManager {
    pub fn new(order: &VarOrder) -> BddManager {
        BddManager::with_cap(order, DEFAULT_NODE_CAP)
    }

    pub fn with_cap(order: &VarOrder, node_cap: usize) -> BddManager {
        let n = order.len();
        let terminal = Node {
            var: TERMINAL,
            low: NodeRef::FALSE,
            high: NodeRef::FALSE,
        };
        BddManager {
            nodes: vec![terminal; 2],
            free: Vec::new(),
            live: 0,
            unique: vec![HashMap::new(); n],
            var_at_level: order.as_slice().to_vec(),
            level_of_var: order.positions(),
            cache: HashMap::new(),
            node_cap,
            marks: vec![0; 2],
            epoch: 0,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.var_at_level.len()
    }

    pub fn order(&self) -> VarOrder {
        VarOrder::new(self.var_at_level.clone()).expect("manager order is a permutation")
    }

    pub fn node_cap(&self) -> usize {
        self.node_cap
    }

    /// Allocated internal nodes, reachable or not.
    pub fn allocated(&self) -> usize {
        self.live
    }

    pub fn level_of_var(&self, var: usize) -> usize {
        self.level_of_var[var]
    }

    pub fn var_at_level(&self, level: usize) -> usize {
        self.var_at_level[level]
    }

    pub fn level(&self, f: NodeRef) -> usize {
        let var = self.nodes[f.index()].var;
        if var == TERMINAL {
            self.num_vars()
        } else {
            self.level_of_var[var as usize]
        }
    }

    pub fn node(&self, f: NodeRef) -> Option<NodeView> {
        if f.is_terminal() {
            return None;
        }
        let n = self.nodes[f.index()];
        Some(NodeView {
            var: n.var as usize,
            level: self.level_of_var[n.var as usize],
            low: n.low,
            high: n.high,
        })
    }

    /// Number of internal nodes labelled with `var`, garbage included.
    pub fn nodes_with_var(&self, var: usize) -> usize {
        self.unique[var].len()
    }

    pub fn var(&mut self, v: usize) -> Result<NodeRef, BddError> {
        self.mk(v, NodeRef::FALSE, NodeRef::TRUE)
    }

    /// Hash-consed node constructor; returns `low` when both children agree.
    pub fn mk(&mut self, var: usize, low: NodeRef, high: NodeRef) -> Result<NodeRef, BddError> {
        if low == high {
            return Ok(low);
        }
        debug_assert!(self.level(low) > self.level_of_var[var]);
        debug_assert!(self.level(high) > self.level_of_var[var]);
        if let Some(&r) = self.unique[var].get(&(low, high)) {
            return Ok(r);
        }
        if self.live >= self.node_cap {
            return Err(BddError::NodeLimit(self.node_cap));
        }
        Ok(self.alloc(var, low, high))
    }

    fn alloc(&mut self, var: usize, low: NodeRef, high: NodeRef) -> NodeRef {
        let node = Node {
            var: var as u32,
            low,
            high,
        };
        let r = match self.free.pop() {
            Some(slot) => {
                self.nodes[slot as usize] = node;
                NodeRef(slot)
            }
            None => {
                self.nodes.push(node);
                self.marks.push(0);
                NodeRef((self.nodes.len() - 1) as u32)
            }
        };
        self.live += 1;
        self.unique[var].insert((low, high), r);
        r
    }

    fn cofactors(&self, f: NodeRef, level: usize) -> (NodeRef, NodeRef) {
        if self.level(f) == level {
            let n = self.nodes[f.index()];
            (n.low, n.high)
        } else {
            (f, f)
        }
    }

    pub fn not(&mut self, f: NodeRef) -> Result<NodeRef, BddError> {
        if f == NodeRef::FALSE {
            return Ok(NodeRef::TRUE);
        }
        if f == NodeRef::TRUE {
            return Ok(NodeRef::FALSE);
        }
        let key = (Op::Not, f, NodeRef::FALSE);
        if let Some(&r) = self.cache.get(&key) {
            return Ok(r);
        }
        let n = self.nodes[f.index()];
        let low = self.not(n.low)?;
        let high = self.not(n.high)?;
        let r = self.mk(n.var as usize, low, high)?;
        self.cache.insert(key, r);
        Ok(r)
    }

    pub fn and(&mut self, f: NodeRef, g: NodeRef) -> Result<NodeRef, BddError> {
        self.apply(Op::And, f, g)
    }

    pub fn or(&mut self, f: NodeRef, g: NodeRef) -> Result<NodeRef, BddError> {
        self.apply(Op::Or, f, g)
    }

    pub fn xor(&mut self, f: NodeRef, g: NodeRef) -> Result<NodeRef, BddError> {
        self.apply(Op::Xor, f, g)
    }

    fn apply(&mut self, op: Op, f: NodeRef, g: NodeRef) -> Result<NodeRef, BddError> {
        use NodeRef as R;
        match op {
            Op::And => {
                if f == R::FALSE || g == R::FALSE {
                    return Ok(R::FALSE);
                }
                if f == R::TRUE || f == g {
                    return Ok(g);
                }
                if g == R::TRUE {
                    return Ok(f);
                }
            }
            Op::Or => {
                if f == R::TRUE || g == R::TRUE {
                    return Ok(R::TRUE);
                }
                if f == R::FALSE || f == g {
                    return Ok(g);
                }
                if g == R::FALSE {
                    return Ok(f);
                }
            }
            Op::Xor => {
                if f == g {
                    return Ok(R::FALSE);
                }
                if f == R::FALSE {
                    return Ok(g);
                }
                if g == R::FALSE {
                    return Ok(f);
                }
                if f == R::TRUE {
                    return self.not(g);
                }
                if g == R::TRUE {
                    return self.not(f);
                }
            }
            Op::Not => unreachable!(),
        }
        let (f, g) = if f <= g { (f, g) } else { (g, f) };
        let key = (op, f, g);
        if let Some(&r) = self.cache.get(&key) {
            return Ok(r);
        }
        let level = self.level(f).min(self.level(g));
        let (f0, f1) = self.cofactors(f, level);
        let (g0, g1) = self.cofactors(g, level);
        let low = self.apply(op, f0, g0)?;
        let high = self.apply(op, f1, g1)?;
        let r = self.mk(self.var_at_level[level], low, high)?;
        self.cache.insert(key, r);
        Ok(r)
    }

    /// Evaluates `f` under an assignment indexed by variable.
    pub fn eval(&self, mut f: NodeRef, assignment: &[bool]) -> bool {
        while !f.is_terminal() {
            let n = self.nodes[f.index()];
            f = if assignment[n.var as usize] { n.high } else { n.low };
        }
        f == NodeRef::TRUE
    }

    fn next_epoch(&mut self) -> u32 {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.marks.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
        self.epoch
    }

    /// Distinct nodes reachable from `roots`, terminals included.
    pub fn node_count(&mut self, roots: &[NodeRef]) -> usize {
        let epoch = self.next_epoch();
        let mut count = 0;
        let mut stack: Vec<NodeRef> = roots.to_vec();
        while let Some(f) = stack.pop() {
            let i = f.index();
            if self.marks[i] == epoch {
                continue;
            }
            self.marks[i] = epoch;
            count += 1;
            if !f.is_terminal() {
                let n = self.nodes[i];
                stack.push(n.low);
                stack.push(n.high);
            }
        }
        count
    }

    /// Reachable internal nodes in children-before-parents order.
    pub fn postorder(&self, roots: &[NodeRef]) -> Vec<NodeRef> {
        let mut seen = vec![false; self.nodes.len()];
        let mut out = Vec::new();
        let mut stack: Vec<(NodeRef, bool)> = roots.iter().rev().map(|&r| (r, false)).collect();
        while let Some((f, expanded)) = stack.pop() {
            if f.is_terminal() {
                continue;
            }
            if expanded {
                out.push(f);
                continue;
            }
            if std::mem::replace(&mut seen[f.index()], true) {
                continue;
            }
            let n = self.nodes[f.index()];
            stack.push((f, true));
            stack.push((n.high, false));
            stack.push((n.low, false));
        }
        out
    }

    /// Reachable internal nodes per variable.
    pub fn var_profile(&mut self, roots: &[NodeRef]) -> Vec<usize> {
        let mut counts = vec![0; self.num_vars()];
        for f in self.postorder(roots) {
            counts[self.nodes[f.index()].var as usize] += 1;
        }
        counts
    }

    /// Frees every node not reachable from `roots` and rebuilds the tables.
    pub fn collect_garbage(&mut self, roots: &[NodeRef]) {
        let epoch = self.next_epoch();
        let mut stack: Vec<NodeRef> = roots.to_vec();
        while let Some(f) = stack.pop() {
            let i = f.index();
            if self.marks[i] == epoch {
                continue;
            }
            self.marks[i] = epoch;
            if !f.is_terminal() {
                let n = self.nodes[i];
                stack.push(n.low);
                stack.push(n.high);
            }
        }
        for table in &mut self.unique {
            table.clear();
        }
        self.free.clear();
        self.live = 0;
        for i in 2..self.nodes.len() {
            let n = self.nodes[i];
            if n.var == FREE {
                self.free.push(i as u32);
            } else if self.marks[i] != epoch {
                self.nodes[i].var = FREE;
                self.free.push(i as u32);
            } else {
                self.live += 1;
                self.unique[n.var as usize].insert((n.low, n.high), NodeRef(i as u32));
            }
        }
        // reuse low slots first
        self.free.reverse();
        self.cache.clear();
        debug_assert_eq!(self.check_invariants(), Ok(()));
    }

    /// Collects garbage once allocation passes half the cap.
    pub fn maybe_collect(&mut self, roots: &[NodeRef]) {
        if self.live > self.node_cap / 2 {
            self.collect_garbage(roots);
        }
    }

    /// Canonicity and ordering checks over every allocated node.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = 0;
        for (i, n) in self.nodes.iter().enumerate().skip(2) {
            if n.var == FREE {
                continue;
            }
            seen += 1;
            self.check_node(NodeRef(i as u32))?;
        }
        let table_total: usize = self.unique.iter().map(|t| t.len()).sum();
        if seen != self.live || table_total != self.live {
            return Err(format!(
                "{seen} allocated nodes, {} counted live, {table_total} in unique tables",
                self.live
            ));
        }
        Ok(())
    }

    fn check_node(&self, f: NodeRef) -> Result<(), String> {
        let n = self.nodes[f.index()];
        let var = n.var as usize;
        if n.low == n.high {
            return Err(format!("node {} is redundant", f.0));
        }
        let level = self.level_of_var[var];
        for child in [n.low, n.high] {
            if self.nodes[child.index()].var == FREE {
                return Err(format!("node {} points at a freed slot", f.0));
            }
            if self.level(child) <= level {
                return Err(format!("node {} violates the order", f.0));
            }
        }
        match self.unique[var].get(&(n.low, n.high)) {
            Some(&r) if r == f => Ok(()),
            _ => Err(format!("node {} missing from its unique table", f.0)),
        }
    }

    fn check_levels(&self, levels: &[usize]) -> Result<(), String> {
        for &l in levels {
            let var = self.var_at_level[l];
            for &r in self.unique[var].values() {
                self.check_node(r)?;
                if self.nodes[r.index()].var as usize != var {
                    return Err(format!("node {} filed under the wrong variable", r.0));
                }
            }
        }
        Ok(())
    }
}

/// Builds one BDD per primary output under `order` (position → input index).
pub fn build_from_netlist(
    netlist: &Netlist,
    order: &VarOrder,
) -> Result<(BddManager, Vec<NodeRef>), BddError> {
    build_from_netlist_with_cap(netlist, order, DEFAULT_NODE_CAP)
}

pub fn build_from_netlist_with_cap(
    netlist: &Netlist,
    order: &VarOrder,
    node_cap: usize,
) -> Result<(BddManager, Vec<NodeRef>), BddError> {
    if order.len() != netlist.num_inputs() {
        return Err(BddError::OrderMismatch {
            expected: netlist.num_inputs(),
            got: order.len(),
        });
    }
    let mut m = BddManager::with_cap(order, node_cap);
    let mut signal: HashMap<&str, NodeRef> = HashMap::new();
    for (i, pi) in netlist.primary_inputs.iter().enumerate() {
        let v = m.var(i)?;
        signal.insert(pi, v);
    }
    for g in netlist.topo_order() {
        let gate = &netlist.gates[g];
        let ins: Vec<NodeRef> = gate.inputs.iter().map(|i| signal[i.as_str()]).collect();
        let mut sum = NodeRef::FALSE;
        for cube in &gate.cover {
            let mut prod = NodeRef::TRUE;
            for (lit, &f) in cube.pattern.iter().zip(&ins) {
                prod = match lit {
                    Lit::One => m.and(prod, f)?,
                    Lit::Zero => {
                        let nf = m.not(f)?;
                        m.and(prod, nf)?
                    }
                    Lit::DontCare => prod,
                };
            }
            sum = m.or(sum, prod)?;
        }
        let out = if gate.polarity() || gate.cover.is_empty() {
            sum
        } else {
            m.not(sum)?
        };
        signal.insert(&gate.output, out);
        if m.live > m.node_cap / 2 {
            let held: Vec<NodeRef> = signal.values().copied().collect();
            m.collect_garbage(&held);
        }
    }
    let roots: Vec<NodeRef> = netlist
        .primary_outputs
        .iter()
        .map(|o| signal[o.as_str()])
        .collect();
    debug_assert_eq!(m.check_invariants(), Ok(()));
    Ok((m, roots))
}

/// Shared node count of the netlist's outputs under `order`.
pub fn count_for_order(netlist: &Netlist, order: &VarOrder) -> Result<usize, BddError> {
    let (mut m, roots) = build_from_netlist(netlist, order)?;
    Ok(m.node_count(&roots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blif::parse_blif;
    use crate::fixtures::PAIRS;

    fn order(v: &[usize]) -> VarOrder {
        VarOrder::new(v.to_vec()).unwrap()
    }

    #[test]
    fn pair_function_counts() {
        let n = parse_blif(PAIRS).unwrap();
        assert_eq!(count_for_order(&n, &order(&[0, 1, 2, 3, 4, 5])).unwrap(), 8);
        assert_eq!(count_for_order(&n, &order(&[0, 3, 1, 4, 2, 5])).unwrap(), 12);
        assert_eq!(count_for_order(&n, &order(&[0, 2, 4, 1, 3, 5])).unwrap(), 16);
    }

    #[test]
    fn constant_root_counts_one() {
        let n = parse_blif(".model k\n.inputs a\n.outputs one\n.names one\n1\n.end").unwrap();
        let (mut m, roots) = build_from_netlist(&n, &VarOrder::identity(1)).unwrap();
        assert_eq!(roots, vec![NodeRef::TRUE]);
        assert_eq!(m.node_count(&roots), 1);
        assert_eq!(m.node_count(&[NodeRef::TRUE]), 1);
    }

    #[test]
    fn build_matches_simulation() {
        let n = parse_blif(PAIRS).unwrap();
        let (m, roots) = build_from_netlist(&n, &order(&[5, 3, 1, 0, 2, 4])).unwrap();
        for mask in 0..64usize {
            let a: Vec<bool> = (0..6).map(|i| (mask >> i) & 1 == 1).collect();
            assert_eq!(m.eval(roots[0], &a), n.simulate(&a)[0]);
        }
    }

    #[test]
    fn node_cap_is_enforced() {
        let n = parse_blif(PAIRS).unwrap();
        let r = build_from_netlist_with_cap(&n, &order(&[0, 3, 1, 4, 2, 5]), 5);
        assert_eq!(r.err(), Some(BddError::NodeLimit(5)));
    }

    #[test]
    fn gc_keeps_roots() {
        let n = parse_blif(PAIRS).unwrap();
        let (mut m, roots) = build_from_netlist(&n, &VarOrder::identity(6)).unwrap();
        let before = m.node_count(&roots);
        m.collect_garbage(&roots);
        assert_eq!(m.allocated() + 2, before);
        assert_eq!(m.node_count(&roots), before);
        assert_eq!(m.check_invariants(), Ok(()));
    }
}
