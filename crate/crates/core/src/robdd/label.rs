// SPDX-License-Identifier: Apache-2.0
//! Supervisory labels: the best order found by a fixed set of heuristics.

use super::{build_from_netlist_with_cap, BddError, GaParams, VarOrder, DEFAULT_NODE_CAP};
use crate::blif::Netlist;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Heuristic {
    Natural,
    Sifting,
    Genetic,
}

impl Heuristic {
    pub const ALL: [Heuristic; 3] = [Heuristic::Natural, Heuristic::Sifting, Heuristic::Genetic];

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::Natural => "natural",
            Heuristic::Sifting => "sifting",
            Heuristic::Genetic => "ga",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelConfig {
    pub ga: GaParams,
    pub seed: u64,
    pub node_cap: usize,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig {
            ga: GaParams::default(),
            seed: 42,
            node_cap: DEFAULT_NODE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelReport {
    pub order: VarOrder,
    pub count: usize,
    pub winner: Heuristic,
    /// Per heuristic, in [`Heuristic::ALL`] order.
    pub orders: Vec<VarOrder>,
    pub counts: Vec<usize>,
}

impl LabelReport {
    pub fn count_of(&self, h: Heuristic) -> usize {
        self.counts[Heuristic::ALL.iter().position(|&x| x == h).unwrap()]
    }
}

/// Natural order, sifting from natural, then the GA seeded with natural.
/// The smallest count wins; ties go to the earlier heuristic.
///
/// Both searches start from the natural-order diagram, so if that build
/// exceeds the cap every candidate has failed and the error is returned.
pub fn generate_label(netlist: &Netlist, config: &LabelConfig) -> Result<LabelReport, BddError> {
    let n = netlist.num_inputs();
    let natural = VarOrder::identity(n);
    let (mut base, roots) = build_from_netlist_with_cap(netlist, &natural, config.node_cap)?;
    let natural_count = base.node_count(&roots);

    let mut sift = base.clone();
    let sift_order = sift.sift_reorder(&roots);
    let sift_count = sift.node_count(&roots);
    drop(sift);

    let ga_order = base.ga_reorder(&roots, &config.ga, config.seed);
    let ga_count = base.node_count(&roots);

    let orders = vec![natural, sift_order, ga_order];
    let counts = vec![natural_count, sift_count, ga_count];
    let mut best = 0;
    for i in 1..3 {
        if counts[i] < counts[best] {
            best = i;
        }
    }
    Ok(LabelReport {
        order: orders[best].clone(),
        count: counts[best],
        winner: Heuristic::ALL[best],
        orders,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blif::parse_blif;
    use crate::fixtures::PAIRS;
    use crate::robdd::count_for_order;

    #[test]
    fn pair_function_label_is_optimal() {
        let n = parse_blif(PAIRS).unwrap();
        let r = generate_label(&n, &LabelConfig::default()).unwrap();
        assert_eq!(r.count, 8);
        assert_eq!(r.winner, Heuristic::Natural);
        assert_eq!(count_for_order(&n, &r.order).unwrap(), 8);
    }

    const GA_WINS: &str = ".model ga_wins\n.inputs x0 x1 x2 x3 x4 x5 x6\n.outputs n8 n9\n\
        .names x0 n0\n0 1\n.names x3 x5 n0 n1\n110 1\n-00 1\n--1 1\n\
        .names x5 x6 n2\n-0 1\n00 1\n10 1\n.names x1 x4 n3\n11 1\n.names n3 n4\n0 0\n\
        .names n1 n3 n4 n5\n101 0\n.names n1 n3 n5 n6\n0-- 1\n.names n1 n2 n6 n7\n00- 0\n110 0\n\
        .names n2 n3 n6 n8\n-10 1\n101 1\n.names n4 n7 n9\n-1 1\n.end";

    #[test]
    fn ga_order_wins_when_it_beats_sifting() {
        let n = parse_blif(GA_WINS).unwrap();
        let r = generate_label(&n, &LabelConfig::default()).unwrap();
        assert_eq!(r.counts, vec![16, 14, 12]);
        assert_eq!(r.winner, Heuristic::Genetic);
        assert_eq!(r.order, r.orders[2]);
        let (_, optimum) = crate::robdd::brute_force_optimal_order(&n).unwrap();
        assert_eq!(optimum, 12);
    }

    #[test]
    fn and2_keeps_natural() {
        let n = parse_blif(".model t\n.inputs a b\n.outputs o\n.names a b o\n11 1\n.end").unwrap();
        let r = generate_label(&n, &LabelConfig::default()).unwrap();
        assert_eq!(r.counts, vec![4, 4, 4]);
        assert_eq!(r.order, VarOrder::identity(2));
    }
}
