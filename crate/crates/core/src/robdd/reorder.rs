// SPDX-License-Identifier: Apache-2.0
//! Reordering: level swaps, sifting, a permutation GA and exhaustive search.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{build_from_netlist, BddError, BddManager, Node, NodeRef, VarOrder};
use crate::blif::Netlist;

/// Largest input count accepted by [`brute_force_optimal_order`].
pub const BRUTE_FORCE_MAX_INPUTS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaParams {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub mutation_rate: f64,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            population: 32,
            generations: 50,
            tournament: 3,
            mutation_rate: 0.2,
        }
    }
}

impl BddManager {
    /// Exchanges the variables at `level` and `level + 1` in place.
    ///
    /// Fails without touching the manager when the swap could exceed the
    /// node cap.
    pub fn swap_adjacent_levels(&mut self, level: usize) -> Result<(), BddError> {
        let n = self.num_vars();
        assert!(level + 1 < n, "swap level {level} out of range for {n} variables");
        let x = self.var_at_level[level];
        if self.live + 2 * self.unique[x].len() > self.node_cap {
            return Err(BddError::NodeLimit(self.node_cap));
        }
        self.swap_unchecked(level);
        Ok(())
    }

    fn swap_unchecked(&mut self, level: usize) {
        let x = self.var_at_level[level];
        let y = self.var_at_level[level + 1];
        let yv = y as u32;
        let is_y = |m: &BddManager, f: NodeRef| !f.is_terminal() && m.nodes[f.index()].var == yv;

        let rewrite: Vec<NodeRef> = self.unique[x]
            .values()
            .copied()
            .filter(|&f| {
                let node = self.nodes[f.index()];
                is_y(self, node.low) || is_y(self, node.high)
            })
            .collect();
        for &f in &rewrite {
            let node = self.nodes[f.index()];
            self.unique[x].remove(&(node.low, node.high));
        }

        self.var_at_level.swap(level, level + 1);
        self.level_of_var[x] = level + 1;
        self.level_of_var[y] = level;

        for f in rewrite {
            let node = self.nodes[f.index()];
            let split = |m: &BddManager, g: NodeRef| {
                if is_y(m, g) {
                    let c = m.nodes[g.index()];
                    (c.low, c.high)
                } else {
                    (g, g)
                }
            };
            let (f00, f01) = split(self, node.low);
            let (f10, f11) = split(self, node.high);
            let low = self.mk_unbounded(x, f00, f10);
            let high = self.mk_unbounded(x, f01, f11);
            debug_assert_ne!(low, high);
            self.nodes[f.index()] = Node {
                var: yv,
                low,
                high,
            };
            let prev = self.unique[y].insert((low, high), f);
            debug_assert!(prev.is_none());
        }
        debug_assert_eq!(self.check_levels(&[level, level + 1]), Ok(()));
    }

    fn mk_unbounded(&mut self, var: usize, low: NodeRef, high: NodeRef) -> NodeRef {
        if low == high {
            return low;
        }
        if let Some(&r) = self.unique[var].get(&(low, high)) {
            return r;
        }
        self.alloc(var, low, high)
    }

    fn collect_if_bloated(&mut self, roots: &[NodeRef], reachable: usize) {
        if self.live > self.node_cap / 2 || self.live > 4 * reachable + 4096 {
            self.collect_garbage(roots);
        }
    }

    /// Moves the manager to `target` with adjacent swaps.
    pub fn reorder_to(&mut self, target: &VarOrder, roots: &[NodeRef]) -> Result<(), BddError> {
        assert_eq!(target.len(), self.num_vars());
        for (p, &v) in target.as_slice().iter().enumerate() {
            let mut cur = self.level_of_var[v];
            while cur > p {
                self.maybe_collect(roots);
                self.swap_adjacent_levels(cur - 1)?;
                cur -= 1;
            }
        }
        Ok(())
    }

    /// Sifting: each variable in turn visits every level through adjacent
    /// swaps and is parked where the shared node count was smallest, the
    /// smallest such level on ties. Variables are processed in decreasing
    /// order of how many reachable nodes they label.
    pub fn sift_reorder(&mut self, roots: &[NodeRef]) -> VarOrder {
        let n = self.num_vars();
        if n < 2 {
            return self.order();
        }
        self.collect_garbage(roots);
        let profile = self.var_profile(roots);
        let mut vars: Vec<usize> = (0..n).collect();
        vars.sort_by_key(|&v| (std::cmp::Reverse(profile[v]), v));

        for v in vars {
            let start = self.level_of_var[v];
            let mut sizes: Vec<Option<usize>> = vec![None; n];
            sizes[start] = Some(self.node_count(roots));
            let mut pos = start;

            let down_first = n - 1 - start < start;
            let mut blocked = false;
            for phase in 0..2 {
                if blocked {
                    break;
                }
                let down = (phase == 0) == down_first;
                loop {
                    let next = if down {
                        if pos + 1 >= n {
                            break;
                        }
                        pos
                    } else {
                        if pos == 0 {
                            break;
                        }
                        pos - 1
                    };
                    let reachable = sizes.iter().flatten().copied().min().unwrap_or(0);
                    self.collect_if_bloated(roots, reachable);
                    if self.swap_adjacent_levels(next).is_err() {
                        blocked = true;
                        break;
                    }
                    pos = if down { pos + 1 } else { pos - 1 };
                    if sizes[pos].is_none() {
                        sizes[pos] = Some(self.node_count(roots));
                    }
                }
            }

            let best = (0..n)
                .filter_map(|l| sizes[l].map(|s| (s, l)))
                .min()
                .map(|(_, l)| l)
                .unwrap();
            // the return path only revisits levels seen during exploration
            while pos < best {
                self.swap_unchecked(pos);
                pos += 1;
            }
            while pos > best {
                self.swap_unchecked(pos - 1);
                pos -= 1;
            }
            self.collect_garbage(roots);
        }
        debug_assert_eq!(self.check_invariants(), Ok(()));
        self.order()
    }

    /// Genetic search over orders: order crossover, swap mutation, tournament
    /// selection and one elite. Fitness is the shared node count. The
    /// manager's current order seeds the population, the rest is random.
    pub fn ga_reorder(&mut self, roots: &[NodeRef], params: &GaParams, seed: u64) -> VarOrder {
        assert!(params.population >= 2, "GA population must be at least 2");
        let n = self.num_vars();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut memo: HashMap<VarOrder, usize> = HashMap::new();

        let mut population: Vec<VarOrder> = Vec::with_capacity(params.population);
        population.push(self.order());
        while population.len() < params.population {
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(&mut rng);
            population.push(VarOrder::new(p).unwrap());
        }
        let mut fitness: Vec<usize> = population
            .iter()
            .map(|o| self.fitness(o, roots, &mut memo))
            .collect();
        let mut best = argmin(&fitness);
        let mut best_order = population[best].clone();
        let mut best_fit = fitness[best];

        for _ in 0..params.generations {
            let mut next = vec![best_order.clone()];
            while next.len() < params.population {
                let a = tournament(&fitness, params.tournament, &mut rng);
                let b = tournament(&fitness, params.tournament, &mut rng);
                let mut child = order_crossover(&population[a], &population[b], &mut rng);
                if n >= 2 && rng.gen::<f64>() < params.mutation_rate {
                    let i = rng.gen_range(0..n);
                    let j = rng.gen_range(0..n);
                    child.swap(i, j);
                }
                next.push(VarOrder::new(child).unwrap());
            }
            population = next;
            fitness = population
                .iter()
                .map(|o| self.fitness(o, roots, &mut memo))
                .collect();
            best = argmin(&fitness);
            if fitness[best] < best_fit {
                best_fit = fitness[best];
                best_order = population[best].clone();
            }
        }
        if self.reorder_to(&best_order, roots).is_err() {
            // the best order was reached before, so this only fails if the
            // cap changed in between
            log::warn!("could not return to the best GA order");
        }
        self.collect_garbage(roots);
        self.order()
    }

    fn fitness(&mut self, order: &VarOrder, roots: &[NodeRef], memo: &mut HashMap<VarOrder, usize>) -> usize {
        if let Some(&f) = memo.get(order) {
            return f;
        }
        let f = match self.reorder_to(order, roots) {
            Ok(()) => self.node_count(roots),
            Err(_) => usize::MAX,
        };
        memo.insert(order.clone(), f);
        f
    }
}

fn argmin(values: &[usize]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

fn tournament(fitness: &[usize], size: usize, rng: &mut ChaCha8Rng) -> usize {
    let mut best = rng.gen_range(0..fitness.len());
    for _ in 1..size.max(1) {
        let c = rng.gen_range(0..fitness.len());
        if fitness[c] < fitness[best] {
            best = c;
        }
    }
    best
}

/// OX1: keep a slice of the first parent, fill the rest in the second
/// parent's cyclic order starting after the slice.
pub(crate) fn order_crossover(a: &VarOrder, b: &VarOrder, rng: &mut impl Rng) -> Vec<usize> {
    let n = a.len();
    if n < 2 {
        return a.as_slice().to_vec();
    }
    let mut i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n);
    if i > j {
        std::mem::swap(&mut i, &mut j);
    }
    let mut child = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for p in i..=j {
        child[p] = a[p];
        used[a[p]] = true;
    }
    let mut fill = (j + 1) % n;
    for k in 0..n {
        let v = b[(j + 1 + k) % n];
        if used[v] {
            continue;
        }
        child[fill] = v;
        used[v] = true;
        fill = (fill + 1) % n;
    }
    child
}

/// Minimum shared node count over all input orders, with the
/// lexicographically smallest order attaining it.
///
/// Walks every permutation by adjacent transpositions (Steinhaus–Johnson–
/// Trotter), so each step is a single level swap on one manager.
pub fn brute_force_optimal_order(netlist: &Netlist) -> Result<(VarOrder, usize), BddError> {
    let n = netlist.num_inputs();
    if n > BRUTE_FORCE_MAX_INPUTS {
        return Err(BddError::TooManyInputs {
            max: BRUTE_FORCE_MAX_INPUTS,
            got: n,
        });
    }
    let (mut m, roots) = build_from_netlist(netlist, &VarOrder::identity(n))?;
    let mut best_count = m.node_count(&roots);
    let mut best_order = m.order();

    // perm[p] = variable at position p; dir: true = moving left
    let mut perm: Vec<usize> = (0..n).collect();
    let mut left = vec![true; n];
    loop {
        let mut mobile: Option<usize> = None;
        for p in 0..n {
            let v = perm[p];
            let q = if left[v] { p.checked_sub(1) } else { Some(p + 1).filter(|&q| q < n) };
            if let Some(q) = q {
                if perm[q] < v && mobile.is_none_or(|mp| perm[mp] < v) {
                    mobile = Some(p);
                }
            }
        }
        let Some(p) = mobile else { break };
        let v = perm[p];
        let q = if left[v] { p - 1 } else { p + 1 };
        perm.swap(p, q);
        m.collect_if_bloated(&roots, best_count);
        m.swap_adjacent_levels(p.min(q))?;
        for w in (v + 1)..n {
            left[w] = !left[w];
        }
        let c = m.node_count(&roots);
        let order = m.order();
        if c < best_count || (c == best_count && order < best_order) {
            best_count = c;
            best_order = order;
        }
    }
    Ok((best_order, best_count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blif::parse_blif;
    use crate::robdd::count_for_order;
    use crate::fixtures::PAIRS;

    fn order(v: &[usize]) -> VarOrder {
        VarOrder::new(v.to_vec()).unwrap()
    }

    fn eval_all(m: &BddManager, f: NodeRef, n: usize) -> Vec<bool> {
        (0..1usize << n)
            .map(|mask| {
                let a: Vec<bool> = (0..n).map(|i| (mask >> i) & 1 == 1).collect();
                m.eval(f, &a)
            })
            .collect()
    }

    #[test]
    fn swap_is_an_involution() {
        let n = parse_blif(PAIRS).unwrap();
        let (mut m, roots) = build_from_netlist(&n, &order(&[0, 3, 1, 4, 2, 5])).unwrap();
        let before = m.node_count(&roots);
        let table = eval_all(&m, roots[0], 6);
        for l in 0..5 {
            m.swap_adjacent_levels(l).unwrap();
            assert_eq!(eval_all(&m, roots[0], 6), table);
            m.swap_adjacent_levels(l).unwrap();
            assert_eq!(m.node_count(&roots), before);
        }
        assert_eq!(m.order(), order(&[0, 3, 1, 4, 2, 5]));
    }

    #[test]
    fn swapping_x3_and_x1_changes_count_and_keeps_function() {
        let n = parse_blif(PAIRS).unwrap();
        let (mut m, roots) = build_from_netlist(&n, &order(&[0, 3, 1, 4, 2, 5])).unwrap();
        let table = eval_all(&m, roots[0], 6);
        m.swap_adjacent_levels(1).unwrap();
        assert_eq!(m.order(), order(&[0, 1, 3, 4, 2, 5]));
        assert_ne!(m.node_count(&roots), 12);
        assert_eq!(
            m.node_count(&roots),
            count_for_order(&n, &order(&[0, 1, 3, 4, 2, 5])).unwrap()
        );
        assert_eq!(eval_all(&m, roots[0], 6), table);
    }

    #[test]
    fn swap_of_unused_variables_keeps_count() {
        let n = parse_blif(".model t\n.inputs a b c d\n.outputs o\n.names a d o\n11 1\n.end").unwrap();
        let (mut m, roots) = build_from_netlist(&n, &VarOrder::identity(4)).unwrap();
        let before = m.node_count(&roots);
        m.swap_adjacent_levels(1).unwrap();
        assert_eq!(m.node_count(&roots), before);
    }

    #[test]
    fn sifting_on_pair_function() {
        let n = parse_blif(PAIRS).unwrap();
        let (mut m, roots) = build_from_netlist(&n, &VarOrder::identity(6)).unwrap();
        m.sift_reorder(&roots);
        assert_eq!(m.node_count(&roots), 8);

        let (mut m, roots) = build_from_netlist(&n, &order(&[0, 2, 4, 1, 3, 5])).unwrap();
        let sifted = m.sift_reorder(&roots);
        assert_eq!(m.node_count(&roots), 8);
        assert_eq!(count_for_order(&n, &sifted).unwrap(), 8);
    }

    #[test]
    fn ga_on_pair_function() {
        let n = parse_blif(PAIRS).unwrap();
        let params = GaParams {
            population: 20,
            generations: 30,
            ..GaParams::default()
        };
        let (mut m, roots) = build_from_netlist(&n, &order(&[0, 2, 4, 1, 3, 5])).unwrap();
        let a = m.ga_reorder(&roots, &params, 11);
        assert_eq!(m.node_count(&roots), 8);
        let (mut m2, roots2) = build_from_netlist(&n, &order(&[0, 2, 4, 1, 3, 5])).unwrap();
        assert_eq!(m2.ga_reorder(&roots2, &params, 11), a);
    }

    #[test]
    fn ga_without_generations_returns_best_initial() {
        let n = parse_blif(PAIRS).unwrap();
        let params = GaParams {
            population: 6,
            generations: 0,
            ..GaParams::default()
        };
        let (mut m, roots) = build_from_netlist(&n, &VarOrder::identity(6)).unwrap();
        let got = m.ga_reorder(&roots, &params, 3);
        // identity is optimal and is the first individual
        assert_eq!(got, VarOrder::identity(6));
    }

    #[test]
    fn crossover_yields_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = order(&[0, 1, 2, 3, 4, 5, 6]);
        let b = order(&[6, 4, 2, 0, 5, 3, 1]);
        for _ in 0..200 {
            assert!(VarOrder::new(order_crossover(&a, &b, &mut rng)).is_ok());
        }
    }

    #[test]
    fn brute_force_small_cases() {
        let n = parse_blif(PAIRS).unwrap();
        let (best, count) = brute_force_optimal_order(&n).unwrap();
        assert_eq!(count, 8);
        assert_eq!(count_for_order(&n, &best).unwrap(), 8);

        let single = parse_blif(".model s\n.inputs a\n.outputs o\n.names a o\n1 1\n.end").unwrap();
        assert_eq!(brute_force_optimal_order(&single).unwrap().1, 3);

        let maj = parse_blif(".model m\n.inputs a b c\n.outputs o\n.names a b c o\n11- 1\n1-1 1\n-11 1\n.end").unwrap();
        let counts: Vec<usize> = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]]
            .iter()
            .map(|p| count_for_order(&maj, &order(p)).unwrap())
            .collect();
        assert!(counts.iter().all(|&c| c == counts[0]));
        assert_eq!(brute_force_optimal_order(&maj).unwrap().1, counts[0]);
    }

    #[test]
    fn brute_force_rejects_wide_circuits() {
        let inputs: Vec<String> = (0..10).map(|i| format!("i{i}")).collect();
        let text = format!(".model w\n.inputs {}\n.outputs i0\n.end", inputs.join(" "));
        let n = parse_blif(&text).unwrap();
        assert_eq!(
            brute_force_optimal_order(&n).err(),
            Some(BddError::TooManyInputs { max: 9, got: 10 })
        );
    }
}
