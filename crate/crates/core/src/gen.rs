// SPDX-License-Identifier: Apache-2.0
//! Seeded random netlists for tests and synthetic corpora.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blif::{Cube, Lit, LogicGate, Netlist};

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub inputs: usize,
    pub gates: usize,
    pub outputs: usize,
    pub max_arity: usize,
    pub max_cubes: usize,
    /// Chance that a cube literal is a don't-care.
    pub dont_care: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            inputs: 6,
            gates: 8,
            outputs: 2,
            max_arity: 3,
            max_cubes: 3,
            dont_care: 0.3,
        }
    }
}

/// Random combinational netlist. Gate inputs are drawn from PIs and earlier
/// gates with a bias toward recent signals; outputs are the last gates.
pub fn random_netlist(name: &str, p: &GenParams, seed: u64) -> Netlist {
    assert!(p.inputs >= 1 && p.max_arity >= 1 && p.max_cubes >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut signals: Vec<String> = (0..p.inputs).map(|i| format!("x{i}")).collect();
    let mut gates = Vec::with_capacity(p.gates);
    for g in 0..p.gates {
        let arity = rng.gen_range(1..=p.max_arity.min(signals.len()));
        let picks = pick_inputs(&mut rng, signals.len(), arity, p.inputs);
        let inputs: Vec<&str> = picks.iter().map(|&i| signals[i].as_str()).collect();
        let polarity = rng.gen_bool(0.75);
        let cubes = rng.gen_range(1..=p.max_cubes);
        let mut cover: Vec<Cube> = Vec::with_capacity(cubes);
        for _ in 0..cubes {
            let pattern: Vec<Lit> = (0..arity)
                .map(|_| {
                    if rng.gen_bool(p.dont_care) {
                        Lit::DontCare
                    } else if rng.gen_bool(0.5) {
                        Lit::One
                    } else {
                        Lit::Zero
                    }
                })
                .collect();
            let cube = Cube {
                pattern,
                output: polarity,
            };
            if !cover.contains(&cube) {
                cover.push(cube);
            }
        }
        let out = format!("n{g}");
        gates.push(LogicGate::new(&inputs, &out, cover));
        signals.push(out);
    }
    let outputs = p.outputs.clamp(1, signals.len());
    let primary_outputs = signals[signals.len() - outputs..].to_vec();
    Netlist {
        name: name.to_string(),
        primary_inputs: signals[..p.inputs].to_vec(),
        primary_outputs,
        gates,
    }
}

fn pick_inputs(rng: &mut ChaCha8Rng, available: usize, arity: usize, pis: usize) -> Vec<usize> {
    // half the time draw from the most recent window so depth grows
    if available > pis && rng.gen_bool(0.5) {
        let window = (2 * arity).max(4).min(available);
        let mut v: Vec<usize> = sample(rng, window, arity)
            .into_iter()
            .map(|i| available - window + i)
            .collect();
        v.sort_unstable();
        return v;
    }
    let mut v = sample(rng, available, arity).into_vec();
    v.sort_unstable();
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blif::{parse_blif, write_blif};

    #[test]
    fn generated_netlists_validate_and_round_trip() {
        for seed in 0..50 {
            let n = random_netlist("r", &GenParams::default(), seed);
            n.validate().unwrap();
            assert_eq!(parse_blif(&write_blif(&n)).unwrap(), n);
        }
        assert_eq!(
            random_netlist("r", &GenParams::default(), 9),
            random_netlist("r", &GenParams::default(), 9)
        );
    }
}
