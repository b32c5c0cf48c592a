// SPDX-License-Identifier: Apache-2.0
//! Augmentation: signal negation and output-cone decomposition.

use std::collections::HashSet;
use std::path::Path;

use bddseq::blif::{bound_fanin, negate_signals, negation_choice, write_blif, Netlist, Simulator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::corpus::{blif_files, split_for, ManifestEntry, CIRCUITS, MANIFEST};
use crate::{csv_with_config, read_netlist, write_file, PipelineError, Result, RunConfig};

/// A declared transformation of a source circuit.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Transform {
    /// Gate outputs to invert, by signal name.
    pub negate: Vec<String>,
    /// Keep only the fan-in cone of this output.
    pub cone: Option<String>,
    /// Split gates wider than this.
    pub fanin: Option<usize>,
}

impl Transform {
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if !self.negate.is_empty() {
            parts.push(format!("negate={}", self.negate.join(",")));
        }
        if let Some(c) = &self.cone {
            parts.push(format!("cone={c}"));
        }
        if let Some(k) = self.fanin {
            parts.push(format!("fanin={k}"));
        }
        if parts.is_empty() {
            "identity".into()
        } else {
            parts.join(";")
        }
    }

    pub fn parse(s: &str) -> Option<Transform> {
        let mut t = Transform::default();
        if s == "identity" {
            return Some(t);
        }
        for part in s.split(';') {
            let (k, v) = part.split_once('=')?;
            match k {
                "negate" => t.negate = v.split(',').map(str::to_string).collect(),
                "cone" => t.cone = Some(v.to_string()),
                "fanin" => t.fanin = Some(v.parse().ok()?),
                _ => return None,
            }
        }
        Some(t)
    }

    /// Negation, then cone extraction, then fan-in bounding.
    pub fn apply(&self, source: &Netlist) -> Netlist {
        let picked: Vec<usize> = self
            .negate
            .iter()
            .filter_map(|s| source.gates.iter().position(|g| &g.output == s))
            .collect();
        let mut n = negate_signals(source, &picked);
        if let Some(po) = &self.cone {
            n = output_cone(&n, po);
        }
        if let Some(k) = self.fanin {
            n = bound_fanin(&n, k);
        }
        n
    }
}

/// The fan-in cone of one output, over the inputs it depends on structurally.
pub fn output_cone(netlist: &Netlist, po: &str) -> Netlist {
    let mut needed: HashSet<&str> = HashSet::new();
    let mut stack = vec![po];
    while let Some(s) = stack.pop() {
        if !needed.insert(s) {
            continue;
        }
        if let Some(g) = netlist.gates.iter().find(|g| g.output == s) {
            stack.extend(g.inputs.iter().map(String::as_str));
        }
    }
    Netlist {
        name: netlist.name.clone(),
        primary_inputs: netlist
            .primary_inputs
            .iter()
            .filter(|p| needed.contains(p.as_str()))
            .cloned()
            .collect(),
        primary_outputs: vec![po.to_string()],
        gates: netlist
            .gates
            .iter()
            .filter(|g| needed.contains(g.output.as_str()))
            .cloned()
            .collect(),
    }
}

fn variant_seed(seed: u64, id: &str, v: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    h.update((v as u64).to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

/// Variant `v` of `source`. Even variants negate random gate outputs; odd
/// variants also cut down to one output's cone (when it keeps at least two
/// inputs) and bound the fan-in.
pub fn plan_variant(source: &Netlist, v: usize, config: &RunConfig) -> Transform {
    let seed = variant_seed(config.seed, &source.name, v);
    let g = source.gates.len();
    let k = ((g as f64 * config.negate_fraction).round() as usize).clamp(usize::from(g > 0), g);
    let negate = negation_choice(source, k, seed)
        .into_iter()
        .map(|i| source.gates[i].output.clone())
        .collect();
    let mut t = Transform {
        negate,
        ..Transform::default()
    };
    if v % 2 == 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let po = &source.primary_outputs[rng.gen_range(0..source.primary_outputs.len())];
        if source.primary_outputs.len() > 1 && output_cone(source, po).num_inputs() >= 2 {
            t.cone = Some(po.clone());
        }
        t.fanin = Some(config.decompose_arity);
    }
    t
}

/// Checks `variant` against the declared transformation of `source` by
/// simulation: exhaustive up to 16 inputs, otherwise 4096 random vectors.
pub fn verify_variant(source: &Netlist, variant: &Netlist, t: &Transform) -> std::result::Result<(), String> {
    let expected = {
        let mut e = t.clone();
        e.fanin = None;
        e.apply(source)
    };
    if expected.primary_inputs != variant.primary_inputs || expected.primary_outputs != variant.primary_outputs {
        return Err("interface differs from the declared transformation".into());
    }
    let n = variant.num_inputs();
    let (a, b) = (Simulator::new(&expected), Simulator::new(variant));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let vectors: Box<dyn Iterator<Item = Vec<bool>>> = if n <= 16 {
        Box::new((0..1usize << n).map(move |m| (0..n).map(|i| (m >> i) & 1 == 1).collect()))
    } else {
        Box::new((0..4096).map(move |_| (0..n).map(|_| rng.gen()).collect()))
    };
    for x in vectors {
        if a.run(&x) != b.run(&x) {
            return Err(format!("outputs differ on {x:?}"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentReport {
    pub entries: Vec<ManifestEntry>,
    pub failed: Vec<String>,
}

/// Copies every source and adds `config.variants` variants of each.
pub fn cmd_augment(input: &Path, out: &Path, config: &RunConfig) -> Result<AugmentReport> {
    let mut entries = Vec::new();
    let mut failed = Vec::new();
    for path in blif_files(input)? {
        let source = match read_netlist(&path) {
            Ok(n) => n,
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                failed.push(path.display().to_string());
                continue;
            }
        };
        let stem = path.file_stem().unwrap().to_string_lossy().to_string();
        let mut emit = |id: String, n: &Netlist, t: &Transform| -> Result<()> {
            let rel = format!("{CIRCUITS}/{id}.blif");
            let mut n = n.clone();
            n.name = id.clone();
            write_file(&out.join(&rel), write_blif(&n))?;
            entries.push(ManifestEntry {
                split: split_for(&id, config.seed),
                id,
                path: rel,
                source: stem.clone(),
                transform: t.describe(),
                inputs: n.num_inputs(),
                outputs: n.primary_outputs.len(),
            });
            Ok(())
        };
        emit(stem.clone(), &source, &Transform::default())?;
        for v in 0..config.variants {
            let t = plan_variant(&source, v, config);
            let variant = t.apply(&source);
            verify_variant(&source, &variant, &t).map_err(|msg| PipelineError::Verification {
                circuit: format!("{stem} variant {v}"),
                msg,
            })?;
            emit(format!("{stem}__v{v}"), &variant, &t)?;
        }
    }
    write_file(&out.join(MANIFEST), csv_with_config(config, &entries)?)?;
    Ok(AugmentReport { entries, failed })
}
