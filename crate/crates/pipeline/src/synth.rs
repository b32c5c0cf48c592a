// SPDX-License-Identifier: Apache-2.0
//! Reversible synthesis under a given order, with verification.

use std::path::{Path, PathBuf};
use std::time::Instant;

use bddseq::blif::Netlist;
use bddseq::order::{parse_order_file, VarOrder};
use bddseq::revsynth::{metrics, synthesize, verify_against, write_real, Metrics, ReversibleCircuit};
use bddseq::robdd::build_from_netlist_with_cap;
use serde::{Deserialize, Serialize};

use crate::{csv_with_config, elapsed_us, read_netlist, read_text, write_file, PipelineError, Result, RunConfig};

/// Exhaustive verification runs up to this many inputs.
pub const VERIFY_MAX_INPUTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesized {
    pub circuit: ReversibleCircuit,
    pub nodes: usize,
    pub metrics: Metrics,
    pub verified: bool,
}

pub fn synthesize_order(netlist: &Netlist, order: &VarOrder, config: &RunConfig) -> Result<Synthesized> {
    let (mut m, roots) = build_from_netlist_with_cap(netlist, order, config.node_cap)?;
    let circuit = synthesize(&m, &roots, netlist)?;
    let verified = netlist.num_inputs() <= VERIFY_MAX_INPUTS;
    if verified {
        verify_against(&circuit, netlist).map_err(|msg| PipelineError::Verification {
            circuit: netlist.name.clone(),
            msg,
        })?;
    }
    Ok(Synthesized {
        nodes: m.node_count(&roots),
        metrics: metrics(&circuit, &config.cost_model()),
        circuit,
        verified,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRow {
    pub circuit: String,
    pub mode: String,
    pub gates: usize,
    pub lines: usize,
    pub qc: usize,
    pub transistor_cost: usize,
    pub time_seconds: Option<f64>,
}

/// Order for `netlist` from an ordering file: the line naming the circuit,
/// or the only line.
pub fn order_from_file(text: &str, netlist: &Netlist) -> Result<VarOrder> {
    let lines = parse_order_file(text)?;
    let line = match lines.iter().find(|l| l.circuit == netlist.name) {
        Some(l) => l,
        None if lines.len() == 1 => &lines[0],
        None => {
            return Err(PipelineError::Empty(format!(
                "no ordering for circuit {}",
                netlist.name
            )))
        }
    };
    Ok(VarOrder::from_names(&line.inputs, &netlist.primary_inputs)?)
}

/// Writes `<name>.real` and `synth.csv` into `out`.
pub fn cmd_synth(circuit: &Path, order_file: &Path, out: &Path, config: &RunConfig, mode: &str) -> Result<(SynthRow, PathBuf)> {
    let start = Instant::now();
    let netlist = read_netlist(circuit)?;
    let order = order_from_file(&read_text(order_file)?, &netlist)?;
    let s = synthesize_order(&netlist, &order, config)?;
    let time = elapsed_us(config, start).map(|us| us as f64 / 1e6);
    let real_path = out.join(format!("{}.real", netlist.name));
    let mut text = config.comment_block();
    text.push_str(&format!("# order = {}\n", order.to_names(&netlist.primary_inputs).join(" ")));
    text.push_str(&write_real(&s.circuit));
    write_file(&real_path, text)?;
    let row = SynthRow {
        circuit: netlist.name.clone(),
        mode: mode.to_string(),
        gates: s.metrics.gates,
        lines: s.metrics.lines,
        qc: s.metrics.quantum_cost,
        transistor_cost: s.metrics.transistor_cost,
        time_seconds: time,
    };
    write_file(&out.join("synth.csv"), csv_with_config(config, std::slice::from_ref(&row))?)?;
    Ok((row, real_path))
}
