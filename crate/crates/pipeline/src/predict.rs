// SPDX-License-Identifier: Apache-2.0
//! Order prediction with a trained model.

use std::path::Path;
use std::time::Instant;

use bddseq::blif::{bound_fanin, Netlist};
use bddseq::decode::{
    diverse_beam_search, greedy_decode, select_best_order, sequence_score, Mode, ModelScorer, TraceEvent,
};
use bddseq::featurize::{blif2graph, CircuitGraph};
use bddseq::neural::io::{load_model, read_file};
use bddseq::neural::GraphInput;
use bddseq::order::{write_order_line, VarOrder};
use bddseq::Model32;

use crate::{elapsed_us, write_file, PipelineError, Result, RunConfig};

/// Model input for a netlist. Gates too wide for the truth-table embedding
/// are split first; the inputs and their order are unchanged.
pub fn circuit_graph(netlist: &Netlist, config: &RunConfig) -> Result<CircuitGraph> {
    let fc = config.feature_config();
    if netlist.gates.iter().any(|g| g.arity() > fc.max_arity()) {
        Ok(blif2graph(&bound_fanin(netlist, fc.max_arity()), &fc)?)
    } else {
        Ok(blif2graph(netlist, &fc)?)
    }
}

pub fn graph_for(netlist: &Netlist, config: &RunConfig) -> Result<GraphInput<f32>> {
    Ok(GraphInput::new(&circuit_graph(netlist, config)?))
}

pub fn load_weights(path: &Path, config: &RunConfig) -> Result<Model32> {
    let bytes = read_file(path)?;
    let (model, _) = load_model::<f32>(&bytes)?;
    let want = config.feature_config().width();
    if model.config.feature_width != want {
        return Err(PipelineError::Incompatible(format!(
            "weights expect {} features per node, the configuration produces {want}",
            model.config.feature_width
        )));
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub order: VarOrder,
    pub count: usize,
    pub greedy: VarOrder,
    pub greedy_count: usize,
    /// Beam candidates, before the greedy order is added.
    pub candidates: usize,
    pub inference_us: Option<u64>,
    pub rerank_us: Option<u64>,
}

/// Greedy order for Efficiency; otherwise beam candidates plus the greedy
/// order, re-ranked by node count.
pub fn predict(
    model: &Model32,
    netlist: &Netlist,
    mode: Mode,
    config: &RunConfig,
    trace: Option<&mut Vec<TraceEvent>>,
) -> Result<Prediction> {
    let start = Instant::now();
    let cg = circuit_graph(netlist, config)?;
    model.check_graph(&cg)?;
    let graph = GraphInput::new(&cg);
    let scorer = ModelScorer::new(model, &graph);
    let greedy = greedy_decode(&scorer);
    let mut candidates = Vec::new();
    if mode != Mode::Efficiency {
        candidates = diverse_beam_search(&scorer, &config.search_config(mode), trace)?;
    }
    let beams = candidates.len();
    candidates.push((greedy.clone(), sequence_score(&scorer, &greedy)));
    let inference_us = elapsed_us(config, start);
    let start = Instant::now();
    let best = select_best_order(&candidates, netlist, config.node_cap)?;
    let greedy_count = if best.index == beams {
        best.count
    } else {
        select_best_order(&candidates[beams..], netlist, config.node_cap)?.count
    };
    Ok(Prediction {
        order: best.order,
        count: best.count,
        greedy,
        greedy_count,
        candidates: beams,
        inference_us,
        rerank_us: elapsed_us(config, start),
    })
}

/// Writes the ordering file, and the JSON-lines trace when asked.
pub fn cmd_predict(
    weights: &Path,
    circuit: &Path,
    mode: Mode,
    config: &RunConfig,
    out: &Path,
    trace_path: Option<&Path>,
) -> Result<Prediction> {
    let model = load_weights(weights, config)?;
    let netlist = crate::read_netlist(circuit)?;
    let mut trace = Vec::new();
    let p = predict(&model, &netlist, mode, config, Some(&mut trace))?;
    let mut text = config.comment_block();
    text.push_str(&format!("# mode = {}\n# nodes = {}\n", mode.name(), p.count));
    text.push_str(&write_order_line(&netlist.name, &p.order, &netlist.primary_inputs));
    write_file(out, text)?;
    if let Some(tp) = trace_path {
        let mut lines = String::new();
        for e in &trace {
            lines.push_str(&serde_json::to_string(e).expect("trace event serializes"));
            lines.push('\n');
        }
        write_file(tp, lines)?;
    }
    Ok(p)
}
