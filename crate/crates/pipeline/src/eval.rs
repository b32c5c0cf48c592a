// SPDX-License-Identifier: Apache-2.0
//! Test-split comparison of heuristic and model orders.

use std::path::Path;
use std::time::Instant;

use bddseq::blif::Netlist;
use bddseq::decode::Mode;
use bddseq::neural::{kendall_tau, spearman_rho};
use bddseq::order::VarOrder;
use bddseq::robdd::build_from_netlist_with_cap;
use bddseq::Model32;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, ManifestEntry, Split};
use crate::predict::{load_weights, predict, Prediction};
use crate::synth::synthesize_order;
use crate::{csv_with_config, elapsed_us, write_file, PipelineError, Result, RunConfig};

pub const REPORT: &str = "report.csv";
pub const SUMMARY: &str = "summary.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub circuit: String,
    pub inputs: usize,
    pub label_nodes: usize,
    pub natural_nodes: usize,
    pub natural_qc: usize,
    pub natural_us: Option<u64>,
    pub sifting_nodes: usize,
    pub sifting_qc: usize,
    pub sifting_us: Option<u64>,
    pub ga_nodes: usize,
    pub ga_qc: usize,
    pub ga_us: Option<u64>,
    pub efficiency_nodes: usize,
    pub efficiency_qc: usize,
    pub efficiency_us: Option<u64>,
    pub balance_nodes: usize,
    pub balance_qc: usize,
    pub balance_us: Option<u64>,
    /// Node count of the greedy candidate inside the Balance search.
    pub balance_greedy_nodes: usize,
    pub quality_nodes: usize,
    pub quality_qc: usize,
    pub quality_us: Option<u64>,
    /// Greedy order against the label; empty for single-input circuits.
    pub tau: Option<f64>,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub summary: Vec<SummaryRow>,
}

impl EvalReport {
    pub fn get(&self, metric: &str) -> Option<f64> {
        self.summary.iter().find(|r| r.metric == metric).map(|r| r.value)
    }
}

/// Source of model orders; the trained model in normal use.
pub trait Predictor: Sync {
    fn predict(&self, netlist: &Netlist, mode: Mode) -> Result<Prediction>;
}

pub struct ModelPredictor<'a> {
    pub model: &'a Model32,
    pub config: &'a RunConfig,
}

impl Predictor for ModelPredictor<'_> {
    fn predict(&self, netlist: &Netlist, mode: Mode) -> Result<Prediction> {
        predict(self.model, netlist, mode, self.config, None)
    }
}

fn heuristic(netlist: &Netlist, config: &RunConfig, which: &str) -> Result<(VarOrder, Option<u64>)> {
    let start = Instant::now();
    let natural = VarOrder::identity(netlist.num_inputs());
    let order = match which {
        "natural" => natural,
        _ => {
            let (mut m, roots) = build_from_netlist_with_cap(netlist, &natural, config.node_cap)?;
            if which == "sifting" {
                m.sift_reorder(&roots)
            } else {
                m.ga_reorder(&roots, &config.ga_params(), config.seed)
            }
        }
    };
    Ok((order, elapsed_us(config, start)))
}

fn add(a: Option<u64>, b: Option<u64>) -> Option<u64> {
    Some(a? + b?)
}

fn eval_one(
    corpus: &Corpus,
    e: &ManifestEntry,
    config: &RunConfig,
    predictor: &dyn Predictor,
) -> Result<EvalRow> {
    let n = corpus.netlist(e)?;
    let label = corpus.labels[&e.id].order_for(&n)?;
    let label_nodes = corpus.labels[&e.id].count.unwrap_or(0);
    let run = |order: &VarOrder, t: Option<u64>| -> Result<(usize, usize, Option<u64>)> {
        let start = Instant::now();
        let s = synthesize_order(&n, order, config)?;
        Ok((s.nodes, s.metrics.quantum_cost, add(t, elapsed_us(config, start))))
    };
    let mut h = Vec::new();
    for which in ["natural", "sifting", "ga"] {
        let (o, t) = heuristic(&n, config, which)?;
        h.push(run(&o, t)?);
    }
    let mut m = Vec::new();
    let mut greedy = None;
    let mut balance_greedy_nodes = 0;
    for mode in [Mode::Efficiency, Mode::Balance, Mode::Quality] {
        let p = predictor.predict(&n, mode)?;
        if mode == Mode::Efficiency {
            greedy = Some(p.order.clone());
        }
        if mode == Mode::Balance {
            balance_greedy_nodes = p.greedy_count;
        }
        let t = add(p.inference_us, p.rerank_us);
        m.push(run(&p.order, t)?);
    }
    let greedy = greedy.unwrap();
    let (tau, rho) = if n.num_inputs() >= 2 {
        (
            Some(kendall_tau(&greedy, &label).unwrap()),
            Some(spearman_rho(&greedy, &label).unwrap()),
        )
    } else {
        (None, None)
    };
    Ok(EvalRow {
        circuit: e.id.clone(),
        inputs: n.num_inputs(),
        label_nodes,
        natural_nodes: h[0].0,
        natural_qc: h[0].1,
        natural_us: h[0].2,
        sifting_nodes: h[1].0,
        sifting_qc: h[1].1,
        sifting_us: h[1].2,
        ga_nodes: h[2].0,
        ga_qc: h[2].1,
        ga_us: h[2].2,
        efficiency_nodes: m[0].0,
        efficiency_qc: m[0].1,
        efficiency_us: m[0].2,
        balance_nodes: m[1].0,
        balance_qc: m[1].1,
        balance_us: m[1].2,
        balance_greedy_nodes,
        quality_nodes: m[2].0,
        quality_qc: m[2].1,
        quality_us: m[2].2,
        tau,
        rho,
    })
}

/// Totals, heuristic-to-model ratios and mean rank agreement.
pub fn summarize(rows: &[EvalRow]) -> Vec<SummaryRow> {
    let total = |f: fn(&EvalRow) -> usize| rows.iter().map(f).sum::<usize>() as f64;
    let mut out = Vec::new();
    let mut push = |metric: String, value: f64| out.push(SummaryRow { metric, value });
    push("circuits".into(), rows.len() as f64);
    let cols: [(&str, fn(&EvalRow) -> usize, fn(&EvalRow) -> usize); 6] = [
        ("natural", |r| r.natural_nodes, |r| r.natural_qc),
        ("sifting", |r| r.sifting_nodes, |r| r.sifting_qc),
        ("ga", |r| r.ga_nodes, |r| r.ga_qc),
        ("efficiency", |r| r.efficiency_nodes, |r| r.efficiency_qc),
        ("balance", |r| r.balance_nodes, |r| r.balance_qc),
        ("quality", |r| r.quality_nodes, |r| r.quality_qc),
    ];
    for (name, nodes, qc) in cols {
        push(format!("{name}_nodes_total"), total(nodes));
        push(format!("{name}_qc_total"), total(qc));
    }
    for (h, _, hq) in &cols[..3] {
        for (m, _, mq) in &cols[3..] {
            push(format!("qc_ratio_{h}_over_{m}"), total(*hq) / total(*mq));
        }
    }
    let taus: Vec<(f64, f64)> = rows.iter().filter_map(|r| Some((r.tau?, r.rho?))).collect();
    if !taus.is_empty() {
        let k = taus.len() as f64;
        push("mean_tau".into(), taus.iter().map(|p| p.0).sum::<f64>() / k);
        push("mean_rho".into(), taus.iter().map(|p| p.1).sum::<f64>() / k);
    }
    out
}

/// Evaluates the given entries, which must all be test circuits with labels.
pub fn evaluate(
    corpus: &Corpus,
    entries: &[&ManifestEntry],
    config: &RunConfig,
    predictor: &dyn Predictor,
) -> Result<EvalReport> {
    for e in entries {
        if e.split != Split::Test {
            return Err(PipelineError::Leakage {
                id: e.id.clone(),
                split: e.split.to_string(),
            });
        }
    }
    let rows: Result<Vec<EvalRow>> = entries
        .par_iter()
        .map(|e| eval_one(corpus, e, config, predictor))
        .collect();
    let rows = rows?;
    Ok(EvalReport {
        summary: summarize(&rows),
        rows,
    })
}

pub fn cmd_eval(corpus_dir: &Path, weights: &Path, out: &Path, config: &RunConfig) -> Result<EvalReport> {
    let corpus = Corpus::open(corpus_dir)?;
    let model = load_weights(weights, config)?;
    let entries: Vec<&ManifestEntry> = corpus.labeled(Split::Test).into_iter().map(|(e, _)| e).collect();
    if entries.is_empty() {
        return Err(PipelineError::Empty("no labeled circuits in the test split".into()));
    }
    let report = evaluate(&corpus, &entries, config, &ModelPredictor { model: &model, config })?;
    write_file(&out.join(REPORT), csv_with_config(config, &report.rows)?)?;
    write_file(&out.join(SUMMARY), csv_with_config(config, &report.summary)?)?;
    Ok(report)
}
