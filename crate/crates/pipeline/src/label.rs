// SPDX-License-Identifier: Apache-2.0
//! Supervisory labels for every corpus circuit.

use std::path::Path;
use std::time::Instant;

use bddseq::robdd::{generate_label, BddError, Heuristic};
use rayon::prelude::*;

use crate::corpus::{Corpus, LabelRow, LabelStatus, LABELS};
use crate::{csv_with_config, elapsed_us, write_file, Result, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct LabelSummary {
    pub labeled: usize,
    pub skipped: usize,
    pub dropped: Vec<String>,
}

/// Labels every manifest entry. Entries already in `labels.csv` are kept
/// unless `force` is set. Node-cap failures are recorded and reported.
pub fn cmd_label(dir: &Path, config: &RunConfig, force: bool) -> Result<LabelSummary> {
    let corpus = Corpus::open(dir)?;
    let todo: Vec<usize> = (0..corpus.entries.len())
        .filter(|&i| force || !corpus.labels.contains_key(&corpus.entries[i].id))
        .collect();
    let fresh: Vec<Result<LabelRow>> = todo
        .par_iter()
        .map(|&i| {
            let e = &corpus.entries[i];
            let n = corpus.netlist(e)?;
            let start = Instant::now();
            let row = match generate_label(&n, &config.label_config()) {
                Ok(r) => LabelRow {
                    id: e.id.clone(),
                    status: LabelStatus::Ok,
                    order: r.order.to_names(&n.primary_inputs).join(" "),
                    count: Some(r.count),
                    winner: r.winner.name().to_string(),
                    natural: Some(r.count_of(Heuristic::Natural)),
                    sifting: Some(r.count_of(Heuristic::Sifting)),
                    ga: Some(r.count_of(Heuristic::Genetic)),
                    time_us: elapsed_us(config, start),
                },
                Err(BddError::NodeLimit(cap)) => {
                    log::warn!("{}: node cap {cap} exceeded, dropped from training", e.id);
                    LabelRow {
                        id: e.id.clone(),
                        status: LabelStatus::NodeCap,
                        order: String::new(),
                        count: None,
                        winner: String::new(),
                        natural: None,
                        sifting: None,
                        ga: None,
                        time_us: elapsed_us(config, start),
                    }
                }
                Err(e) => return Err(e.into()),
            };
            Ok(row)
        })
        .collect();
    let mut labels = corpus.labels.clone();
    let mut dropped = Vec::new();
    for r in fresh {
        let r = r?;
        if r.status != LabelStatus::Ok {
            dropped.push(r.id.clone());
        }
        labels.insert(r.id.clone(), r);
    }
    let rows: Vec<&LabelRow> = corpus.entries.iter().filter_map(|e| labels.get(&e.id)).collect();
    write_file(&dir.join(LABELS), csv_with_config(config, &rows)?)?;
    Ok(LabelSummary {
        labeled: todo.len(),
        skipped: corpus.entries.len() - todo.len(),
        dropped,
    })
}
