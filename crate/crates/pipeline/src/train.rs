// SPDX-License-Identifier: Apache-2.0
//! Training on the labeled train split, model selection on validation τ.

use std::path::Path;

use bddseq::decode::{greedy_decode, ModelScorer};
use bddseq::neural::io::{load_checkpoint, read_file, save_checkpoint, save_model};
use bddseq::neural::train::evaluate_loss;
use bddseq::neural::{kendall_tau, spearman_rho, Model, Sample, Trainer};
use bddseq::Model32;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Split};
use crate::predict::graph_for;
use crate::{csv_with_config, read_csv, write_file, PipelineError, Result, RunConfig};

pub const WEIGHTS: &str = "model.bdsq";
pub const CHECKPOINT: &str = "checkpoint.bdsq";
pub const METRICS: &str = "train_metrics.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_tau: Option<f64>,
    pub val_rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub rows: Vec<EpochRow>,
    /// Epoch whose weights are in `model.bdsq`.
    pub best_epoch: usize,
    pub train_samples: usize,
    pub val_samples: usize,
}

pub fn samples(corpus: &Corpus, split: Split, config: &RunConfig) -> Result<Vec<Sample<f32>>> {
    corpus
        .labeled(split)
        .par_iter()
        .map(|(e, l)| {
            let n = corpus.netlist(e)?;
            Ok(Sample {
                graph: graph_for(&n, config)?,
                label: l.order_for(&n)?,
            })
        })
        .collect()
}

/// Mean τ and ρ of greedy orders against labels, over samples with at
/// least two inputs.
pub fn rank_agreement(model: &Model32, data: &[Sample<f32>]) -> Option<(f64, f64)> {
    let pairs: Vec<(f64, f64)> = data
        .par_iter()
        .filter(|s| s.label.len() >= 2)
        .map(|s| {
            let pred = greedy_decode(&ModelScorer::new(model, &s.graph));
            (
                kendall_tau(&pred, &s.label).unwrap(),
                spearman_rho(&pred, &s.label).unwrap(),
            )
        })
        .collect();
    if pairs.is_empty() {
        return None;
    }
    let n = pairs.len() as f64;
    Some((
        pairs.iter().map(|p| p.0).sum::<f64>() / n,
        pairs.iter().map(|p| p.1).sum::<f64>() / n,
    ))
}

/// Trains for the configured epochs. With `resume`, continues from that
/// checkpoint and keeps the metric rows already in `out`.
pub fn cmd_train(corpus_dir: &Path, out: &Path, config: &RunConfig, resume: Option<&Path>) -> Result<TrainReport> {
    let corpus = Corpus::open(corpus_dir)?;
    let train = samples(&corpus, Split::Train, config)?;
    if train.is_empty() {
        return Err(PipelineError::Empty("no labeled circuits in the train split".into()));
    }
    let val = samples(&corpus, Split::Val, config)?;
    let note = config.to_toml();

    let (mut trainer, mut rows) = match resume {
        Some(path) => {
            let (t, _) = load_checkpoint::<f32>(&read_file(path)?)?;
            let metrics = out.join(METRICS);
            let mut rows: Vec<EpochRow> = if metrics.exists() { read_csv(&metrics)? } else { Vec::new() };
            rows.retain(|r| r.epoch <= t.epoch);
            (t, rows)
        }
        None => (Trainer::new(Model::new(config.model_config())?, config.train_config()), Vec::new()),
    };
    trainer.config.epochs = config.epochs;
    let key = |r: &EpochRow| r.val_tau.unwrap_or(f64::NEG_INFINITY);
    let mut best: Option<(usize, f64)> = rows.iter().map(|r| (r.epoch, key(r))).fold(None, |b, c| match b {
        Some(b) if b.1 >= c.1 => Some(b),
        _ => Some(c),
    });

    while trainer.epoch < config.epochs {
        let train_loss = trainer.train_epoch(&train)?;
        let (val_loss, agreement) = if val.is_empty() {
            (None, None)
        } else {
            (
                Some(evaluate_loss(&trainer.model, &val, config.schedule)?),
                rank_agreement(&trainer.model, &val),
            )
        };
        let row = EpochRow {
            epoch: trainer.epoch,
            train_loss,
            val_loss,
            val_tau: agreement.map(|a| a.0),
            val_rho: agreement.map(|a| a.1),
        };
        log::info!(
            "epoch {} loss {:.4} val tau {:?}",
            row.epoch,
            row.train_loss,
            row.val_tau
        );
        // ties keep the earlier epoch; without validation the last epoch wins
        let improved = match best {
            None => true,
            Some((_, b)) => key(&row) > b || (val.is_empty()),
        };
        if improved {
            best = Some((row.epoch, key(&row)));
            write_file(&out.join(WEIGHTS), save_model(&trainer.model, &note))?;
        }
        rows.push(row);
        write_file(&out.join(CHECKPOINT), save_checkpoint(&trainer, &note))?;
        write_file(&out.join(METRICS), csv_with_config(config, &rows)?)?;
    }
    Ok(TrainReport {
        best_epoch: best.map_or(0, |b| b.0),
        rows,
        train_samples: train.len(),
        val_samples: val.len(),
    })
}
