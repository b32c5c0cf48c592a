// SPDX-License-Identifier: Apache-2.0
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use bddseq::blif::Netlist;
use bddseq::decode::Mode;
use bddseq::robdd::count_for_order;
use bddseq_pipeline::corpus::{generate_sources, write_sources, Corpus};
use bddseq_pipeline::eval::Predictor;
use bddseq_pipeline::predict::Prediction;
use bddseq_pipeline::{augment, label, RunConfig};

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn small_config() -> RunConfig {
    RunConfig {
        gen_count: 12,
        gen_max_inputs: 7,
        variants: 1,
        hidden: 16,
        heads: 2,
        layers: 2,
        epochs: 3,
        ga_generations: 10,
        ..RunConfig::default()
    }
}

/// generate → augment → label inside `root`; returns the corpus directory.
pub fn build_corpus(root: &Path, config: &RunConfig) -> PathBuf {
    let src = root.join("src");
    write_sources(&src, &generate_sources(config)).unwrap();
    let corpus = root.join("corpus");
    augment::cmd_augment(&src, &corpus, config).unwrap();
    label::cmd_label(&corpus, config, false).unwrap();
    corpus
}

/// Feeds the labels back as predictions.
pub struct LabelPredictor {
    pub labels: HashMap<String, bddseq::order::VarOrder>,
}

impl LabelPredictor {
    pub fn new(corpus: &Corpus) -> LabelPredictor {
        let mut labels = HashMap::new();
        for e in &corpus.entries {
            if let Some(l) = corpus.labels.get(&e.id) {
                let n = corpus.netlist(e).unwrap();
                if let Ok(o) = l.order_for(&n) {
                    labels.insert(n.name.clone(), o);
                }
            }
        }
        LabelPredictor { labels }
    }
}

impl Predictor for LabelPredictor {
    fn predict(&self, netlist: &Netlist, _mode: Mode) -> bddseq_pipeline::Result<Prediction> {
        let order = self.labels[&netlist.name].clone();
        let count = count_for_order(netlist, &order)?;
        Ok(Prediction {
            greedy: order.clone(),
            order,
            count,
            greedy_count: count,
            candidates: 0,
            inference_us: None,
            rerank_us: None,
        })
    }
}
