// SPDX-License-Identifier: Apache-2.0
//! Corpus preparation, labeling, training, prediction, synthesis and
//! evaluation on top of `bddseq`.

use std::path::{Path, PathBuf};

pub mod augment;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod label;
pub mod predict;
pub mod synth;
pub mod train;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Blif {
        path: PathBuf,
        source: bddseq::blif::BlifError,
    },
    #[error(transparent)]
    Bdd(#[from] bddseq::robdd::BddError),
    #[error(transparent)]
    Feature(#[from] bddseq::featurize::FeatureError),
    #[error(transparent)]
    Model(#[from] bddseq::neural::ModelError),
    #[error(transparent)]
    Weights(#[from] bddseq::neural::io::WeightError),
    #[error(transparent)]
    Decode(#[from] bddseq::decode::DecodeError),
    #[error(transparent)]
    Synth(#[from] bddseq::revsynth::SynthError),
    #[error(transparent)]
    Order(#[from] bddseq::order::OrderError),
    #[error("{circuit}: synthesized circuit is wrong: {msg}")]
    Verification { circuit: String, msg: String },
    #[error("{id} belongs to the {split} split; only test circuits can be evaluated")]
    Leakage { id: String, split: String },
    #[error("{0}")]
    Empty(String),
    #[error("{0}")]
    Incompatible(String),
}

impl PipelineError {
    pub fn io(path: &Path, source: std::io::Error) -> PipelineError {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

pub(crate) fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| PipelineError::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))
}

pub fn read_netlist(path: &Path) -> Result<bddseq::blif::Netlist> {
    bddseq::blif::parse_blif(&read_text(path)?).map_err(|source| PipelineError::Blif {
        path: path.to_path_buf(),
        source,
    })
}

/// CSV text preceded by the run configuration as comments.
pub(crate) fn csv_with_config<R: serde::Serialize>(config: &RunConfig, rows: &[R]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| PipelineError::Config(e.to_string()))?)
        .expect("csv output is utf-8");
    Ok(format!("{}{body}", config.comment_block()))
}

pub(crate) fn read_csv<R: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<R>> {
    let text = read_text(path)?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let rows: std::result::Result<Vec<R>, csv::Error> = r.deserialize().collect();
    Ok(rows?)
}

/// Microseconds since `start`, or `None` when timing is off.
pub(crate) fn elapsed_us(config: &RunConfig, start: std::time::Instant) -> Option<u64> {
    config.record_timing.then(|| start.elapsed().as_micros() as u64)
}
