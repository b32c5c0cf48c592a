// SPDX-License-Identifier: Apache-2.0
//! Corpus layout: `manifest.csv`, `labels.csv` and `circuits/*.blif`.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use bddseq::blif::{write_blif, Netlist};
use bddseq::gen::{random_netlist, GenParams};
use bddseq::order::VarOrder;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{read_csv, read_netlist, write_file, PipelineError, Result, RunConfig};

pub const MANIFEST: &str = "manifest.csv";
pub const LABELS: &str = "labels.csv";
pub const CIRCUITS: &str = "circuits";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// 7:2:1 assignment from a hash of the seed and the circuit id.
pub fn split_for(id: &str, seed: u64) -> Split {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    let d = h.finalize();
    match u64::from_le_bytes(d[..8].try_into().unwrap()) % 10 {
        0..=6 => Split::Train,
        7..=8 => Split::Val,
        _ => Split::Test,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Relative to the corpus directory.
    pub path: String,
    pub source: String,
    /// `identity`, or `;`-separated steps such as `negate=n1,n4;cone=y;fanin=2`.
    pub transform: String,
    pub split: Split,
    pub inputs: usize,
    pub outputs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelStatus {
    Ok,
    NodeCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub id: String,
    pub status: LabelStatus,
    /// Input names, space separated, top of the diagram first.
    pub order: String,
    pub count: Option<usize>,
    pub winner: String,
    pub natural: Option<usize>,
    pub sifting: Option<usize>,
    pub ga: Option<usize>,
    pub time_us: Option<u64>,
}

impl LabelRow {
    pub fn order_for(&self, netlist: &Netlist) -> Result<VarOrder> {
        let names: Vec<&str> = self.order.split_whitespace().collect();
        Ok(VarOrder::from_names(&names, &netlist.primary_inputs)?)
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
    pub labels: HashMap<String, LabelRow>,
}

impl Corpus {
    pub fn open(dir: &Path) -> Result<Corpus> {
        let entries: Vec<ManifestEntry> = read_csv(&dir.join(MANIFEST))?;
        let labels_path = dir.join(LABELS);
        let labels = if labels_path.exists() {
            read_csv::<LabelRow>(&labels_path)?
                .into_iter()
                .map(|r| (r.id.clone(), r))
                .collect()
        } else {
            HashMap::new()
        };
        Ok(Corpus {
            dir: dir.to_path_buf(),
            entries,
            labels,
        })
    }

    pub fn netlist(&self, e: &ManifestEntry) -> Result<Netlist> {
        read_netlist(&self.dir.join(&e.path))
    }

    /// Entries of `split` that carry a usable label.
    pub fn labeled(&self, split: Split) -> Vec<(&ManifestEntry, &LabelRow)> {
        self.entries
            .iter()
            .filter(|e| e.split == split)
            .filter_map(|e| {
                let l = self.labels.get(&e.id)?;
                (l.status == LabelStatus::Ok).then_some((e, l))
            })
            .collect()
    }
}

/// Random source circuits plus the built-in fixtures, for a desk-scale corpus.
pub fn generate_sources(config: &RunConfig) -> Vec<Netlist> {
    let mut out: Vec<Netlist> = bddseq::fixtures::ALL
        .iter()
        .map(|(_, text)| bddseq::blif::parse_blif(text).expect("fixtures parse"))
        .collect();
    let span = config.gen_max_inputs - config.gen_min_inputs + 1;
    for k in 0..config.gen_count {
        let inputs = config.gen_min_inputs + k % span;
        let p = GenParams {
            inputs,
            gates: inputs + 2 + k % 5,
            outputs: 1 + k % 3,
            ..GenParams::default()
        };
        let seed = config.seed.wrapping_mul(1_000_003).wrapping_add(k as u64);
        out.push(random_netlist(&format!("gen{k:03}"), &p, seed));
    }
    out
}

pub fn write_sources(dir: &Path, sources: &[Netlist]) -> Result<()> {
    for n in sources {
        write_file(&dir.join(format!("{}.blif", n.name)), write_blif(n))?;
    }
    Ok(())
}

/// BLIF files in `dir`, sorted by name.
pub fn blif_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = std::fs::read_dir(dir).map_err(|e| PipelineError::io(dir, e))?;
    let mut v = Vec::new();
    for e in rd {
        let p = e.map_err(|e| PipelineError::io(dir, e))?.path();
        if p.extension().is_some_and(|x| x == "blif") {
            v.push(p);
        }
    }
    v.sort();
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_deterministic_and_roughly_balanced() {
        let mut counts = [0usize; 3];
        for i in 0..10_000 {
            let id = format!("c{i}");
            let s = split_for(&id, 3);
            assert_eq!(s, split_for(&id, 3));
            counts[s as usize] += 1;
        }
        assert!((6700..7300).contains(&counts[0]), "{counts:?}");
        assert!((1800..2200).contains(&counts[1]), "{counts:?}");
        assert!((850..1150).contains(&counts[2]), "{counts:?}");
        let moved = (0..1000).filter(|i| split_for(&format!("c{i}"), 3) != split_for(&format!("c{i}"), 4)).count();
        assert!(moved > 0);
    }
}
