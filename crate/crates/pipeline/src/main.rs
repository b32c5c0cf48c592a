// SPDX-License-Identifier: Apache-2.0
use std::path::PathBuf;

use anyhow::Context;
use bddseq::decode::Mode;
use bddseq_pipeline::corpus::{generate_sources, write_sources};
use bddseq_pipeline::{augment, eval, label, predict, synth, train, RunConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bddseq", version, about = "BDD variable-order prediction and reversible synthesis")]
struct Cli {
    /// Flat TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write random source circuits plus the built-in fixtures.
    Generate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a corpus from a directory of BLIF files.
    Augment {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configured variant count.
        #[arg(long)]
        variants: Option<usize>,
    },
    /// Label every corpus circuit with the best heuristic order.
    Label {
        corpus: PathBuf,
        /// Relabel circuits that already have a label.
        #[arg(long)]
        force: bool,
    },
    Train {
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Predict an order for one circuit and write an ordering file.
    Predict {
        weights: PathBuf,
        circuit: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
        /// JSON-lines search trace.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Synthesize a reversible circuit under an ordering file.
    Synth {
        circuit: PathBuf,
        order: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Tag for the mode column of the metrics row.
        #[arg(long, default_value = "order")]
        tag: String,
    },
    /// Compare heuristic and model orders on the test split.
    Eval {
        corpus: PathBuf,
        weights: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    match cli.command {
        Command::Generate { out } => {
            let sources = generate_sources(&config);
            write_sources(&out, &sources)?;
            println!("wrote {} circuits to {}", sources.len(), out.display());
        }
        Command::Augment { input, out, variants } => {
            if let Some(v) = variants {
                config.variants = v;
            }
            let r = augment::cmd_augment(&input, &out, &config)?;
            println!("{} corpus entries, {} unreadable sources", r.entries.len(), r.failed.len());
        }
        Command::Label { corpus, force } => {
            let s = label::cmd_label(&corpus, &config, force)?;
            println!(
                "labeled {}, kept {} existing, {} over the node cap",
                s.labeled,
                s.skipped,
                s.dropped.len()
            );
        }
        Command::Train { corpus, out, resume } => {
            let r = train::cmd_train(&corpus, &out, &config, resume.as_deref())?;
            let best = r.rows.iter().find(|row| row.epoch == r.best_epoch);
            println!(
                "{} train / {} val samples; best epoch {} (val tau {:?})",
                r.train_samples,
                r.val_samples,
                r.best_epoch,
                best.and_then(|b| b.val_tau)
            );
        }
        Command::Predict {
            weights,
            circuit,
            out,
            mode,
            trace,
        } => {
            let mode = mode.unwrap_or(config.mode);
            let p = predict::cmd_predict(&weights, &circuit, mode, &config, &out, trace.as_deref())
                .with_context(|| format!("predicting {}", circuit.display()))?;
            println!("{} nodes from {} beam candidates plus greedy", p.count, p.candidates);
        }
        Command::Synth { circuit, order, out, tag } => {
            let (row, path) = synth::cmd_synth(&circuit, &order, &out, &config, &tag)?;
            println!(
                "{}: gates {} lines {} qc {} transistors {} -> {}",
                row.circuit,
                row.gates,
                row.lines,
                row.qc,
                row.transistor_cost,
                path.display()
            );
        }
        Command::Eval { corpus, weights, out } => {
            let r = eval::cmd_eval(&corpus, &weights, &out, &config)?;
            for s in &r.summary {
                println!("{:32} {:.4}", s.metric, s.value);
            }
        }
    }
    Ok(())
}
