// SPDX-License-Identifier: Apache-2.0
//! Run configuration: one flat TOML table, embedded into every artifact.

use std::path::Path;

use bddseq::decode::{Mode, Penalty, SearchConfig};
use bddseq::featurize::FeatureConfig;
use bddseq::neural::{AdamConfig, ModelConfig, TrainConfig, WeightSchedule};
use bddseq::revsynth::CostModel;
use bddseq::robdd::{GaParams, LabelConfig, DEFAULT_NODE_CAP};
use serde::{Deserialize, Serialize};

use crate::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub node_cap: usize,
    /// Wall-clock columns are left empty unless set, so reruns match byte for byte.
    pub record_timing: bool,

    pub gen_count: usize,
    pub gen_min_inputs: usize,
    pub gen_max_inputs: usize,

    pub variants: usize,
    /// Share of gates whose output a negation variant inverts.
    pub negate_fraction: f64,
    pub decompose_arity: usize,

    pub ga_population: usize,
    pub ga_generations: usize,
    pub ga_tournament: usize,
    pub ga_mutation_rate: f64,

    pub table_len: usize,
    pub normalize_structural: bool,

    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,

    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub schedule: WeightSchedule,
    /// Gradient-norm clip; 0 disables it.
    pub clip_norm: f64,

    pub mode: Mode,
    pub alpha: f64,
    pub penalty: Penalty,
    pub balance_width: usize,
    pub quality_width: usize,

    pub not_cost: usize,
    pub cnot_cost: usize,
    pub toffoli_cost: usize,
    pub toffoli_two_negative_cost: usize,
    pub transistors_per_control: usize,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        let ga = GaParams::default();
        let model = ModelConfig::default();
        let train = TrainConfig::default();
        let cost = CostModel::default();
        RunConfig {
            seed: 42,
            node_cap: DEFAULT_NODE_CAP,
            record_timing: false,
            gen_count: 40,
            gen_min_inputs: 4,
            gen_max_inputs: 12,
            variants: 2,
            negate_fraction: 0.25,
            decompose_arity: 2,
            ga_population: ga.population,
            ga_generations: ga.generations,
            ga_tournament: ga.tournament,
            ga_mutation_rate: ga.mutation_rate,
            table_len: bddseq::featurize::DEFAULT_TABLE_LEN,
            normalize_structural: true,
            hidden: model.hidden,
            layers: model.layers,
            heads: model.heads,
            epochs: train.epochs,
            batch_size: train.batch_size,
            lr: train.adam.lr,
            schedule: train.schedule,
            clip_norm: 0.0,
            mode: Mode::Balance,
            alpha: 0.25,
            penalty: Penalty::Scale,
            balance_width: 20,
            quality_width: 50,
            not_cost: cost.not_cost,
            cnot_cost: cost.cnot_cost,
            toffoli_cost: cost.toffoli_cost,
            toffoli_two_negative_cost: cost.toffoli_two_negative_cost,
            transistors_per_control: cost.transistors_per_control,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, PipelineError> {
        let c: RunConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        c.check()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<RunConfig, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        RunConfig::parse(&text)
    }

    pub fn check(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        if self.balance_width < 2 || !self.balance_width.is_multiple_of(2) || self.quality_width < 2 || !self.quality_width.is_multiple_of(2) {
            return bad("beam widths must be even and at least 2");
        }
        if self.gen_min_inputs == 0 || self.gen_min_inputs > self.gen_max_inputs {
            return bad("gen_min_inputs must be in 1..=gen_max_inputs");
        }
        if self.decompose_arity < 2 {
            return bad("decompose_arity must be at least 2");
        }
        if self.ga_population < 2 || self.batch_size == 0 {
            return bad("ga_population must be at least 2 and batch_size positive");
        }
        if !self.hidden.is_multiple_of(self.heads.max(1)) {
            return bad("hidden must be a multiple of heads");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The configuration as `#` comment lines.
    pub fn comment_block(&self) -> String {
        self.to_toml().lines().map(|l| format!("# {l}\n")).collect()
    }

    pub fn label_config(&self) -> LabelConfig {
        LabelConfig {
            ga: self.ga_params(),
            seed: self.seed,
            node_cap: self.node_cap,
        }
    }

    pub fn ga_params(&self) -> GaParams {
        GaParams {
            population: self.ga_population,
            generations: self.ga_generations,
            tournament: self.ga_tournament,
            mutation_rate: self.ga_mutation_rate,
        }
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            table_len: self.table_len,
            normalize_structural: self.normalize_structural,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            feature_width: self.feature_config().width(),
            hidden: self.hidden,
            layers: self.layers,
            heads: self.heads,
            init_seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                lr: self.lr,
                ..AdamConfig::default()
            },
            schedule: self.schedule,
            seed: self.seed,
            clip_norm: (self.clip_norm > 0.0).then_some(self.clip_norm),
        }
    }

    /// Beam settings per mode; both beam modes use `m/2` groups.
    pub fn search_config(&self, mode: Mode) -> SearchConfig {
        let width = match mode {
            Mode::Efficiency => return SearchConfig::for_mode(Mode::Efficiency),
            Mode::Balance => self.balance_width,
            Mode::Quality => self.quality_width,
        };
        SearchConfig {
            beam_width: width,
            groups: width / 2,
            alpha: self.alpha,
            penalty: self.penalty,
        }
    }

    pub fn cost_model(&self) -> CostModel {
        CostModel {
            not_cost: self.not_cost,
            cnot_cost: self.cnot_cost,
            toffoli_cost: self.toffoli_cost,
            toffoli_two_negative_cost: self.toffoli_two_negative_cost,
            transistors_per_control: self.transistors_per_control,
        }
    }
}
