// SPDX-License-Identifier: Apache-2.0
//! Greedy decoding, beam search and diverse beam search over a pointer
//! scorer, plus re-ranking of candidate orders by BDD size.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blif::Netlist;
use crate::neural::tape::masked_log_softmax;
use crate::neural::{DecoderState, Encoded, GraphInput, Model, Scalar};
use crate::order::VarOrder;
use crate::robdd::{build_from_netlist_with_cap, BddError};

/// Autoregressive source of raw pointer scores.
pub trait StepScorer: Sync {
    type State: Clone + Send + Sync;

    fn num_tokens(&self) -> usize;
    /// State before the first selection.
    fn start(&self) -> Self::State;
    /// Raw, unmasked scores for every token.
    fn scores(&self, state: &Self::State) -> Vec<f64>;
    fn advance(&self, state: &Self::State, token: usize) -> Self::State;
}

/// A trained model bound to one encoded circuit.
pub struct ModelScorer<'a, T> {
    model: &'a Model<T>,
    enc: Encoded<T>,
}

impl<'a, T: Scalar> ModelScorer<'a, T> {
    pub fn new(model: &'a Model<T>, graph: &GraphInput<T>) -> ModelScorer<'a, T> {
        ModelScorer {
            model,
            enc: model.encode_for_decoding(graph),
        }
    }
}

impl<T: Scalar> StepScorer for ModelScorer<'_, T> {
    type State = DecoderState<T>;

    fn num_tokens(&self) -> usize {
        self.enc.pi_embeddings.rows()
    }

    fn start(&self) -> DecoderState<T> {
        self.model.decoder_advance(&self.enc, &self.enc.initial, None)
    }

    fn scores(&self, state: &DecoderState<T>) -> Vec<f64> {
        self.model
            .decoder_scores(&self.enc, state)
            .into_iter()
            .map(|x| x.to_f64().unwrap())
            .collect()
    }

    fn advance(&self, state: &DecoderState<T>, token: usize) -> DecoderState<T> {
        self.model.decoder_advance(&self.enc, state, Some(token))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Efficiency,
    Balance,
    Quality,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Mode, String> {
        match s {
            "efficiency" => Ok(Mode::Efficiency),
            "balance" => Ok(Mode::Balance),
            "quality" => Ok(Mode::Quality),
            _ => Err(format!("unknown mode `{s}` (efficiency, balance, quality)")),
        }
    }
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Efficiency => "efficiency",
            Mode::Balance => "balance",
            Mode::Quality => "quality",
        }
    }
}

/// How a token already chosen by an earlier group is penalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    /// Raw score multiplied by `1 − α`.
    Scale,
    /// Raw score minus `α` times the spread of the available raw scores.
    Subtract,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub beam_width: usize,
    pub groups: usize,
    pub alpha: f64,
    pub penalty: Penalty,
}

impl SearchConfig {
    pub fn for_mode(mode: Mode) -> SearchConfig {
        match mode {
            Mode::Efficiency => SearchConfig {
                beam_width: 1,
                groups: 1,
                alpha: 0.0,
                penalty: Penalty::Scale,
            },
            Mode::Balance => SearchConfig {
                beam_width: 20,
                groups: 10,
                alpha: 0.25,
                penalty: Penalty::Scale,
            },
            Mode::Quality => SearchConfig {
                beam_width: 50,
                groups: 25,
                alpha: 0.25,
                penalty: Penalty::Scale,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecodeError {
    #[error("beam width {width} is not a positive multiple of {groups} groups")]
    Groups { width: usize, groups: usize },
    #[error("penalty {0} is outside [0, 1]")]
    Alpha(f64),
    #[error("no candidate orders")]
    NoCandidates,
    #[error("every candidate failed: {0}")]
    AllFailed(BddError),
}

/// One selection made during search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEvent {
    pub step: usize,
    pub group: usize,
    pub beam: usize,
    pub token: usize,
    pub score: f64,
}

#[derive(Debug, Clone)]
struct Beam<S> {
    tokens: Vec<usize>,
    visited: Vec<bool>,
    score: f64,
    state: S,
}

pub fn greedy_decode<S: StepScorer>(scorer: &S) -> VarOrder {
    let n = scorer.num_tokens();
    let mut state = scorer.start();
    let mut avail = vec![true; n];
    let mut out = Vec::with_capacity(n);
    for step in 0..n {
        let lp = masked_log_softmax(&scorer.scores(&state), &avail);
        let tok = argmax_available(&lp, &avail);
        out.push(tok);
        avail[tok] = false;
        if step + 1 < n {
            state = scorer.advance(&state, tok);
        }
    }
    VarOrder::new(out).expect("masking yields a permutation")
}

fn argmax_available(v: &[f64], avail: &[bool]) -> usize {
    let mut best = usize::MAX;
    for i in 0..v.len() {
        if avail[i] && (best == usize::MAX || v[i] > v[best]) {
            best = i;
        }
    }
    best
}

/// Candidates sorted by score, ties by parent beam then token.
fn rank(c: &mut [(f64, usize, usize)]) {
    c.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
}

/// Standard beam search of width `width`.
pub fn beam_search<S: StepScorer>(scorer: &S, width: usize) -> Vec<(VarOrder, f64)> {
    let config = SearchConfig {
        beam_width: width,
        groups: 1,
        alpha: 0.0,
        penalty: Penalty::Scale,
    };
    diverse_beam_search(scorer, &config, None).expect("one group always divides the width")
}

/// Diverse beam search.
///
/// Each step starts from the pool of beams kept at the previous step. Groups
/// run in index order. Group `i` expands every pool beam; the raw score of
/// any token that an earlier group selected at this step is penalised before
/// the log-softmax. The group keeps its best `m/n` expansions not already
/// kept by an earlier group. The kept expansions of all groups form the
/// next pool. With `α = 0` this is beam search of width `m`; with `m = 1` it
/// is greedy decoding.
pub fn diverse_beam_search<S: StepScorer>(
    scorer: &S,
    config: &SearchConfig,
    mut trace: Option<&mut Vec<TraceEvent>>,
) -> Result<Vec<(VarOrder, f64)>, DecodeError> {
    let (m, g) = (config.beam_width, config.groups);
    if m == 0 || g == 0 || m % g != 0 {
        return Err(DecodeError::Groups { width: m, groups: g });
    }
    if !(0.0..=1.0).contains(&config.alpha) {
        return Err(DecodeError::Alpha(config.alpha));
    }
    let per_group = m / g;
    let n = scorer.num_tokens();
    let mut pool = vec![Beam {
        tokens: Vec::new(),
        visited: vec![false; n],
        score: 0.0,
        state: scorer.start(),
    }];

    for step in 0..n {
        let raw: Vec<Vec<f64>> = pool.par_iter().map(|b| scorer.scores(&b.state)).collect();
        let mut chosen_tokens = vec![false; n];
        let mut taken: Vec<Vec<bool>> = vec![vec![false; n]; pool.len()];
        let mut kept: Vec<(usize, usize, f64)> = Vec::with_capacity(m);
        for group in 0..g {
            let mut cands: Vec<(f64, usize, usize)> = Vec::new();
            for (bi, beam) in pool.iter().enumerate() {
                let avail: Vec<bool> = beam.visited.iter().map(|v| !v).collect();
                let scores = penalised(&raw[bi], &avail, &chosen_tokens, config);
                let lp = masked_log_softmax(&scores, &avail);
                for tok in 0..n {
                    if avail[tok] && !taken[bi][tok] {
                        cands.push((beam.score + lp[tok], bi, tok));
                    }
                }
            }
            rank(&mut cands);
            let picked: Vec<(f64, usize, usize)> = cands.into_iter().take(per_group).collect();
            for &(score, bi, tok) in &picked {
                taken[bi][tok] = true;
                if let Some(t) = trace.as_deref_mut() {
                    t.push(TraceEvent {
                        step,
                        group,
                        beam: kept.len(),
                        token: tok,
                        score,
                    });
                }
                kept.push((bi, tok, score));
            }
            for &(_, _, tok) in &picked {
                chosen_tokens[tok] = true;
            }
        }
        let last = step + 1 == n;
        pool = kept
            .par_iter()
            .map(|&(bi, tok, score)| {
                let parent = &pool[bi];
                let mut tokens = parent.tokens.clone();
                tokens.push(tok);
                let mut visited = parent.visited.clone();
                visited[tok] = true;
                let state = if last {
                    parent.state.clone()
                } else {
                    scorer.advance(&parent.state, tok)
                };
                Beam {
                    tokens,
                    visited,
                    score,
                    state,
                }
            })
            .collect();
    }

    let mut out: Vec<(VarOrder, f64)> = pool
        .into_iter()
        .map(|b| (VarOrder::new(b.tokens).expect("masking yields a permutation"), b.score))
        .collect();
    // stable: equal scores keep group order
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal));
    Ok(out)
}

fn penalised(raw: &[f64], avail: &[bool], chosen: &[bool], config: &SearchConfig) -> Vec<f64> {
    if config.alpha == 0.0 || !chosen.iter().any(|&c| c) {
        return raw.to_vec();
    }
    let spread = {
        let vals = raw.iter().zip(avail).filter(|(_, &a)| a).map(|(&x, _)| x);
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    };
    raw.iter()
        .zip(chosen)
        .map(|(&x, &c)| {
            if !c {
                x
            } else {
                match config.penalty {
                    Penalty::Scale => (1.0 - config.alpha) * x,
                    Penalty::Subtract => x - config.alpha * spread,
                }
            }
        })
        .collect()
}

/// Result of re-ranking candidates by node count.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub order: VarOrder,
    pub count: usize,
    pub score: f64,
    pub index: usize,
}

/// Smallest diagram wins, then the higher model score, then the earlier
/// candidate. Candidates that exceed the node cap are skipped.
pub fn select_best_order(
    candidates: &[(VarOrder, f64)],
    netlist: &Netlist,
    node_cap: usize,
) -> Result<Selection, DecodeError> {
    if candidates.is_empty() {
        return Err(DecodeError::NoCandidates);
    }
    let counts: Vec<Result<usize, BddError>> = candidates
        .par_iter()
        .map(|(o, _)| {
            let (mut m, roots) = build_from_netlist_with_cap(netlist, o, node_cap)?;
            Ok(m.node_count(&roots))
        })
        .collect();
    let mut best: Option<Selection> = None;
    let mut last_err = None;
    for (i, (c, (order, score))) in counts.into_iter().zip(candidates).enumerate() {
        let count = match c {
            Ok(c) => c,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let better = match &best {
            None => true,
            Some(b) => count < b.count || (count == b.count && *score > b.score),
        };
        if better {
            best = Some(Selection {
                order: order.clone(),
                count,
                score: *score,
                index: i,
            });
        }
    }
    best.ok_or_else(|| DecodeError::AllFailed(last_err.expect("some candidate failed")))
}

/// Model-score of a complete order under `scorer`.
pub fn sequence_score<S: StepScorer>(scorer: &S, order: &VarOrder) -> f64 {
    let n = scorer.num_tokens();
    let mut state = scorer.start();
    let mut avail = vec![true; n];
    let mut total = 0.0;
    for (step, &tok) in order.as_slice().iter().enumerate() {
        total += masked_log_softmax(&scorer.scores(&state), &avail)[tok];
        avail[tok] = false;
        if step + 1 < n {
            state = scorer.advance(&state, tok);
        }
    }
    total
}

/// Scores from a fixed table indexed by the full prefix.
///
/// Useful as a stand-in model: `table(prefix)` gives the raw scores after
/// `prefix` has been emitted.
pub struct TableScorer<F> {
    pub tokens: usize,
    pub table: F,
}

impl<F: Fn(&[usize]) -> Vec<f64> + Sync> StepScorer for TableScorer<F> {
    type State = Vec<usize>;

    fn num_tokens(&self) -> usize {
        self.tokens
    }

    fn start(&self) -> Vec<usize> {
        Vec::new()
    }

    fn scores(&self, prefix: &Vec<usize>) -> Vec<f64> {
        (self.table)(prefix)
    }

    fn advance(&self, prefix: &Vec<usize>, token: usize) -> Vec<usize> {
        let mut p = prefix.clone();
        p.push(token);
        p
    }
}
