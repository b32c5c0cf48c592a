// SPDX-License-Identifier: Apache-2.0
//! Graph-attention encoder and LSTM pointer decoder.

use std::sync::Arc;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tape::{masked_log_softmax, ParamStore, Tape, Var};
use super::tensor::{Scalar, Tensor};
use crate::featurize::CircuitGraph;
use crate::order::VarOrder;

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("graph rows have {got} features, model expects {expected}")]
    FeatureWidth { expected: usize, got: usize },
    #[error("label has {got} entries for {expected} inputs, or repeats one")]
    BadLabel { expected: usize, got: usize },
    #[error("hidden size {hidden} is not divisible by {heads} heads")]
    Heads { hidden: usize, heads: usize },
    #[error("parameter `{name}` has shape {got:?}, expected {expected:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("non-finite loss {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub feature_width: usize,
    /// Desk default 64; the published setup uses 512.
    pub hidden: usize,
    /// Desk default 3; the published setup uses 6.
    pub layers: usize,
    pub heads: usize,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            feature_width: 20,
            hidden: 64,
            layers: 3,
            heads: 4,
            init_seed: 42,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.heads == 0 || !self.hidden.is_multiple_of(self.heads) {
            return Err(ModelError::Heads {
                hidden: self.hidden,
                heads: self.heads,
            });
        }
        Ok(())
    }

    fn head_width(&self, layer: usize) -> usize {
        if layer + 1 == self.layers {
            self.hidden
        } else {
            self.hidden / self.heads
        }
    }

    /// Every parameter name with its shape, in storage order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let h = self.hidden;
        let mut v = vec![
            ("enc.in.w".to_string(), vec![self.feature_width, h]),
            ("enc.in.b".to_string(), vec![1, h]),
        ];
        for l in 0..self.layers {
            let d = self.head_width(l);
            for k in 0..self.heads {
                v.push((format!("enc.l{l}.h{k}.w"), vec![h, d]));
                v.push((format!("enc.l{l}.h{k}.a_src"), vec![d, 1]));
                v.push((format!("enc.l{l}.h{k}.a_dst"), vec![d, 1]));
            }
        }
        v.extend([
            ("dec.start".to_string(), vec![1, h]),
            ("dec.w_ih".to_string(), vec![h, 4 * h]),
            ("dec.w_hh".to_string(), vec![h, 4 * h]),
            ("dec.b".to_string(), vec![1, 4 * h]),
            ("dec.w_q".to_string(), vec![h, h]),
            ("dec.w_k".to_string(), vec![h, h]),
            ("dec.v".to_string(), vec![h, 1]),
        ]);
        v
    }
}

/// Graph tensors prepared once per circuit. Message passing runs over the
/// driver→consumer edges, their reverses and a self-loop per node.
#[derive(Debug, Clone)]
pub struct GraphInput<T> {
    pub features: Arc<Tensor<T>>,
    pub src: Arc<Vec<usize>>,
    pub dst: Arc<Vec<usize>>,
    pub nodes: usize,
    pub pis: Arc<Vec<usize>>,
}

impl<T: Scalar> GraphInput<T> {
    pub fn new(g: &CircuitGraph) -> GraphInput<T> {
        let n = g.num_nodes();
        let width = g.width();
        let data = g.features.iter().flatten().map(|&x| T::lit(x)).collect();
        let mut src: Vec<usize> = (0..n).collect();
        let mut dst: Vec<usize> = (0..n).collect();
        for &(u, v) in &g.edges {
            src.push(u);
            dst.push(v);
        }
        for &(u, v) in &g.edges {
            src.push(v);
            dst.push(u);
        }
        GraphInput {
            features: Arc::new(Tensor::matrix(n, width, data)),
            src: Arc::new(src),
            dst: Arc::new(dst),
            nodes: n,
            pis: Arc::new(g.pi_positions.clone()),
        }
    }

    pub fn num_pis(&self) -> usize {
        self.pis.len()
    }
}

/// Decoder recurrent state after consuming the previous selection.
#[derive(Debug, Clone)]
pub struct DecoderState<T> {
    pub hidden: Arc<Tensor<T>>,
    pub cell: Arc<Tensor<T>>,
}

/// Encoder output reused across decoding steps.
#[derive(Debug, Clone)]
pub struct Encoded<T> {
    pub pi_embeddings: Arc<Tensor<T>>,
    pub keys: Arc<Tensor<T>>,
    pub initial: DecoderState<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
}

impl<T: Scalar> Model<T> {
    /// Xavier-uniform weights, zero biases except a forget-gate bias of one.
    pub fn new(config: ModelConfig) -> Result<Model<T>, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut params = ParamStore::default();
        let h = config.hidden;
        for (name, shape) in config.param_shapes() {
            let t = if name == "dec.b" {
                let mut b = vec![T::zero(); 4 * h];
                b[h..2 * h].iter_mut().for_each(|x| *x = T::one());
                Tensor::new(shape, b)
            } else if name.ends_with(".b") {
                Tensor::zeros(&shape)
            } else {
                let (fan_in, fan_out) = (shape[0], shape[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit);
                let n = fan_in * fan_out;
                Tensor::new(shape, (0..n).map(|_| T::lit(dist.sample(&mut rng))).collect())
            };
            params.insert(&name, t);
        }
        Ok(Model { config, params })
    }

    /// Checks names and shapes of a loaded parameter set.
    pub fn from_params(config: ModelConfig, params: ParamStore<T>) -> Result<Model<T>, ModelError> {
        config.validate()?;
        for (name, shape) in config.param_shapes() {
            let id = params.id(&name).ok_or_else(|| ModelError::MissingParam(name.clone()))?;
            let got = params.by_id(id).shape().to_vec();
            if got != shape {
                return Err(ModelError::Shape {
                    name,
                    expected: shape,
                    got,
                });
            }
        }
        Ok(Model { config, params })
    }

    pub fn check_graph(&self, g: &CircuitGraph) -> Result<(), ModelError> {
        if g.width() != self.config.feature_width {
            return Err(ModelError::FeatureWidth {
                expected: self.config.feature_width,
                got: g.width(),
            });
        }
        Ok(())
    }

    /// Node embeddings, `nodes × hidden`.
    pub fn encode(&self, tape: &mut Tape<T>, g: &GraphInput<T>) -> Var {
        let cfg = &self.config;
        let x = tape.constant_shared(g.features.clone());
        let w_in = tape.param("enc.in.w");
        let b_in = tape.param("enc.in.b");
        let xw = tape.matmul(x, w_in);
        let mut h = tape.add_row(xw, b_in);
        for l in 0..cfg.layers {
            let mut outs = Vec::with_capacity(cfg.heads);
            for k in 0..cfg.heads {
                let w = tape.param(&format!("enc.l{l}.h{k}.w"));
                let a_src = tape.param(&format!("enc.l{l}.h{k}.a_src"));
                let a_dst = tape.param(&format!("enc.l{l}.h{k}.a_dst"));
                let wh = tape.matmul(h, w);
                let s_src = tape.matmul(wh, a_src);
                let s_dst = tape.matmul(wh, a_dst);
                let e_src = tape.gather_rows(s_src, g.src.clone());
                let e_dst = tape.gather_rows(s_dst, g.dst.clone());
                let e = tape.add(e_src, e_dst);
                let e = tape.leaky_relu(e, T::lit(LEAKY_SLOPE));
                let alpha = tape.segment_softmax(e, g.dst.clone(), g.nodes);
                let msg = tape.gather_rows(wh, g.src.clone());
                let msg = tape.mul_col(msg, alpha);
                outs.push(tape.scatter_add_rows(msg, g.dst.clone(), g.nodes));
            }
            let combined = if l + 1 == cfg.layers {
                let s = tape.sum_all(&outs);
                tape.scale(s, T::one() / T::from_usize(cfg.heads).unwrap())
            } else {
                tape.concat_cols(&outs)
            };
            let act = tape.elu(combined);
            h = tape.add(h, act);
        }
        h
    }

    /// One LSTM step (gate order input, forget, cell, output).
    pub fn lstm_step(&self, tape: &mut Tape<T>, x: Var, h: Var, c: Var) -> (Var, Var) {
        let hd = self.config.hidden;
        let w_ih = tape.param("dec.w_ih");
        let w_hh = tape.param("dec.w_hh");
        let b = tape.param("dec.b");
        let zx = tape.matmul(x, w_ih);
        let zh = tape.matmul(h, w_hh);
        let z = tape.add(zx, zh);
        let z = tape.add_row(z, b);
        let zi = tape.slice_cols(z, 0, hd);
        let zf = tape.slice_cols(z, hd, 2 * hd);
        let zg = tape.slice_cols(z, 2 * hd, 3 * hd);
        let zo = tape.slice_cols(z, 3 * hd, 4 * hd);
        let i = tape.sigmoid(zi);
        let f = tape.sigmoid(zf);
        let gg = tape.tanh(zg);
        let o = tape.sigmoid(zo);
        let fc = tape.mul(f, c);
        let ig = tape.mul(i, gg);
        let c2 = tape.add(fc, ig);
        let tc = tape.tanh(c2);
        let h2 = tape.mul(o, tc);
        (h2, c2)
    }

    /// Raw pointer scores `vᵀ tanh(W_k e_i + W_q h)`, one row per PI.
    pub fn pointer_scores(&self, tape: &mut Tape<T>, keys: Var, h: Var) -> Var {
        let w_q = tape.param("dec.w_q");
        let v = tape.param("dec.v");
        let q = tape.matmul(h, w_q);
        let kq = tape.add_row(keys, q);
        let t = tape.tanh(kq);
        tape.matmul(t, v)
    }

    /// Log-probabilities of each label token with the previous label token
    /// fed back at every step.
    pub fn forward_teacher_forced(
        &self,
        tape: &mut Tape<T>,
        g: &GraphInput<T>,
        label: &VarOrder,
    ) -> Result<Vec<Var>, ModelError> {
        let p = g.num_pis();
        if label.len() != p {
            return Err(ModelError::BadLabel {
                expected: p,
                got: label.len(),
            });
        }
        let emb = self.encode(tape, g);
        let epi = tape.gather_rows(emb, g.pis.clone());
        let w_k = tape.param("dec.w_k");
        let keys = tape.matmul(epi, w_k);
        let mut h = tape.mean_rows(emb);
        let mut c = tape.constant(Tensor::zeros(&[1, self.config.hidden]));
        let mut x = tape.param("dec.start");
        let mut avail = vec![true; p];
        let mut out = Vec::with_capacity(p);
        for &y in label.as_slice() {
            (h, c) = self.lstm_step(tape, x, h, c);
            let s = self.pointer_scores(tape, keys, h);
            let lp = tape.masked_log_softmax(s, avail.clone());
            out.push(tape.pick(lp, y));
            avail[y] = false;
            x = tape.gather_rows(epi, Arc::new(vec![y]));
        }
        Ok(out)
    }

    pub fn encode_for_decoding(&self, g: &GraphInput<T>) -> Encoded<T> {
        let mut tape = Tape::new(&self.params);
        let emb = self.encode(&mut tape, g);
        let epi = tape.gather_rows(emb, g.pis.clone());
        let w_k = tape.param("dec.w_k");
        let keys = tape.matmul(epi, w_k);
        let h = tape.mean_rows(emb);
        Encoded {
            pi_embeddings: tape.shared_value(epi),
            keys: tape.shared_value(keys),
            initial: DecoderState {
                hidden: tape.shared_value(h),
                cell: Arc::new(Tensor::zeros(&[1, self.config.hidden])),
            },
        }
    }

    /// Advances the decoder on `prev` (`None` is the start token).
    pub fn decoder_advance(&self, enc: &Encoded<T>, state: &DecoderState<T>, prev: Option<usize>) -> DecoderState<T> {
        let mut tape = Tape::new(&self.params);
        let x = match prev {
            None => tape.param("dec.start"),
            Some(t) => {
                let epi = tape.constant_shared(enc.pi_embeddings.clone());
                tape.gather_rows(epi, Arc::new(vec![t]))
            }
        };
        let h = tape.constant_shared(state.hidden.clone());
        let c = tape.constant_shared(state.cell.clone());
        let (h2, c2) = self.lstm_step(&mut tape, x, h, c);
        DecoderState {
            hidden: tape.shared_value(h2),
            cell: tape.shared_value(c2),
        }
    }

    pub fn decoder_scores(&self, enc: &Encoded<T>, state: &DecoderState<T>) -> Vec<T> {
        let mut tape = Tape::new(&self.params);
        let keys = tape.constant_shared(enc.keys.clone());
        let h = tape.constant_shared(state.hidden.clone());
        let s = self.pointer_scores(&mut tape, keys, h);
        tape.value(s).data().to_vec()
    }

    /// Log-probabilities over PIs for one step; visited PIs get zero mass.
    pub fn pointer_step(
        &self,
        enc: &Encoded<T>,
        state: &DecoderState<T>,
        prev: Option<usize>,
        visited: &[bool],
    ) -> (Vec<T>, DecoderState<T>) {
        let next = self.decoder_advance(enc, state, prev);
        let scores = self.decoder_scores(enc, &next);
        let avail: Vec<bool> = visited.iter().map(|v| !v).collect();
        (masked_log_softmax(&scores, &avail), next)
    }
}
