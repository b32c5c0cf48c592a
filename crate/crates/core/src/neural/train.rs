// SPDX-License-Identifier: Apache-2.0
//! Weighted NLL with teacher forcing, Adam, and the epoch loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{GraphInput, Model, ModelError};
use super::tape::{Grads, Tape, Var};
use super::tensor::{Scalar, Tensor};
use crate::order::VarOrder;

/// Per-position loss weight `w_t`, `t` counted from zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSchedule {
    /// `1 / ln(t + 2)`.
    InverseLog,
    Uniform,
}

impl WeightSchedule {
    pub fn weight(self, t: usize) -> f64 {
        match self {
            WeightSchedule::InverseLog => 1.0 / ((t + 2) as f64).ln(),
            WeightSchedule::Uniform => 1.0,
        }
    }

    pub fn weights(self, len: usize) -> Vec<f64> {
        (0..len).map(|t| self.weight(t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error("sample {0} has an all-zero mask")]
    EmptyMask(usize),
    #[error("shape mismatch between log-probs, masks and weights")]
    Shape,
}

/// `(1/B) Σ_b Σ_t −log p_{b,t} · w_t · m_{b,t} / Σ_t m_{b,t}`.
pub fn masked_weighted_nll(log_probs: &[Vec<f64>], masks: &[Vec<f64>], weights: &[f64]) -> Result<f64, LossError> {
    if log_probs.len() != masks.len() || log_probs.is_empty() {
        return Err(LossError::Shape);
    }
    let mut total = 0.0;
    for (b, (lp, m)) in log_probs.iter().zip(masks).enumerate() {
        if lp.len() != m.len() || lp.len() > weights.len() {
            return Err(LossError::Shape);
        }
        let denom: f64 = m.iter().sum();
        if denom == 0.0 {
            return Err(LossError::EmptyMask(b));
        }
        let num: f64 = lp.iter().zip(m).zip(weights).map(|((&l, &mk), &w)| -l * w * mk).sum();
        total += num / denom;
    }
    Ok(total / log_probs.len() as f64)
}

/// Per-sample term of [`masked_weighted_nll`] on the tape, unpadded.
pub fn sample_loss<T: Scalar>(tape: &mut Tape<T>, log_probs: &[Var], schedule: WeightSchedule) -> Var {
    let inv_len = 1.0 / log_probs.len() as f64;
    let terms: Vec<Var> = log_probs
        .iter()
        .enumerate()
        .map(|(t, &lp)| tape.scale(lp, T::lit(-schedule.weight(t) * inv_len)))
        .collect();
    tape.sum_all(&terms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new<'a>(config: AdamConfig, shapes: impl Iterator<Item = &'a [usize]>) -> Adam<T> {
        let m: Vec<Tensor<T>> = shapes.map(Tensor::zeros).collect();
        Adam {
            config,
            step: 0,
            v: m.clone(),
            m,
        }
    }

    pub fn update(&mut self, model: &mut Model<T>, grads: &Grads<T>) {
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let bc1 = T::one() - T::lit(c.beta1.powi(self.step as i32));
        let bc2 = T::one() - T::lit(c.beta2.powi(self.step as i32));
        let (lr, eps) = (T::lit(c.lr), T::lit(c.eps));
        for (id, g) in grads.iter().enumerate() {
            let Some(g) = g else { continue };
            let p = model.params.by_id_mut(id);
            let (m, v) = (&mut self.m[id], &mut self.v[id]);
            for k in 0..g.len() {
                let gk = g.data()[k];
                let mk = b1 * m.data()[k] + (T::one() - b1) * gk;
                let vk = b2 * v.data()[k] + (T::one() - b2) * gk * gk;
                m.data_mut()[k] = mk;
                v.data_mut()[k] = vk;
                let update = lr * (mk / bc1) / ((vk / bc2).sqrt() + eps);
                p.data_mut()[k] = p.data()[k] - update;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Desk default 8; the published setup uses 16.
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub schedule: WeightSchedule,
    pub seed: u64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 8,
            adam: AdamConfig::default(),
            schedule: WeightSchedule::InverseLog,
            seed: 42,
            clip_norm: None,
        }
    }
}

/// One training pair.
#[derive(Debug, Clone)]
pub struct Sample<T> {
    pub graph: GraphInput<T>,
    pub label: VarOrder,
}

/// Model, optimizer state and epoch counter; enough to resume exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Trainer<T> {
    pub model: Model<T>,
    pub adam: Adam<T>,
    pub config: TrainConfig,
    pub epoch: usize,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(model: Model<T>, config: TrainConfig) -> Trainer<T> {
        let adam = Adam::new(config.adam, model.params.iter().map(|(_, t)| t.shape()));
        Trainer {
            model,
            adam,
            config,
            epoch: 0,
        }
    }

    /// Mean loss of a batch and its gradients. Samples run in parallel and
    /// their gradients are summed in sample order.
    pub fn batch_gradients(&self, batch: &[&Sample<T>]) -> Result<(f64, Grads<T>), ModelError> {
        let model = &self.model;
        let schedule = self.config.schedule;
        let per: Vec<Result<(f64, Grads<T>), ModelError>> = batch
            .par_iter()
            .map(|s| {
                let mut tape = Tape::new(&model.params);
                let lps = model.forward_teacher_forced(&mut tape, &s.graph, &s.label)?;
                let loss = sample_loss(&mut tape, &lps, schedule);
                let value = tape.value(loss).data()[0].to_f64().unwrap();
                Ok((value, tape.backward(loss)))
            })
            .collect();
        let scale = T::one() / T::from_usize(batch.len()).unwrap();
        let mut total = 0.0;
        let mut grads: Grads<T> = vec![None; model.params.len()];
        for r in per {
            let (value, g) = r?;
            total += value;
            for (acc, gi) in grads.iter_mut().zip(g) {
                let Some(gi) = gi else { continue };
                let gi = gi.map(|x| x * scale);
                match acc {
                    Some(a) => a.add_assign(&gi),
                    None => *acc = Some(gi),
                }
            }
        }
        let loss = total / batch.len() as f64;
        if !loss.is_finite() {
            return Err(ModelError::NonFinite(loss));
        }
        Ok((loss, grads))
    }

    pub fn step(&mut self, batch: &[&Sample<T>]) -> Result<f64, ModelError> {
        let (loss, mut grads) = self.batch_gradients(batch)?;
        if let Some(limit) = self.config.clip_norm {
            let norm = grads
                .iter()
                .flatten()
                .map(|g| g.data().iter().map(|x| x.to_f64().unwrap().powi(2)).sum::<f64>())
                .sum::<f64>()
                .sqrt();
            if norm > limit {
                let k = T::lit(limit / norm);
                for g in grads.iter_mut().flatten() {
                    *g = g.map(|x| x * k);
                }
            }
        }
        self.adam.update(&mut self.model, &grads);
        Ok(loss)
    }

    /// Sample order for `epoch`, a pure function of the seed and the epoch.
    pub fn epoch_order(&self, n: usize, epoch: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        idx.shuffle(&mut rng);
        idx
    }

    /// One pass over `data`; returns the mean batch loss.
    pub fn train_epoch(&mut self, data: &[Sample<T>]) -> Result<f64, ModelError> {
        assert!(!data.is_empty(), "empty training set");
        let order = self.epoch_order(data.len(), self.epoch);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(self.config.batch_size.max(1)) {
            let batch: Vec<&Sample<T>> = chunk.iter().map(|&i| &data[i]).collect();
            total += self.step(&batch)?;
            batches += 1;
        }
        self.epoch += 1;
        Ok(total / batches as f64)
    }

    /// Runs the configured epochs; `on_epoch` sees each finished epoch.
    pub fn train(
        &mut self,
        data: &[Sample<T>],
        mut on_epoch: impl FnMut(&Trainer<T>, f64),
    ) -> Result<Vec<f64>, ModelError> {
        let mut trace = Vec::new();
        while self.epoch < self.config.epochs {
            let loss = self.train_epoch(data)?;
            trace.push(loss);
            on_epoch(self, loss);
        }
        Ok(trace)
    }
}

/// Mean teacher-forced loss over `data` without updating anything.
pub fn evaluate_loss<T: Scalar>(model: &Model<T>, data: &[Sample<T>], schedule: WeightSchedule) -> Result<f64, ModelError> {
    let losses: Vec<Result<f64, ModelError>> = data
        .par_iter()
        .map(|s| {
            let mut tape = Tape::new(&model.params);
            let lps = model.forward_teacher_forced(&mut tape, &s.graph, &s.label)?;
            let loss = sample_loss(&mut tape, &lps, schedule);
            Ok(tape.value(loss).data()[0].to_f64().unwrap())
        })
        .collect();
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / data.len().max(1) as f64)
}

pub const GRADCHECK_FLOOR: f64 = 1e-8;

/// Per parameter tensor, `‖a − n‖ / (‖a‖ + ‖n‖)` between the analytic
/// gradient `a` and the central difference `n` of one sample's loss.
/// The denominator is floored at [`GRADCHECK_FLOOR`] so that a gradient
/// which is exactly zero does not turn rounding noise into error 1.
pub fn gradient_check(
    model: &Model<f64>,
    sample: &Sample<f64>,
    schedule: WeightSchedule,
    eps: f64,
) -> Result<Vec<(String, f64)>, ModelError> {
    let loss_of = |m: &Model<f64>| -> Result<f64, ModelError> {
        let mut tape = Tape::new(&m.params);
        let lps = m.forward_teacher_forced(&mut tape, &sample.graph, &sample.label)?;
        let l = sample_loss(&mut tape, &lps, schedule);
        Ok(tape.value(l).data()[0])
    };
    let mut tape = Tape::new(&model.params);
    let lps = model.forward_teacher_forced(&mut tape, &sample.graph, &sample.label)?;
    let l = sample_loss(&mut tape, &lps, schedule);
    let grads = tape.backward(l);

    let mut probe = model.clone();
    let mut out = Vec::with_capacity(model.params.len());
    for (id, name) in model.params.names().iter().enumerate() {
        let len = model.params.by_id(id).len();
        let analytic = grads[id].clone().unwrap_or_else(|| Tensor::zeros(model.params.by_id(id).shape()));
        let mut numeric = vec![0.0; len];
        for (k, slot) in numeric.iter_mut().enumerate() {
            let x = model.params.by_id(id).data()[k];
            probe.params.by_id_mut(id).data_mut()[k] = x + eps;
            let up = loss_of(&probe)?;
            probe.params.by_id_mut(id).data_mut()[k] = x - eps;
            let down = loss_of(&probe)?;
            probe.params.by_id_mut(id).data_mut()[k] = x;
            *slot = (up - down) / (2.0 * eps);
        }
        let diff: f64 = analytic.data().iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let scale = analytic.norm() + numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
        out.push((name.clone(), diff / scale.max(GRADCHECK_FLOOR)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_examples() {
        assert_eq!(masked_weighted_nll(&[vec![0.0]], &[vec![1.0]], &[1.0]).unwrap(), 0.0);
        let l = masked_weighted_nll(&[vec![-1.0, -1.0]], &[vec![1.0, 1.0]], &[1.0, 1.0]).unwrap();
        assert!((l - 1.0).abs() < 1e-15);
        assert_eq!(
            masked_weighted_nll(&[vec![-1.0]], &[vec![0.0]], &[1.0]),
            Err(LossError::EmptyMask(0))
        );
    }

    #[test]
    fn padding_matches_per_sample_average() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lens = [3usize, 5, 1, 4];
        let w = WeightSchedule::InverseLog.weights(5);
        let samples: Vec<Vec<f64>> = lens
            .iter()
            .map(|&n| (0..n).map(|_| -rng.gen::<f64>() * 3.0).collect())
            .collect();
        let padded: Vec<Vec<f64>> = samples
            .iter()
            .map(|s| {
                let mut p = s.clone();
                p.resize(5, -7.0);
                p
            })
            .collect();
        let masks: Vec<Vec<f64>> = lens
            .iter()
            .map(|&n| (0..5).map(|t| if t < n { 1.0 } else { 0.0 }).collect())
            .collect();
        let batched = masked_weighted_nll(&padded, &masks, &w).unwrap();
        let mut avg = 0.0;
        for s in &samples {
            avg += masked_weighted_nll(std::slice::from_ref(s), &[vec![1.0; s.len()]], &w).unwrap();
        }
        avg /= samples.len() as f64;
        assert!((batched - avg).abs() < 1e-12);
    }

    #[test]
    fn weights_decay() {
        let w = WeightSchedule::InverseLog.weights(4);
        assert!((w[0] - 1.0 / 2f64.ln()).abs() < 1e-15);
        assert!(w.windows(2).all(|p| p[0] > p[1]));
    }
}
