// SPDX-License-Identifier: Apache-2.0
use bddseq::blif::parse_blif;
use bddseq::featurize::{blif2graph, FeatureConfig};
use bddseq::fixtures;
use bddseq::neural::train::{evaluate_loss, gradient_check};
use bddseq::neural::{GraphInput, Model, ModelConfig, Sample, TrainConfig, Trainer, WeightSchedule, AdamConfig};
use bddseq::order::VarOrder;

fn sample<T: bddseq::neural::Scalar>(text: &str, label: Vec<usize>) -> Sample<T> {
    let n = parse_blif(text).unwrap();
    let g = blif2graph(&n, &FeatureConfig::default()).unwrap();
    Sample {
        graph: GraphInput::new(&g),
        label: VarOrder::new(label).unwrap(),
    }
}

fn tiny() -> ModelConfig {
    ModelConfig { hidden: 8, layers: 2, heads: 2, ..ModelConfig::default() }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut m = Model::<f64>::new(tiny()).unwrap();
    // move off the exact zeros of the initial biases, where leaky-ReLU kinks sit
    for id in 0..m.params.len() {
        for (k, x) in m.params.by_id_mut(id).data_mut().iter_mut().enumerate() {
            *x += 0.05 * ((id * 31 + k) as f64).sin();
        }
    }
    let s = sample::<f64>(fixtures::C17, vec![3, 0, 4, 2, 1]);
    for schedule in [WeightSchedule::InverseLog, WeightSchedule::Uniform] {
        for (name, err) in gradient_check(&m, &s, schedule, 1e-6).unwrap() {
            assert!(err < 1e-4, "{name}: relative error {err}");
        }
    }
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let m = Model::<f32>::new(tiny()).unwrap();
    let data = vec![sample::<f32>(fixtures::C17, vec![0, 1, 2, 3, 4]), sample(fixtures::PAIRS, vec![5, 4, 3, 2, 1, 0])];
    let cfg = TrainConfig { epochs: 3, batch_size: 2, adam: AdamConfig { lr: 0.0, ..AdamConfig::default() }, ..TrainConfig::default() };
    let mut t = Trainer::new(m.clone(), cfg);
    t.train(&data, |_, _| {}).unwrap();
    assert_eq!(t.model.params, m.params);
}

#[test]
fn training_is_deterministic_and_resumable() {
    let data = vec![
        sample::<f32>(fixtures::C17, vec![0, 1, 2, 3, 4]),
        sample(fixtures::PAIRS, vec![5, 4, 3, 2, 1, 0]),
        sample(fixtures::ADDER2, vec![4, 0, 2, 1, 3]),
    ];
    let cfg = TrainConfig { epochs: 4, batch_size: 2, ..TrainConfig::default() };
    let mut a = Trainer::new(Model::<f32>::new(tiny()).unwrap(), cfg);
    let trace_a = a.train(&data, |_, _| {}).unwrap();

    let mut b = Trainer::new(Model::<f32>::new(tiny()).unwrap(), TrainConfig { epochs: 2, ..cfg });
    b.train(&data, |_, _| {}).unwrap();
    let bytes = bddseq::neural::io::save_checkpoint(&b, "");
    let (mut c, _) = bddseq::neural::io::load_checkpoint::<f32>(&bytes).unwrap();
    c.config.epochs = 4;
    let trace_c = c.train(&data, |_, _| {}).unwrap();
    assert_eq!(&trace_a[2..], &trace_c[..]);
    assert_eq!(a.model, c.model);
    assert!(evaluate_loss(&a.model, &data, cfg.schedule).unwrap().is_finite());
}
