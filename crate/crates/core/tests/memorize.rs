// SPDX-License-Identifier: Apache-2.0
use std::time::Instant;

use bddseq::blif::parse_blif;
use bddseq::decode::{greedy_decode, ModelScorer};
use bddseq::featurize::{blif2graph, FeatureConfig};
use bddseq::fixtures;
use bddseq::neural::{kendall_tau, GraphInput, Model, ModelConfig, Sample, TrainConfig, Trainer};
use bddseq::robdd::{generate_label, LabelConfig};

#[test]
fn single_circuit_is_memorized() {
    let netlist = parse_blif(fixtures::C17).unwrap();
    let label = generate_label(&netlist, &LabelConfig::default()).unwrap().order;
    let g = blif2graph(&netlist, &FeatureConfig::default()).unwrap();
    let sample = Sample::<f32> {
        graph: GraphInput::new(&g),
        label: label.clone(),
    };
    let mut t = Trainer::new(Model::new(ModelConfig::default()).unwrap(), TrainConfig::default());
    let start = Instant::now();
    let mut done = None;
    for step in 1..=2000 {
        let loss = t.step(&[&sample]).unwrap();
        if loss < 0.01 {
            let pred = greedy_decode(&ModelScorer::new(&t.model, &sample.graph));
            if kendall_tau(&pred, &label).unwrap() == 1.0 {
                done = Some((step, loss));
                break;
            }
        }
    }
    let (step, loss) = done.expect("not memorized within 2000 steps");
    eprintln!("memorized after {step} steps (loss {loss:.5}, {:?})", start.elapsed());
}

#[test]
fn one_input_decodes_to_itself() {
    let netlist = parse_blif(".model buf\n.inputs a\n.outputs y\n.names a y\n1 1\n.end\n").unwrap();
    let g = blif2graph(&netlist, &FeatureConfig::default()).unwrap();
    let m = Model::<f32>::new(ModelConfig::default()).unwrap();
    let graph = GraphInput::new(&g);
    assert_eq!(greedy_decode(&ModelScorer::new(&m, &graph)).as_slice(), &[0]);
}
