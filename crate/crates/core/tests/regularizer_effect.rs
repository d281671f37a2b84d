use std::sync::Arc;

use dkts::dataio::{simulate, split, SimulatorConfig};
use dkts::gembed::embed_gaussian;
use dkts::ktmodel::forward_sequence;
use dkts::qgraph::build_graph;
use dkts::trainer::{fit, loss_relation};
use dkts::{CellType, InteractionSequence, ModelParams, QuestionGraph, TrainConfig, Weighting};

/// Mean per-step smoothness penalty on held-out sequences.
fn mean_relation(params: &ModelParams, g: &QuestionGraph, seqs: &[InteractionSequence]) -> f64 {
    let (mut total, mut n) = (0.0, 0usize);
    for s in seqs {
        for p in forward_sequence(s, params).unwrap() {
            total += loss_relation(&p, g).unwrap();
            n += 1;
        }
    }
    total / n as f64
}

#[test]
fn stronger_regularization_gives_smoother_predictions() {
    let sim = simulate(&SimulatorConfig {
        students: 60,
        ..SimulatorConfig::default()
    })
    .unwrap();
    let g = Arc::new(build_graph(&sim.skills, Weighting::Binary).unwrap());
    let (mut off, mut on) = (0.0, 0.0);
    for seed in 0..5 {
        let parts = split(&sim.sequences, 0.7, 0.1, seed).unwrap();
        let table = embed_gaussian(g.num_questions(), 8, seed).unwrap();
        let params = ModelParams::init(CellType::Gru, &table, 16, seed).unwrap();
        for (alpha, acc) in [(0.0, &mut off), (1.0, &mut on)] {
            let cfg = TrainConfig {
                alpha,
                epochs: 5,
                patience: 0,
                seed,
                ..TrainConfig::default()
            };
            let fitted = fit(&parts.train, None, params.clone(), Some(g.clone()), &cfg).unwrap();
            *acc += mean_relation(&fitted.params, &g, &parts.test) / 5.0;
        }
    }
    assert!(on < off, "α=1 penalty {on} should be below α=0 penalty {off}");
}
