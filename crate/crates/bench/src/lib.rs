//! Shared fixtures for the benchmarks: a simulated population, its question
//! graph and a freshly initialized model.

use std::sync::Arc;

use dkts::dataio::{simulate, SimulatorConfig};
use dkts::gembed::embed_gaussian;
use dkts::qgraph::build_graph;
use dkts::{CellType, InteractionSequence, ModelParams, QuestionGraph, Weighting};

pub struct Fixture {
    pub sequences: Vec<InteractionSequence>,
    pub graph: Arc<QuestionGraph>,
    pub params: ModelParams,
}

/// Default simulator with `students` students; a GRU with the default
/// hidden size over 32-dimensional Gaussian embeddings.
pub fn fixture(students: usize) -> Fixture {
    let sim = simulate(&SimulatorConfig {
        students,
        ..SimulatorConfig::default()
    })
    .expect("default simulator is valid");
    let graph = Arc::new(build_graph(&sim.skills, Weighting::Binary).expect("simulated skill map is valid"));
    let table = embed_gaussian(graph.num_questions(), 32, 1).expect("valid sizes");
    let params = ModelParams::init(CellType::Gru, &table, 64, 1).expect("valid sizes");
    Fixture {
        sequences: sim.sequences,
        graph,
        params,
    }
}
