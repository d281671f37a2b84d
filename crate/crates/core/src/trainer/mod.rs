//! Loss composition and training.
//!
//! Per sequence, `𝓛 = 𝓛_p + α 𝓛_r`: `𝓛_p` is the mean binary cross-entropy
//! of `p_t(q_{t+1})` against `a_{t+1}`, and `𝓛_r` the mean over steps of the
//! Laplacian penalty `½ p_tᵀ L p_t`.

mod fit;
mod optim;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::dataio::{Interaction, InteractionSequence};
use crate::error::{Error, Result};
use crate::ktmodel::{self, ModelParams, PredictionVector};
use crate::numcore::{CompGraph, NodeId, QuadraticForm, Tensor};
use crate::qgraph::{self, QuestionGraph};

pub use fit::{fit, tune_alpha, AlphaSearch, EpochRecord, FitResult};
pub use optim::Optimizer;

/// Probabilities are clamped to `[ε, 1 − ε]` before the logarithm.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::validation(format!("unknown optimizer `{other}` (sgd|adam)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Weight of the relation regularizer.
    pub alpha: f64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub epochs: usize,
    pub batch_size: usize,
    /// Truncation window; longer sequences are cut into independent windows.
    pub max_seq_len: usize,
    /// Global gradient-norm clip; `0` disables clipping.
    pub clip_norm: f64,
    pub seed: u64,
    pub fine_tune_embeddings: bool,
    /// Epochs without validation-AUC improvement before stopping; `0`
    /// disables early stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            epochs: 20,
            batch_size: 8,
            max_seq_len: 100,
            clip_norm: 5.0,
            seed: 42,
            fine_tune_embeddings: false,
            patience: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::validation(format!("alpha must be ≥ 0, got {}", self.alpha)));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::validation(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch size must be ≥ 1"));
        }
        if self.max_seq_len < 2 {
            return Err(Error::validation("max sequence length must be ≥ 2"));
        }
        if self.clip_norm.is_nan() || self.clip_norm < 0.0 {
            return Err(Error::validation("clip norm must be ≥ 0"));
        }
        Ok(())
    }
}

/// `total = prediction + α · relation`
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub prediction: f64,
    pub relation: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(prediction: f64, relation: f64, alpha: f64) -> Self {
        let total = if alpha == 0.0 {
            prediction
        } else {
            prediction + alpha * relation
        };
        Self {
            prediction,
            relation,
            total,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.prediction.is_finite() && self.relation.is_finite() && self.total.is_finite()
    }
}

/// Cross-entropy of the entry of `p` for `next.question` against
/// `next.correct`, with the probability clamped to `[ε, 1 − ε]`.
pub fn loss_prediction(p: &PredictionVector, next: Interaction) -> Result<f64> {
    if next.question >= p.len() {
        return Err(Error::Index {
            what: "question",
            index: next.question,
            bound: p.len(),
        });
    }
    let prob = p.get(next.question).clamp(PROB_EPS, 1.0 - PROB_EPS);
    Ok(if next.correct { -prob.ln() } else { -(1.0 - prob).ln() })
}

/// `½ pᵀ L p`
pub fn loss_relation(p: &PredictionVector, g: &QuestionGraph) -> Result<f64> {
    qgraph::quad_form(g, p.as_slice())
}

/// Loss of one sequence, evaluated directly (no computation graph).
/// Without a graph the relation term is zero.
pub fn sequence_loss(
    seq: &InteractionSequence,
    params: &ModelParams,
    g: Option<&QuestionGraph>,
    alpha: f64,
) -> Result<LossBreakdown> {
    let preds = ktmodel::forward_sequence(seq, params)?;
    let n = preds.len() as f64;
    let mut lp = 0.0;
    let mut lr = 0.0;
    for (p, &next) in preds.iter().zip(&seq.interactions[1..]) {
        lp += loss_prediction(p, next)?;
        if let Some(g) = g {
            lr += loss_relation(p, g)?;
        }
    }
    Ok(LossBreakdown::new(lp / n, lr / n, alpha))
}

/// Scalar loss nodes recorded for one window.
#[derive(Clone, Copy, Debug)]
pub struct LossNodes {
    pub prediction: NodeId,
    pub relation: Option<NodeId>,
    /// `prediction + α · relation`, or `prediction` itself when `α = 0`.
    pub total: NodeId,
}

/// Records the model and loss for `items` into `graph`.
///
/// With `α = 0` the relation term is still recorded (for reporting) but the
/// total is the prediction node itself, so gradients are exactly those of a
/// build without the regularizer.
pub fn build_loss(
    graph: &mut CompGraph,
    items: &[Interaction],
    params: &ModelParams,
    relation: Option<&Arc<QuestionGraph>>,
    alpha: f64,
) -> Result<LossNodes> {
    let preds = ktmodel::unroll(graph, items, params)?;
    let q = params.num_questions();
    let scale = 1.0 / preds.len() as f64;
    let one = graph.constant(Tensor::scalar(1.0));

    let mut terms = Vec::with_capacity(preds.len());
    let mut penalties = Vec::with_capacity(preds.len());
    for (&p, &next) in preds.iter().zip(&items[1..]) {
        if next.question >= q {
            return Err(Error::Index {
                what: "question",
                index: next.question,
                bound: q,
            });
        }
        let mut onehot = Tensor::zeros(&[1, q]);
        onehot.data_mut()[next.question] = 1.0;
        let onehot = graph.constant(onehot);
        let selected = graph.dot(p, onehot);
        let selected = graph.clamp(selected, PROB_EPS, 1.0 - PROB_EPS);
        let likelihood = if next.correct {
            selected
        } else {
            graph.sub(one, selected)
        };
        let log = graph.log(likelihood);
        terms.push(graph.scale(log, -1.0));
        if let Some(g) = relation {
            let form: Arc<dyn QuadraticForm> = g.clone();
            penalties.push(graph.quad_form(p, form));
        }
    }
    let prediction = mean_of(graph, &terms, scale);
    let relation = (!penalties.is_empty()).then(|| mean_of(graph, &penalties, scale));
    let total = match relation {
        Some(r) if alpha != 0.0 => {
            let weighted = graph.scale(r, alpha);
            graph.add(prediction, weighted)
        }
        _ => prediction,
    };
    graph.mark_output("prediction", prediction);
    if let Some(r) = relation {
        graph.mark_output("relation", r);
    }
    graph.mark_output("total", total);
    Ok(LossNodes {
        prediction,
        relation,
        total,
    })
}

fn mean_of(graph: &mut CompGraph, nodes: &[NodeId], scale: f64) -> NodeId {
    let mut acc = nodes[0];
    for &n in &nodes[1..] {
        acc = graph.add(acc, n);
    }
    graph.scale(acc, scale)
}
