use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::dataio::{Interaction, InteractionSequence};
use crate::error::{Error, Result};
use crate::evaluator;
use crate::ktmodel::ModelParams;
use crate::numcore::{CompGraph, NamedTensors};
use crate::qgraph::QuestionGraph;
use crate::rng;

use super::{build_loss, LossBreakdown, Optimizer, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean over training windows, measured before each batch's update.
    pub loss: LossBreakdown,
    pub valid_auc: Option<f64>,
    pub wall_secs: f64,
}

impl EpochRecord {
    /// `epoch, 𝓛_p, 𝓛_r, 𝓛, validation AUC, wall time`, tab-separated.
    pub fn write_line<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let auc = self.valid_auc.map_or_else(|| "NA".to_string(), |a| format!("{a:.6}"));
        writeln!(
            w,
            "{}\t{:.6}\t{:.6}\t{:.6}\t{auc}\t{:.3}",
            self.epoch, self.loss.prediction, self.loss.relation, self.loss.total, self.wall_secs
        )
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    /// Parameters of the best validation epoch, or of the last epoch when
    /// no validation set is given.
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

/// Cuts sequences into windows of at most `max_len` interactions; windows
/// shorter than two interactions carry no prediction and are dropped.
fn windows(seqs: &[InteractionSequence], max_len: usize) -> Vec<&[Interaction]> {
    seqs.iter()
        .flat_map(|s| s.interactions.chunks(max_len))
        .filter(|w| w.len() >= 2)
        .collect()
}

/// Mini-batch training with shuffled windows, global-norm gradient clipping
/// and early stopping on validation AUC.
pub fn fit(
    train: &[InteractionSequence],
    valid: Option<&[InteractionSequence]>,
    mut params: ModelParams,
    graph: Option<Arc<QuestionGraph>>,
    cfg: &TrainConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    params.validate()?;
    if train.is_empty() {
        return Err(Error::validation("training set is empty"));
    }
    if cfg.alpha > 0.0 && graph.is_none() {
        return Err(Error::validation("alpha > 0 needs a question graph"));
    }
    if let Some(g) = &graph {
        if g.num_questions() != params.num_questions() {
            return Err(Error::validation(format!(
                "graph has {} questions, model has {}",
                g.num_questions(),
                params.num_questions()
            )));
        }
    }
    params.train_embedding = cfg.fine_tune_embeddings;
    let windows = windows(train, cfg.max_seq_len);
    if windows.is_empty() {
        return Err(Error::validation("no training sequence has two or more interactions"));
    }
    let valid = valid.filter(|v| !v.is_empty());

    let mut shuffle_rng = rng::stream(cfg.seed, rng::tags::SHUFFLE);
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, NamedTensors)> = None;
    let mut since_best = 0;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let mut sums = (0.0, 0.0, 0.0);
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut grad_sum: Option<NamedTensors> = None;
            for (pos, &w) in batch.iter().enumerate() {
                let diverged = || Error::Diverged {
                    epoch,
                    batch: batch_idx,
                    step: pos,
                };
                let mut g = CompGraph::new();
                let nodes = build_loss(&mut g, windows[w], &params, graph.as_ref(), cfg.alpha)?;
                let out = g.eval_forward(&params.tensors).map_err(|e| match e {
                    Error::Numeric { .. } => diverged(),
                    other => other,
                })?;
                let lp = out["prediction"].data()[0];
                let lr = out.get("relation").map_or(0.0, |t| t.data()[0]);
                let total = out["total"].data()[0];
                if !total.is_finite() {
                    return Err(diverged());
                }
                sums.0 += lp;
                sums.1 += lr;
                sums.2 += total;
                let grads = g.backward(nodes.total)?;
                match &mut grad_sum {
                    None => grad_sum = Some(grads),
                    Some(acc) => {
                        for (name, t) in grads {
                            acc.get_mut(&name).expect("same parameter set").add_assign(&t)?;
                        }
                    }
                }
            }
            let mut grads = grad_sum.expect("batches are nonempty");
            let inv = 1.0 / batch.len() as f64;
            let mut norm_sq = 0.0;
            for t in grads.values_mut() {
                t.data_mut().iter_mut().for_each(|v| *v *= inv);
                norm_sq += t.norm_sq();
            }
            let norm = norm_sq.sqrt();
            if !norm.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: batch_idx,
                    step: 0,
                });
            }
            if cfg.clip_norm > 0.0 && norm > cfg.clip_norm {
                let k = cfg.clip_norm / norm;
                grads
                    .values_mut()
                    .for_each(|t| t.data_mut().iter_mut().for_each(|v| *v *= k));
            }
            optimizer.step(&mut params.tensors, &grads);
        }
        let n = windows.len() as f64;
        let loss = LossBreakdown {
            prediction: sums.0 / n,
            relation: sums.1 / n,
            total: sums.2 / n,
        };
        let valid_auc = match valid {
            Some(v) => Some(evaluator::evaluate(&params, v)?.auc),
            None => None,
        };
        history.push(EpochRecord {
            epoch,
            loss,
            valid_auc,
            wall_secs: started.elapsed().as_secs_f64(),
        });
        if let Some(auc) = valid_auc {
            if best.as_ref().is_none_or(|(b, _, _)| auc > *b) {
                best = Some((auc, epoch, params.tensors.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if cfg.patience > 0 && since_best >= cfg.patience {
                    break;
                }
            }
        }
    }

    let best_epoch = best.as_ref().map(|(_, e, _)| *e);
    if let Some((_, _, tensors)) = best {
        params.tensors = tensors;
    }
    Ok(FitResult {
        params,
        history,
        best_epoch,
    })
}

/// Result of [`tune_alpha`].
#[derive(Clone, Debug)]
pub struct AlphaSearch {
    pub alpha: f64,
    /// The run trained with `alpha`.
    pub fit: FitResult,
    /// Best validation AUC of every grid value, in grid order.
    pub scores: Vec<(f64, f64)>,
}

/// Trains once per `alpha` in `grid` and keeps the run with the highest
/// validation AUC (earliest on ties).
pub fn tune_alpha(
    train: &[InteractionSequence],
    valid: &[InteractionSequence],
    params: &ModelParams,
    graph: Arc<QuestionGraph>,
    cfg: &TrainConfig,
    grid: &[f64],
) -> Result<AlphaSearch> {
    if grid.is_empty() {
        return Err(Error::validation("alpha grid is empty"));
    }
    let mut best: Option<(f64, f64, FitResult)> = None;
    let mut scores = Vec::with_capacity(grid.len());
    for &alpha in grid {
        let run_cfg = TrainConfig { alpha, ..cfg.clone() };
        let fitted = fit(train, Some(valid), params.clone(), Some(graph.clone()), &run_cfg)?;
        let auc = evaluator::evaluate(&fitted.params, valid)?.auc;
        scores.push((alpha, auc));
        if best.as_ref().is_none_or(|b| auc > b.1) {
            best = Some((alpha, auc, fitted));
        }
    }
    let (alpha, _, fit) = best.expect("grid is nonempty");
    Ok(AlphaSearch { alpha, fit, scores })
}
