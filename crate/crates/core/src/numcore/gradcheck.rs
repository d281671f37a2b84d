use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::{CompGraph, NamedTensors, NodeId};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Largest relative error between analytic and numeric gradients, per
/// parameter.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: BTreeMap<String, f64>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error.values().all(|&e| e <= self.tolerance)
    }

    pub fn worst(&self) -> f64 {
        self.max_rel_error.values().copied().fold(0.0, f64::max)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.max_rel_error
            .iter()
            .filter(|(_, &e)| e > self.tolerance)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

/// `|a − n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares the reverse-mode gradient of the scalar `loss` against central
/// differences `(f(θ+h) − f(θ−h)) / 2h`, `h = 1e-5`, for every entry of every
/// tensor in `params`. `fixed` binds the remaining (non-differentiated) inputs.
pub fn grad_check(
    graph: &mut CompGraph,
    loss: NodeId,
    params: &NamedTensors,
    fixed: &NamedTensors,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let mut inputs: NamedTensors = fixed.clone();
    inputs.extend(params.iter().map(|(k, v)| (k.clone(), v.clone())));

    graph.eval_forward(&inputs)?;
    let analytic = graph.backward(loss)?;

    let mut report = GradCheckReport {
        max_rel_error: BTreeMap::new(),
        tolerance,
    };
    for name in params.keys() {
        let grad = analytic
            .get(name)
            .ok_or_else(|| Error::State(format!("`{name}` is not a trainable input of the graph")))?;
        let mut worst = 0.0f64;
        for i in 0..grad.len() {
            let orig = inputs[name].data()[i];
            inputs.get_mut(name).unwrap().data_mut()[i] = orig + FD_STEP;
            let plus = eval_scalar(graph, loss, &inputs)?;
            inputs.get_mut(name).unwrap().data_mut()[i] = orig - FD_STEP;
            let minus = eval_scalar(graph, loss, &inputs)?;
            inputs.get_mut(name).unwrap().data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(grad.data()[i], numeric));
        }
        report.max_rel_error.insert(name.clone(), worst);
    }
    Ok(report)
}

fn eval_scalar(graph: &mut CompGraph, loss: NodeId, inputs: &NamedTensors) -> Result<f64> {
    graph.eval_forward(inputs)?;
    graph
        .scalar(loss)
        .ok_or_else(|| Error::State("loss node is not scalar".into()))
}
