use crate::numcore::{NamedTensors, Tensor};

use super::OptimizerKind;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Plain SGD or Adam with bias-corrected moments.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    t: i32,
    first: NamedTensors,
    second: NamedTensors,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self {
            kind,
            lr,
            t: 0,
            first: NamedTensors::new(),
            second: NamedTensors::new(),
        }
    }

    /// Updates the entries of `params` named in `grads`.
    pub fn step(&mut self, params: &mut NamedTensors, grads: &NamedTensors) {
        self.t += 1;
        let (c1, c2) = (1.0 - BETA1.powi(self.t), 1.0 - BETA2.powi(self.t));
        for (name, g) in grads {
            let Some(p) = params.get_mut(name) else { continue };
            match self.kind {
                OptimizerKind::Sgd => {
                    for (w, gv) in p.data_mut().iter_mut().zip(g.data()) {
                        *w -= self.lr * gv;
                    }
                }
                OptimizerKind::Adam => {
                    let m = self
                        .first
                        .entry(name.clone())
                        .or_insert_with(|| Tensor::zeros(g.shape()));
                    let v = self
                        .second
                        .entry(name.clone())
                        .or_insert_with(|| Tensor::zeros(g.shape()));
                    let (m, v) = (m.data_mut(), v.data_mut());
                    for (i, (w, &gv)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                        m[i] = BETA1 * m[i] + (1.0 - BETA1) * gv;
                        v[i] = BETA2 * v[i] + (1.0 - BETA2) * gv * gv;
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        *w -= self.lr * m_hat / (v_hat.sqrt() + EPS);
                    }
                }
            }
        }
    }
}
