use crate::dataio::Interaction;
use crate::error::{Error, Result};
use crate::numcore::{CompGraph, NodeId, Tensor};

use super::{encode_with, CellType, ModelParams, EMBEDDING, HEAD_B, HEAD_W};

/// Records the recurrence over `items` into `g` and returns the `n − 1`
/// prediction nodes (`1 × Q` rows). Parameters become named graph inputs;
/// the embedding is a trainable input only when `params.train_embedding`
/// is set, otherwise encoded interactions enter as constants.
pub fn unroll(g: &mut CompGraph, items: &[Interaction], params: &ModelParams) -> Result<Vec<NodeId>> {
    if items.len() < 2 {
        return Err(Error::validation(format!(
            "unrolling needs at least 2 interactions, got {}",
            items.len()
        )));
    }
    let q = params.num_questions();
    let n_h = params.hidden;
    let mut h = g.constant(Tensor::zeros(&[1, n_h]));
    let mut c = g.constant(Tensor::zeros(&[1, n_h]));
    let ones = g.constant(Tensor::filled(&[1, n_h], 1.0));
    let head_w = g.param(HEAD_W);
    let head_b = g.param(HEAD_B);
    let embedding = params.train_embedding.then(|| g.param(EMBEDDING));

    let mut preds = Vec::with_capacity(items.len() - 1);
    for &x in &items[..items.len() - 1] {
        let input = match embedding {
            Some(e_node) => {
                if x.question >= q {
                    return Err(Error::Index {
                        what: "question",
                        index: x.question,
                        bound: q,
                    });
                }
                let mut onehot = Tensor::zeros(&[1, q]);
                onehot.data_mut()[x.question] = 1.0;
                let onehot = g.constant(onehot);
                let e = g.matmul(onehot, e_node);
                let gated = g.scale(e, if x.correct { 1.0 } else { 0.0 });
                g.concat(e, gated)
            }
            None => g.constant(Tensor::row(encode_with(params, x)?)),
        };
        match params.cell {
            CellType::Rnn => {
                let a = affine(g, "", input, h);
                h = g.tanh(a);
            }
            CellType::Lstm => {
                let i = affine(g, "_i", input, h);
                let i = g.sigmoid(i);
                let f = affine(g, "_f", input, h);
                let f = g.sigmoid(f);
                let o = affine(g, "_o", input, h);
                let o = g.sigmoid(o);
                let cand = affine(g, "_g", input, h);
                let cand = g.tanh(cand);
                let keep = g.mul(f, c);
                let write = g.mul(i, cand);
                c = g.add(keep, write);
                let tc = g.tanh(c);
                h = g.mul(o, tc);
            }
            CellType::Gru => {
                let z = affine(g, "_z", input, h);
                let z = g.sigmoid(z);
                let r = affine(g, "_r", input, h);
                let r = g.sigmoid(r);
                let rh = g.mul(r, h);
                let cand = affine(g, "_h", input, rh);
                let cand = g.tanh(cand);
                let one_minus_z = g.sub(ones, z);
                let keep = g.mul(one_minus_z, h);
                let write = g.mul(z, cand);
                h = g.add(keep, write);
            }
        }
        let logits = g.matmul(h, head_w);
        let logits = g.add(logits, head_b);
        preds.push(g.sigmoid(logits));
    }
    Ok(preds)
}

fn affine(g: &mut CompGraph, suffix: &str, x: NodeId, h: NodeId) -> NodeId {
    let w = g.param(&format!("W{suffix}"));
    let u = g.param(&format!("U{suffix}"));
    let b = g.param(&format!("b{suffix}"));
    let xw = g.matmul(x, w);
    let hu = g.matmul(h, u);
    let s = g.add(xw, hu);
    g.add(s, b)
}
