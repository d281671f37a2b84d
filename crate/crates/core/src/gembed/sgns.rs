use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::{dot, sigmoid, Tensor};
use crate::rng;

use super::sampling::CumulativeSampler;
use super::{EmbedMethod, EmbeddingTable, SgnsConfig};

/// Skip-gram negative-sampling loss of one pair:
/// `−log σ(u·v) − Σ_n log σ(−u·v_n)`.
pub fn pair_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    let pos = -ln_sigmoid(dot(center, context));
    let neg: f64 = negatives.iter().map(|v| -ln_sigmoid(-dot(center, v))).sum();
    pos + neg
}

/// `ln σ(x)` without overflow.
fn ln_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Two vector families updated by stochastic gradient steps. `shared`
/// makes the context family an alias of the center family (LINE first
/// order).
pub(super) struct SgnsState {
    pub(super) dim: usize,
    pub(super) center: Vec<f64>,
    pub(super) context: Vec<f64>,
    shared: bool,
    grad: Vec<f64>,
}

impl SgnsState {
    pub(super) fn new<R: Rng>(n: usize, dim: usize, shared: bool, r: &mut R) -> Self {
        let scale = 0.5 / dim as f64;
        let center = (0..n * dim).map(|_| (r.random::<f64>() - 0.5) * 2.0 * scale).collect();
        Self {
            dim,
            center,
            context: if shared { Vec::new() } else { vec![0.0; n * dim] },
            shared,
            grad: vec![0.0; dim],
        }
    }

    /// One positive target and `negatives` noise targets for `c`.
    pub(super) fn update<R: Rng>(
        &mut self,
        c: usize,
        target: usize,
        negatives: usize,
        noise: &CumulativeSampler,
        lr: f64,
        r: &mut R,
    ) {
        let d = self.dim;
        let grad = &mut self.grad;
        grad.fill(0.0);
        for k in 0..=negatives {
            let (t, label) = if k == 0 {
                (target, 1.0)
            } else {
                let n = noise.sample(r);
                if n == target {
                    continue;
                }
                (n, 0.0)
            };
            if self.shared && t == c {
                continue;
            }
            let (u, v) = rows_mut(&mut self.center, &mut self.context, self.shared, d, c, t);
            let g = (label - sigmoid(dot(u, v))) * lr;
            for i in 0..d {
                grad[i] += g * v[i];
                v[i] += g * u[i];
            }
        }
        let u = &mut self.center[c * d..(c + 1) * d];
        for (ui, gi) in u.iter_mut().zip(grad.iter()) {
            *ui += gi;
        }
    }

    pub(super) fn into_table(self, n: usize, method: EmbedMethod, seed: u64) -> Result<EmbeddingTable> {
        EmbeddingTable::new(method, seed, Tensor::matrix(n, self.dim, self.center)?)
    }
}

/// Center row of `c` and context row of `t`; with a shared family both come
/// from `center` and `c != t`.
fn rows_mut<'a>(
    center: &'a mut [f64],
    context: &'a mut [f64],
    shared: bool,
    d: usize,
    c: usize,
    t: usize,
) -> (&'a [f64], &'a mut [f64]) {
    if shared {
        if c < t {
            let (lo, hi) = center.split_at_mut(t * d);
            (&lo[c * d..(c + 1) * d], &mut hi[..d])
        } else {
            let (lo, hi) = center.split_at_mut(c * d);
            (&hi[..d], &mut lo[t * d..(t + 1) * d])
        }
    } else {
        (&center[c * d..(c + 1) * d], &mut context[t * d..(t + 1) * d])
    }
}

/// Linear step-size decay to `1e-4` of the initial rate.
pub(super) fn decayed(lr: f64, done: usize, total: usize) -> f64 {
    lr * (1.0 - done as f64 / total.max(1) as f64).max(1e-4)
}

/// Noise distribution `count(x)^exponent` over nodes seen as contexts.
fn noise_from_pairs(pairs: &[(usize, usize)], n: usize, exponent: f64) -> Option<CumulativeSampler> {
    let mut counts = vec![0usize; n];
    for &(_, x) in pairs {
        counts[x] += 1;
    }
    CumulativeSampler::new(
        counts
            .into_iter()
            .map(|c| if c == 0 { 0.0 } else { (c as f64).powf(exponent) }),
    )
}

/// Trains center and context vectors on `(center, context)` pairs and
/// returns the center vectors. The pair order is reshuffled every epoch.
pub fn sgns_train(pairs: &[(usize, usize)], num_nodes: usize, cfg: &SgnsConfig, seed: u64) -> Result<EmbeddingTable> {
    sgns_train_as(pairs, num_nodes, cfg, seed, EmbedMethod::Node2Vec)
}

pub(super) fn sgns_train_as(
    pairs: &[(usize, usize)],
    num_nodes: usize,
    cfg: &SgnsConfig,
    seed: u64,
    method: EmbedMethod,
) -> Result<EmbeddingTable> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::validation("skip-gram training needs at least one pair"));
    }
    if let Some(&(c, x)) = pairs.iter().find(|&&(c, x)| c >= num_nodes || x >= num_nodes) {
        return Err(Error::Index {
            what: "node",
            index: c.max(x),
            bound: num_nodes,
        });
    }
    let mut r = rng::stream(seed, rng::tags::SGNS);
    let noise = noise_from_pairs(pairs, num_nodes, cfg.noise_exponent).expect("pairs nonempty");
    let mut state = SgnsState::new(num_nodes, cfg.dim, false, &mut r);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let total = cfg.epochs * pairs.len();
    let mut done = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut r);
        for &i in &order {
            let (c, x) = pairs[i];
            let lr = decayed(cfg.learning_rate, done, total);
            state.update(c, x, cfg.negatives, &noise, lr, &mut r);
            done += 1;
        }
    }
    state.into_table(num_nodes, method, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_at_zero_score_is_ln2() {
        let loss = pair_loss(&[0.0, 0.0], &[1.0, 2.0], &[]);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn loss_vanishes_for_large_scores() {
        let loss = pair_loss(&[100.0], &[100.0], &[]);
        assert!(loss < 1e-12);
        assert!(pair_loss(&[1.0], &[1.0], &[]) > pair_loss(&[3.0], &[3.0], &[]));
    }

    #[test]
    fn ln_sigmoid_tails() {
        assert!(ln_sigmoid(-800.0).is_finite());
        assert_eq!(ln_sigmoid(800.0), 0.0);
    }

    #[test]
    fn empty_pairs_rejected() {
        assert!(matches!(
            sgns_train(&[], 3, &SgnsConfig::default(), 0),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            sgns_train(&[(0, 5)], 3, &SgnsConfig::default(), 0),
            Err(Error::Index { .. })
        ));
    }

    #[test]
    fn shared_context_pulls_centers_together() {
        // 0 and 1 share context 2; 3 only sees context 4.
        let pairs: Vec<(usize, usize)> = (0..300)
            .map(|i| match i % 3 {
                0 => (0, 2),
                1 => (1, 2),
                _ => (3, 4),
            })
            .collect();
        let cfg = SgnsConfig {
            dim: 8,
            negatives: 1,
            ..SgnsConfig::default()
        };
        let t = sgns_train(&pairs, 5, &cfg, 1).unwrap();
        let cos = |a: usize, b: usize| super::super::cosine(t.row(a).unwrap(), t.row(b).unwrap());
        assert!(cos(0, 1) > cos(0, 3), "{} vs {}", cos(0, 1), cos(0, 3));
    }
}
