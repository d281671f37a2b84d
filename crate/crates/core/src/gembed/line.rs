use rand::Rng;

use crate::error::{Error, Result};
use crate::qgraph::QuestionGraph;
use crate::rng;

use super::sampling::CumulativeSampler;
use super::sgns::{decayed, sgns_train_as, SgnsState};
use super::{EmbedMethod, EmbeddingTable, SgnsConfig};

/// LINE embedding.
///
/// Edges are sampled proportionally to weight, `line_samples_per_epoch`
/// times per epoch, each in a random orientation. Order 1 scores an edge by
/// `σ(u_i·u_j)` with a single vector family; order 2 treats the sampled
/// edges as skip-gram pairs with separate context vectors. Negatives follow
/// `degree^noise_exponent`.
pub fn embed_line(g: &QuestionGraph, order: u8, cfg: &SgnsConfig, seed: u64) -> Result<EmbeddingTable> {
    cfg.validate()?;
    if g.num_edges() == 0 {
        return Err(Error::validation("LINE needs a graph with at least one edge"));
    }
    let edges = g.edges();
    let edge_sampler = CumulativeSampler::new(edges.iter().map(|e| e.2))
        .ok_or_else(|| Error::validation("LINE needs at least one positively weighted edge"))?;
    let mut r = rng::stream(seed, rng::tags::LINE);
    let draw = |r: &mut rng::Rng| {
        let (i, j, _) = edges[edge_sampler.sample(r)];
        if r.random::<bool>() {
            (i, j)
        } else {
            (j, i)
        }
    };
    let n = g.num_questions();
    match order {
        1 => {
            let noise = CumulativeSampler::new((0..n).map(|v| g.degree(v).powf(cfg.noise_exponent)))
                .expect("graph has an edge");
            let mut state = SgnsState::new(n, cfg.dim, true, &mut r);
            let total = cfg.epochs * cfg.line_samples_per_epoch;
            for step in 0..total {
                let (i, j) = draw(&mut r);
                let lr = decayed(cfg.learning_rate, step, total);
                state.update(i, j, cfg.negatives, &noise, lr, &mut r);
            }
            state.into_table(n, EmbedMethod::Line1, seed)
        }
        2 => {
            let pairs: Vec<(usize, usize)> = (0..cfg.line_samples_per_epoch).map(|_| draw(&mut r)).collect();
            sgns_train_as(
                &pairs,
                n,
                cfg,
                rng::derive_seed(seed, rng::tags::LINE),
                EmbedMethod::Line2,
            )
            .map(|t| EmbeddingTable { seed, ..t })
        }
        other => Err(Error::validation(format!("LINE order must be 1 or 2, got {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::super::cosine;
    use super::*;

    fn small_cfg() -> SgnsConfig {
        SgnsConfig {
            dim: 8,
            line_samples_per_epoch: 5_000,
            ..SgnsConfig::default()
        }
    }

    #[test]
    fn single_edge_endpoints_align() {
        let g = QuestionGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let t = embed_line(&g, 1, &small_cfg(), 4).unwrap();
        assert!(cosine(t.row(0).unwrap(), t.row(1).unwrap()) > 0.0);
    }

    #[test]
    fn edgeless_graph_rejected() {
        let g = QuestionGraph::from_edges(3, &[]).unwrap();
        assert!(matches!(embed_line(&g, 1, &small_cfg(), 0), Err(Error::Validation(_))));
        assert!(matches!(embed_line(&g, 2, &small_cfg(), 0), Err(Error::Validation(_))));
    }

    #[test]
    fn deterministic_and_tagged() {
        let g = QuestionGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        for order in [1, 2] {
            let a = embed_line(&g, order, &small_cfg(), 9).unwrap();
            assert_eq!(a, embed_line(&g, order, &small_cfg(), 9).unwrap());
            assert_eq!(a.seed, 9);
        }
        assert_eq!(embed_line(&g, 2, &small_cfg(), 9).unwrap().method, EmbedMethod::Line2);
        assert!(embed_line(&g, 3, &small_cfg(), 9).is_err());
    }
}
