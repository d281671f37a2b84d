use crate::error::{Error, Result};
use crate::qgraph::QuestionGraph;
use crate::rng;

use super::sgns::sgns_train_as;
use super::walks::{random_walks, WalkConfig, WalkCorpus};
use super::{EmbedMethod, EmbeddingTable, SgnsConfig};

/// `(center, context)` pairs for every position and every other position
/// at distance ≤ `window` within the same walk.
pub fn window_pairs(corpus: &WalkCorpus, window: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for walk in &corpus.walks {
        for (i, &c) in walk.iter().enumerate() {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(walk.len() - 1);
            for (j, &x) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                if j != i {
                    pairs.push((c, x));
                }
            }
        }
    }
    pairs
}

/// Biased walks → windowed pairs → skip-gram with negative sampling.
pub fn embed_node2vec(g: &QuestionGraph, walk: &WalkConfig, cfg: &SgnsConfig, seed: u64) -> Result<EmbeddingTable> {
    cfg.validate()?;
    if g.num_edges() == 0 {
        return Err(Error::validation("Node2Vec needs a graph with at least one edge"));
    }
    let corpus = random_walks(g, walk, seed)?;
    let pairs = window_pairs(&corpus, cfg.window);
    sgns_train_as(
        &pairs,
        g.num_questions(),
        cfg,
        rng::derive_seed(seed, rng::tags::SGNS),
        EmbedMethod::Node2Vec,
    )
    .map(|t| EmbeddingTable { seed, ..t })
}
