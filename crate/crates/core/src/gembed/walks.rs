use rand::Rng;

use crate::error::{Error, Result};
use crate::qgraph::QuestionGraph;
use crate::rng;

use super::sampling::CumulativeSampler;

/// Second-order walk parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkConfig {
    /// Return parameter: weight `1/p` for stepping back to the previous node.
    pub p: f64,
    /// In-out parameter: weight `1/q` for moving away from the previous node.
    pub q: f64,
    pub walk_length: usize,
    pub walks_per_node: usize,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            p: 1.0,
            q: 1.0,
            walk_length: 20,
            walks_per_node: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<usize>>,
    pub config: WalkConfig,
}

/// Biased second-order random walks: from `cur` with predecessor `prev`, a
/// neighbor `x` has weight `A(cur,x)` times `1/p` if `x = prev`, `1` if `x`
/// neighbors `prev`, `1/q` otherwise. The first step is weighted by `A`
/// alone. Isolated nodes yield length-1 walks.
///
/// Walks are ordered round by round, node by node; each walk draws from its
/// own generator derived from `(seed, node, round)`.
pub fn random_walks(g: &QuestionGraph, cfg: &WalkConfig, seed: u64) -> Result<WalkCorpus> {
    if cfg.walk_length == 0 {
        return Err(Error::validation("walk length must be ≥ 1"));
    }
    if !(cfg.p > 0.0 && cfg.q > 0.0) {
        return Err(Error::validation("walk parameters p and q must be > 0"));
    }
    let n = g.num_questions();
    let mut walks = Vec::with_capacity(n * cfg.walks_per_node);
    for round in 0..cfg.walks_per_node {
        for start in 0..n {
            let walk_seed = rng::derive_seed(seed ^ rng::tags::WALK, (round * n + start) as u64);
            let mut r = rng::rng(walk_seed);
            walks.push(walk_from(g, start, cfg, &mut r));
        }
    }
    Ok(WalkCorpus {
        walks,
        config: cfg.clone(),
    })
}

fn walk_from<R: Rng>(g: &QuestionGraph, start: usize, cfg: &WalkConfig, r: &mut R) -> Vec<usize> {
    let mut walk = Vec::with_capacity(cfg.walk_length);
    walk.push(start);
    while walk.len() < cfg.walk_length {
        let cur = *walk.last().unwrap();
        let nbrs = g.neighbors(cur);
        let next = match walk.len() {
            1 => CumulativeSampler::new(nbrs.iter().map(|&(_, w)| w)),
            len => {
                let prev = walk[len - 2];
                CumulativeSampler::new(nbrs.iter().map(|&(x, w)| {
                    let bias = if x == prev {
                        1.0 / cfg.p
                    } else if g.has_edge(x, prev) {
                        1.0
                    } else {
                        1.0 / cfg.q
                    };
                    w * bias
                }))
            }
        };
        match next {
            Some(s) => walk.push(nbrs[s.sample(r)].0),
            None => break,
        }
    }
    walk
}
