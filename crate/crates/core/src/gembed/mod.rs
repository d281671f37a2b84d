//! Question embeddings.
//!
//! Three families: i.i.d. Gaussian vectors (no relational information),
//! LINE edge-sampling embeddings (first or second order), and Node2Vec
//! biased-walk embeddings trained with skip-gram negative sampling. Every
//! table is a pure function of `(graph, config, seed)`.

mod line;
mod node2vec;
mod sampling;
mod sgns;
mod walks;

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numcore::Tensor;
use crate::rng;

pub use line::embed_line;
pub use node2vec::{embed_node2vec, window_pairs};
pub use sgns::{pair_loss, sgns_train};
pub use walks::{random_walks, WalkConfig, WalkCorpus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EmbedMethod {
    Gaussian,
    Line1,
    Line2,
    Node2Vec,
}

impl EmbedMethod {
    pub fn tag(self) -> &'static str {
        match self {
            EmbedMethod::Gaussian => "gaussian",
            EmbedMethod::Line1 => "line1",
            EmbedMethod::Line2 => "line2",
            EmbedMethod::Node2Vec => "node2vec",
        }
    }

    /// Whether the method derives vectors from the question graph.
    pub fn uses_graph(self) -> bool {
        self != EmbedMethod::Gaussian
    }
}

impl fmt::Display for EmbedMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for EmbedMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(EmbedMethod::Gaussian),
            "line" | "line1" => Ok(EmbedMethod::Line1),
            "line2" => Ok(EmbedMethod::Line2),
            "node2vec" => Ok(EmbedMethod::Node2Vec),
            other => Err(Error::validation(format!(
                "unknown embedding method `{other}` (gaussian|line1|line2|node2vec)"
            ))),
        }
    }
}

/// Skip-gram / edge-sampling hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SgnsConfig {
    pub dim: usize,
    pub epochs: usize,
    /// Initial step size; decays linearly to `1e-4` of itself.
    pub learning_rate: f64,
    pub negatives: usize,
    /// Context window on each side (Node2Vec).
    pub window: usize,
    /// Exponent applied to node frequencies in the negative-sampling
    /// distribution.
    pub noise_exponent: f64,
    /// Edge samples drawn per epoch by LINE.
    pub line_samples_per_epoch: usize,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            epochs: 5,
            learning_rate: 0.025,
            negatives: 5,
            window: 5,
            noise_exponent: 0.75,
            line_samples_per_epoch: 100_000,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::validation("embedding dim must be ≥ 1"));
        }
        if self.negatives == 0 {
            return Err(Error::validation("negative samples must be ≥ 1"));
        }
        if self.window == 0 {
            return Err(Error::validation("context window must be ≥ 1"));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::validation("embedding learning rate must be > 0"));
        }
        if !self.noise_exponent.is_finite() {
            return Err(Error::validation("noise exponent must be finite"));
        }
        Ok(())
    }
}

/// `Q × d` question vectors with provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub method: EmbedMethod,
    pub seed: u64,
    values: Tensor,
}

impl EmbeddingTable {
    pub fn new(method: EmbedMethod, seed: u64, values: Tensor) -> Result<Self> {
        if values.shape().len() != 2 {
            return Err(Error::dim("embedding table must be a matrix"));
        }
        if !values.all_finite() {
            return Err(Error::validation("embedding contains non-finite values"));
        }
        Ok(Self { method, seed, values })
    }

    pub fn num_questions(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn row(&self, question: usize) -> Result<&[f64]> {
        if question >= self.num_questions() {
            return Err(Error::Index {
                what: "question",
                index: question,
                bound: self.num_questions(),
            });
        }
        Ok(self.values.row_slice(question))
    }

    /// Header `Q d method seed`, then `question_id v1 ... vd` per row.
    /// Values use shortest round-trip formatting, so reading back is exact.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "{} {} {} {}",
            self.num_questions(),
            self.dim(),
            self.method,
            self.seed
        )?;
        for q in 0..self.num_questions() {
            write!(w, "{q}")?;
            for v in self.values.row_slice(q) {
                write!(w, " {v:?}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let (_, header) = lines.next().ok_or_else(|| perr(1, "missing header".into()))?;
        let header = header.map_err(|e| perr(1, e.to_string()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 {
            return Err(perr(1, "header must be `Q d method seed`".into()));
        }
        let q: usize = h[0].parse().map_err(|_| perr(1, "bad Q".into()))?;
        let d: usize = h[1].parse().map_err(|_| perr(1, "bad d".into()))?;
        let method: EmbedMethod = h[2].parse().map_err(|e: Error| perr(1, e.to_string()))?;
        let seed: u64 = h[3].parse().map_err(|_| perr(1, "bad seed".into()))?;

        let mut data = vec![0.0; q * d];
        let mut seen = vec![false; q];
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.map_err(|e| perr(lineno, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let id: usize = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| perr(lineno, "bad question id".into()))?;
            if id >= q || seen[id] {
                return Err(perr(lineno, format!("question id {id} out of range or repeated")));
            }
            seen[id] = true;
            let row: Vec<f64> = fields
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| perr(lineno, "bad value".into()))?;
            if row.len() != d {
                return Err(perr(lineno, format!("expected {d} values, got {}", row.len())));
            }
            data[id * d..(id + 1) * d].copy_from_slice(&row);
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::validation(format!("embedding file lacks question {missing}")));
        }
        Self::new(method, seed, Tensor::matrix(q, d, data)?)
    }
}

/// Entries drawn i.i.d. from `N(0, 1)`.
pub fn embed_gaussian(num_questions: usize, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    if num_questions == 0 || dim == 0 {
        return Err(Error::validation("gaussian embedding needs Q ≥ 1 and d ≥ 1"));
    }
    let mut r = rng::stream(seed, rng::tags::GAUSSIAN);
    let data: Vec<f64> = (0..num_questions * dim)
        .map(|_| StandardNormal.sample(&mut r))
        .collect();
    EmbeddingTable::new(EmbedMethod::Gaussian, seed, Tensor::matrix(num_questions, dim, data)?)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot = crate::numcore::dot(a, b);
    let na = crate::numcore::dot(a, a).sqrt();
    let nb = crate::numcore::dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Mean pairwise cosine over same-label pairs and over different-label
/// pairs.
pub fn cluster_cosines(table: &EmbeddingTable, labels: &[usize]) -> (f64, f64) {
    let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            let c = cosine(table.values.row_slice(i), table.values.row_slice(j));
            if labels[i] == labels[j] {
                intra += c;
                n_intra += 1;
            } else {
                inter += c;
                n_inter += 1;
            }
        }
    }
    (intra / n_intra.max(1) as f64, inter / n_inter.max(1) as f64)
}
