//! The knowledge-tracing network.
//!
//! An interaction `(q, a)` is encoded as `concat(e_q, a·e_q)` from the
//! question embedding table, a recurrent cell folds it into the knowledge
//! state `h_t`, and the head `p = σ(h Wᵖ + bᵖ)` scores every question.
//! Vectors are rows: a gate computes `x W + h U + b`.
//!
//! Parameter names: `W`, `U`, `b` for the plain RNN; `W_i`, `U_i`, `b_i`
//! (and `_f`, `_o`, `_g`) for the LSTM; `W_z`, `W_r`, `W_h` etc. for the GRU;
//! `W_p`, `b_p` for the head; `E` for the embedding table.

mod checkpoint;
mod unroll;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::dataio::{Interaction, InteractionSequence};
use crate::error::{Error, Result};
use crate::gembed::EmbeddingTable;
use crate::numcore::{sigmoid, NamedTensors, Tensor};
use crate::rng;

pub use checkpoint::Checkpoint;
pub use unroll::unroll;

pub const EMBEDDING: &str = "E";
pub const HEAD_W: &str = "W_p";
pub const HEAD_B: &str = "b_p";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellType {
    Rnn,
    Lstm,
    Gru,
}

impl CellType {
    pub const ALL: [CellType; 3] = [CellType::Rnn, CellType::Lstm, CellType::Gru];

    pub fn tag(self) -> &'static str {
        match self {
            CellType::Rnn => "rnn",
            CellType::Lstm => "lstm",
            CellType::Gru => "gru",
        }
    }

    /// Gate suffixes; the plain RNN has a single unsuffixed gate.
    pub fn gates(self) -> &'static [&'static str] {
        match self {
            CellType::Rnn => &[""],
            CellType::Lstm => &["_i", "_f", "_o", "_g"],
            CellType::Gru => &["_z", "_r", "_h"],
        }
    }
}

impl fmt::Display for CellType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for CellType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rnn" => Ok(CellType::Rnn),
            "lstm" => Ok(CellType::Lstm),
            "gru" => Ok(CellType::Gru),
            other => Err(Error::validation(format!("unknown cell `{other}` (rnn|lstm|gru)"))),
        }
    }
}

/// Hidden state `h`, plus the memory `c` for LSTM cells.
#[derive(Clone, Debug, PartialEq)]
pub struct KnowledgeState {
    pub h: Vec<f64>,
    pub c: Option<Vec<f64>>,
}

impl KnowledgeState {
    pub fn zeros(cell: CellType, hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: (cell == CellType::Lstm).then(|| vec![0.0; hidden]),
        }
    }
}

/// Probability of answering each question correctly.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionVector(pub Vec<f64>);

impl PredictionVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, question: usize) -> f64 {
        self.0[question]
    }
}

/// All network weights, including the question embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub cell: CellType,
    pub hidden: usize,
    /// Whether `E` is updated during training.
    pub train_embedding: bool,
    /// Provenance of `E`; values live in `tensors`.
    pub embedding_method: crate::gembed::EmbedMethod,
    pub embedding_seed: u64,
    pub tensors: NamedTensors,
}

impl ModelParams {
    /// Weights uniform in `±1/√fan_in`, where `fan_in` is the width of the
    /// vector the matrix multiplies (biases use the hidden width).
    pub fn init(cell: CellType, embedding: &EmbeddingTable, hidden: usize, seed: u64) -> Result<Self> {
        let mut r = rng::stream(seed, rng::tags::INIT);
        Self::build(cell, embedding, hidden, |shape, fan_in| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let n = shape.iter().product();
            let data = (0..n).map(|_| r.random_range(-bound..=bound)).collect();
            Tensor::new(shape.to_vec(), data).expect("finite init")
        })
    }

    /// Every recurrent and head weight zero.
    pub fn zeros(cell: CellType, embedding: &EmbeddingTable, hidden: usize) -> Result<Self> {
        Self::build(cell, embedding, hidden, |shape, _| Tensor::zeros(shape))
    }

    fn build(
        cell: CellType,
        embedding: &EmbeddingTable,
        hidden: usize,
        mut make: impl FnMut(&[usize], usize) -> Tensor,
    ) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::validation("hidden size must be ≥ 1"));
        }
        let input = 2 * embedding.dim();
        let q = embedding.num_questions();
        let mut tensors = NamedTensors::new();
        for gate in cell.gates() {
            tensors.insert(format!("W{gate}"), make(&[input, hidden], input));
            tensors.insert(format!("U{gate}"), make(&[hidden, hidden], hidden));
            tensors.insert(format!("b{gate}"), make(&[1, hidden], hidden));
        }
        tensors.insert(HEAD_W.into(), make(&[hidden, q], hidden));
        tensors.insert(HEAD_B.into(), make(&[1, q], hidden));
        tensors.insert(EMBEDDING.into(), embedding.values().clone());
        Ok(Self {
            cell,
            hidden,
            train_embedding: false,
            embedding_method: embedding.method,
            embedding_seed: embedding.seed,
            tensors,
        })
    }

    pub fn num_questions(&self) -> usize {
        self.tensors[EMBEDDING].rows()
    }

    pub fn embed_dim(&self) -> usize {
        self.tensors[EMBEDDING].cols()
    }

    pub fn input_dim(&self) -> usize {
        2 * self.embed_dim()
    }

    pub fn tensor(&self, name: &str) -> &Tensor {
        &self.tensors[name]
    }

    pub fn embedding(&self) -> EmbeddingTable {
        EmbeddingTable::new(
            self.embedding_method,
            self.embedding_seed,
            self.tensors[EMBEDDING].clone(),
        )
        .expect("embedding tensor is a finite matrix")
    }

    /// Names of the tensors the optimizer updates.
    pub fn trainable_names(&self) -> Vec<String> {
        self.tensors
            .keys()
            .filter(|k| self.train_embedding || k.as_str() != EMBEDDING)
            .cloned()
            .collect()
    }

    /// Shapes must agree with `(cell, 2d, n_h, Q)`.
    pub fn validate(&self) -> Result<()> {
        let (input, hidden, q) = (self.input_dim(), self.hidden, self.num_questions());
        let expect = |name: &str, shape: [usize; 2]| -> Result<()> {
            let t = self
                .tensors
                .get(name)
                .ok_or_else(|| Error::validation(format!("missing parameter `{name}`")))?;
            if t.shape() != shape {
                return Err(Error::dim(format!(
                    "`{name}` has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
            Ok(())
        };
        for gate in self.cell.gates() {
            expect(&format!("W{gate}"), [input, hidden])?;
            expect(&format!("U{gate}"), [hidden, hidden])?;
            expect(&format!("b{gate}"), [1, hidden])?;
        }
        expect(HEAD_W, [hidden, q])?;
        expect(HEAD_B, [1, q])?;
        let expected = 3 * self.cell.gates().len() + 3;
        if self.tensors.len() != expected {
            return Err(Error::validation(format!(
                "{} parameters present, {expected} expected for a {} cell",
                self.tensors.len(),
                self.cell
            )));
        }
        Ok(())
    }
}

/// `concat(e_q, a·e_q)`
pub fn encode_interaction(x: Interaction, table: &EmbeddingTable) -> Result<Vec<f64>> {
    let e = table.row(x.question)?;
    let a = if x.correct { 1.0 } else { 0.0 };
    let mut out = Vec::with_capacity(2 * e.len());
    out.extend_from_slice(e);
    out.extend(e.iter().map(|v| a * v));
    Ok(out)
}

fn encode_with(params: &ModelParams, x: Interaction) -> Result<Vec<f64>> {
    let e = params.tensor(EMBEDDING);
    if x.question >= e.rows() {
        return Err(Error::Index {
            what: "question",
            index: x.question,
            bound: e.rows(),
        });
    }
    let row = e.row_slice(x.question);
    let a = if x.correct { 1.0 } else { 0.0 };
    Ok(row.iter().copied().chain(row.iter().map(|v| a * v)).collect())
}

/// `x W + h U + b` for one gate.
fn gate(params: &ModelParams, suffix: &str, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    let w = params.tensor(&format!("W{suffix}"));
    let u = params.tensor(&format!("U{suffix}"));
    let b = params.tensor(&format!("b{suffix}"));
    if x.len() != w.rows() || h.len() != u.rows() {
        return Err(Error::dim(format!(
            "gate W{suffix}: input {} vs {}, state {} vs {}",
            x.len(),
            w.rows(),
            h.len(),
            u.rows()
        )));
    }
    let mut out = b.data().to_vec();
    accumulate_vec_mat(x, w, &mut out);
    accumulate_vec_mat(h, u, &mut out);
    Ok(out)
}

/// `out += v M`
fn accumulate_vec_mat(v: &[f64], m: &Tensor, out: &mut [f64]) {
    let n = m.cols();
    for (p, &vp) in v.iter().enumerate() {
        if vp == 0.0 {
            continue;
        }
        for (o, &mv) in out.iter_mut().zip(&m.data()[p * n..(p + 1) * n]) {
            *o += vp * mv;
        }
    }
}

fn expect_cell(params: &ModelParams, cell: CellType) -> Result<()> {
    if params.cell != cell {
        return Err(Error::validation(format!(
            "parameters are for a {} cell, not {cell}",
            params.cell
        )));
    }
    Ok(())
}

/// `h' = tanh(x W + h U + b)`
pub fn step_rnn(x: &[f64], s: &KnowledgeState, params: &ModelParams) -> Result<KnowledgeState> {
    expect_cell(params, CellType::Rnn)?;
    let h = gate(params, "", x, &s.h)?.into_iter().map(f64::tanh).collect();
    Ok(KnowledgeState { h, c: None })
}

/// Input, forget and output gates with candidate `g`:
/// `c' = f⊙c + i⊙g`, `h' = o⊙tanh(c')`.
pub fn step_lstm(x: &[f64], s: &KnowledgeState, params: &ModelParams) -> Result<KnowledgeState> {
    expect_cell(params, CellType::Lstm)?;
    let c_prev =
        s.c.as_deref()
            .ok_or_else(|| Error::validation("LSTM state lacks cell memory"))?;
    let i: Vec<f64> = gate(params, "_i", x, &s.h)?.into_iter().map(sigmoid).collect();
    let f: Vec<f64> = gate(params, "_f", x, &s.h)?.into_iter().map(sigmoid).collect();
    let o: Vec<f64> = gate(params, "_o", x, &s.h)?.into_iter().map(sigmoid).collect();
    let g: Vec<f64> = gate(params, "_g", x, &s.h)?.into_iter().map(f64::tanh).collect();
    if c_prev.len() != g.len() {
        return Err(Error::dim("LSTM cell memory width differs from hidden size"));
    }
    let c: Vec<f64> = (0..g.len()).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let h = (0..g.len()).map(|k| o[k] * c[k].tanh()).collect();
    Ok(KnowledgeState { h, c: Some(c) })
}

/// Update gate `z`, reset gate `r`, candidate `h̃ = tanh(x W_h + (r⊙h) U_h + b_h)`,
/// `h' = (1−z)⊙h + z⊙h̃`.
pub fn step_gru(x: &[f64], s: &KnowledgeState, params: &ModelParams) -> Result<KnowledgeState> {
    expect_cell(params, CellType::Gru)?;
    let z: Vec<f64> = gate(params, "_z", x, &s.h)?.into_iter().map(sigmoid).collect();
    let r: Vec<f64> = gate(params, "_r", x, &s.h)?.into_iter().map(sigmoid).collect();
    let rh: Vec<f64> = r.iter().zip(&s.h).map(|(r, h)| r * h).collect();
    let cand: Vec<f64> = gate(params, "_h", x, &rh)?.into_iter().map(f64::tanh).collect();
    let h = (0..z.len()).map(|k| (1.0 - z[k]) * s.h[k] + z[k] * cand[k]).collect();
    Ok(KnowledgeState { h, c: None })
}

pub fn step(x: &[f64], s: &KnowledgeState, params: &ModelParams) -> Result<KnowledgeState> {
    match params.cell {
        CellType::Rnn => step_rnn(x, s, params),
        CellType::Lstm => step_lstm(x, s, params),
        CellType::Gru => step_gru(x, s, params),
    }
}

/// `p = σ(h Wᵖ + bᵖ)`
pub fn predict(s: &KnowledgeState, params: &ModelParams) -> Result<PredictionVector> {
    let w = params.tensor(HEAD_W);
    if s.h.len() != w.rows() {
        return Err(Error::dim(format!(
            "head expects hidden width {}, state has {}",
            w.rows(),
            s.h.len()
        )));
    }
    let mut logits = params.tensor(HEAD_B).data().to_vec();
    accumulate_vec_mat(&s.h, w, &mut logits);
    Ok(PredictionVector(logits.into_iter().map(sigmoid).collect()))
}

/// Runs the cell from a zero state. After consuming interaction `t` the
/// head emits `p_t`, which scores interaction `t + 1`; `n − 1` vectors in
/// total.
pub fn forward_sequence(seq: &InteractionSequence, params: &ModelParams) -> Result<Vec<PredictionVector>> {
    let items = &seq.interactions;
    if items.len() < 2 {
        return Err(Error::validation(format!(
            "sequence of student {} has {} interactions; at least 2 needed",
            seq.student,
            items.len()
        )));
    }
    let mut state = KnowledgeState::zeros(params.cell, params.hidden);
    let mut out = Vec::with_capacity(items.len() - 1);
    for &x in &items[..items.len() - 1] {
        let encoded = encode_with(params, x)?;
        state = step(&encoded, &state, params)?;
        out.push(predict(&state, params)?);
    }
    Ok(out)
}
