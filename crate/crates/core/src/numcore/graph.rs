use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::tensor::{matmul_grad_lhs, matmul_grad_rhs};
use super::Tensor;

pub type NamedTensors = BTreeMap<String, Tensor>;

/// Symmetric quadratic form `½ xᵀ M x` supplied from outside the graph.
///
/// Lets sparse operators (a graph Laplacian, say) take part in
/// differentiation without densifying `M`.
pub trait QuadraticForm: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;
    /// `½ xᵀ M x`
    fn value(&self, x: &[f64]) -> f64;
    /// `M x`, the gradient of [`QuadraticForm::value`] for symmetric `M`.
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Input { name: String, trainable: bool },
    Constant(Tensor),
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Concat(NodeId, NodeId),
    Dot(NodeId, NodeId),
    Scale(NodeId, f64),
    Sum(NodeId),
    Log(NodeId),
    Clamp(NodeId, f64, f64),
    QuadForm(NodeId, Arc<dyn QuadraticForm>),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input { .. } => "input",
            Op::Constant(_) => "constant",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::Concat(..) => "concat",
            Op::Dot(..) => "dot",
            Op::Scale(..) => "scale",
            Op::Sum(_) => "sum",
            Op::Log(_) => "log",
            Op::Clamp(..) => "clamp",
            Op::QuadForm(..) => "quad_form",
        }
    }
}

/// Recorded computation over named inputs.
///
/// Nodes are appended in dependency order, so the insertion order is a
/// topological order. The graph is built once, then [`eval_forward`] binds
/// inputs and caches every intermediate value for [`backward`].
///
/// [`eval_forward`]: CompGraph::eval_forward
/// [`backward`]: CompGraph::backward
#[derive(Debug, Default)]
pub struct CompGraph {
    ops: Vec<Op>,
    values: Vec<Option<Tensor>>,
    needs_grad: Vec<bool>,
    inputs: HashMap<String, NodeId>,
    outputs: BTreeMap<String, NodeId>,
    evaluated: bool,
}

impl CompGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    fn push(&mut self, op: Op) -> NodeId {
        for parent in parents(&op) {
            assert!(parent.0 < self.ops.len(), "node refers to a later node");
        }
        self.ops.push(op);
        self.values.push(None);
        self.evaluated = false;
        NodeId(self.ops.len() - 1)
    }

    fn named_input(&mut self, name: &str, trainable: bool) -> NodeId {
        if let Some(&id) = self.inputs.get(name) {
            if let Op::Input { trainable: t, .. } = &mut self.ops[id.0] {
                *t |= trainable;
            }
            return id;
        }
        let id = self.push(Op::Input {
            name: name.to_string(),
            trainable,
        });
        self.inputs.insert(name.to_string(), id);
        id
    }

    /// Input slot that is not differentiated. Repeated names share a node.
    pub fn input(&mut self, name: &str) -> NodeId {
        self.named_input(name, false)
    }

    /// Input slot whose gradient [`CompGraph::backward`] reports.
    pub fn param(&mut self, name: &str) -> NodeId {
        self.named_input(name, true)
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Constant(value))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Mul(a, b))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Sigmoid(a))
    }

    pub fn concat(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Concat(a, b))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Dot(a, b))
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        self.push(Op::Scale(a, k))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Sum(a))
    }

    pub fn log(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Log(a))
    }

    /// Elementwise clamp to `[lo, hi]`; gradient passes only inside the range.
    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        self.push(Op::Clamp(a, lo, hi))
    }

    /// Scalar `½ xᵀ M x` of a vector node.
    pub fn quad_form(&mut self, x: NodeId, form: Arc<dyn QuadraticForm>) -> NodeId {
        self.push(Op::QuadForm(x, form))
    }

    /// Names a node so that [`CompGraph::eval_forward`] returns its value.
    pub fn mark_output(&mut self, name: &str, id: NodeId) {
        self.outputs.insert(name.to_string(), id);
    }

    /// Value cached by the last forward pass.
    pub fn value(&self, id: NodeId) -> Option<&Tensor> {
        self.values.get(id.0).and_then(Option::as_ref)
    }

    pub fn scalar(&self, id: NodeId) -> Option<f64> {
        self.value(id).and_then(Tensor::item)
    }

    /// Evaluates every node in insertion order with `inputs` bound to the
    /// input slots and returns the marked outputs.
    pub fn eval_forward(&mut self, inputs: &NamedTensors) -> Result<NamedTensors> {
        self.evaluated = false;
        self.needs_grad.clear();
        self.needs_grad.reserve(self.ops.len());
        for idx in 0..self.ops.len() {
            let value = self.eval_node(idx, inputs)?;
            if !value.all_finite() {
                return Err(Error::Numeric {
                    node: idx,
                    op: self.ops[idx].name(),
                });
            }
            let needs = match &self.ops[idx] {
                Op::Input { trainable, .. } => *trainable,
                Op::Constant(_) => false,
                op => parents(op).iter().any(|p| self.needs_grad[p.0]),
            };
            self.needs_grad.push(needs);
            self.values[idx] = Some(value);
        }
        self.evaluated = true;
        Ok(self
            .outputs
            .iter()
            .map(|(name, id)| (name.clone(), self.values[id.0].clone().expect("evaluated")))
            .collect())
    }

    fn val(&self, id: NodeId) -> &Tensor {
        self.values[id.0].as_ref().expect("parents evaluated first")
    }

    fn eval_node(&self, idx: usize, inputs: &NamedTensors) -> Result<Tensor> {
        let dim_err = |e: Error| match e {
            Error::Dimension { msg, .. } => Error::Dimension { node: Some(idx), msg },
            other => other,
        };
        let v = match &self.ops[idx] {
            Op::Input { name, .. } => inputs
                .get(name)
                .cloned()
                .ok_or_else(|| Error::State(format!("input `{name}` (node {idx}) is not bound")))?,
            Op::Constant(t) => t.clone(),
            Op::MatMul(a, b) => self.val(*a).matmul(self.val(*b)).map_err(dim_err)?,
            Op::Add(a, b) => self.val(*a).add(self.val(*b)).map_err(dim_err)?,
            Op::Sub(a, b) => self.val(*a).sub(self.val(*b)).map_err(dim_err)?,
            Op::Mul(a, b) => self.val(*a).mul(self.val(*b)).map_err(dim_err)?,
            Op::Tanh(a) => self.val(*a).tanh(),
            Op::Sigmoid(a) => self.val(*a).sigmoid(),
            Op::Concat(a, b) => self.val(*a).concat(self.val(*b)).map_err(dim_err)?,
            Op::Dot(a, b) => Tensor::scalar(self.val(*a).dot(self.val(*b)).map_err(dim_err)?),
            Op::Scale(a, k) => self.val(*a).scale(*k),
            Op::Sum(a) => Tensor::scalar(self.val(*a).sum()),
            Op::Log(a) => self.val(*a).map(f64::ln),
            Op::Clamp(a, lo, hi) => self.val(*a).map(|v| v.clamp(*lo, *hi)),
            Op::QuadForm(a, form) => {
                let x = self.val(*a);
                if x.len() != form.dim() {
                    return Err(Error::Dimension {
                        node: Some(idx),
                        msg: format!("quadratic form of dim {} applied to {} entries", form.dim(), x.len()),
                    });
                }
                Tensor::scalar(form.value(x.data()))
            }
        };
        Ok(v)
    }

    /// Reverse pass from the scalar node `seed`. Returns `d seed / d input`
    /// for every trainable input, keyed by input name. Trainable inputs the
    /// seed does not depend on get a zero gradient.
    pub fn backward(&self, seed: NodeId) -> Result<NamedTensors> {
        if !self.evaluated {
            return Err(Error::State("backward called before eval_forward".into()));
        }
        let seed_val = self
            .values
            .get(seed.0)
            .and_then(Option::as_ref)
            .ok_or_else(|| Error::State(format!("unknown seed node {}", seed.0)))?;
        if seed_val.len() != 1 {
            return Err(Error::Dimension {
                node: Some(seed.0),
                msg: format!("backward seed must be scalar, has shape {:?}", seed_val.shape()),
            });
        }

        let mut grads: Vec<Option<Tensor>> = vec![None; seed.0 + 1];
        grads[seed.0] = Some(Tensor::filled(seed_val.shape(), 1.0));

        for idx in (0..=seed.0).rev() {
            if !self.needs_grad[idx] {
                continue;
            }
            let op = &self.ops[idx];
            if matches!(op, Op::Input { .. }) {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, op, &g, &mut grads);
        }

        let mut out = NamedTensors::new();
        for (name, id) in &self.inputs {
            if let Op::Input { trainable: true, .. } = self.ops[id.0] {
                let grad = grads
                    .get_mut(id.0)
                    .and_then(Option::take)
                    .unwrap_or_else(|| Tensor::zeros(self.val(*id).shape()));
                out.insert(name.clone(), grad);
            }
        }
        Ok(out)
    }

    fn propagate(&self, idx: usize, op: &Op, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let out = self.val(NodeId(idx));
        match op {
            Op::Input { .. } | Op::Constant(_) => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.val(*a), self.val(*b));
                let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                if self.needs_grad[a.0] {
                    let slot = slot(grads, *a, av);
                    matmul_grad_lhs(g.data(), bv.data(), slot.data_mut(), m, k, n);
                }
                if self.needs_grad[b.0] {
                    let slot = slot(grads, *b, bv);
                    matmul_grad_rhs(av.data(), g.data(), slot.data_mut(), m, k, n);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.data().iter().copied());
                self.accumulate(grads, *b, g.data().iter().copied());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.data().iter().copied());
                self.accumulate(grads, *b, g.data().iter().map(|v| -v));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.val(*a), self.val(*b));
                self.accumulate(grads, *a, g.data().iter().zip(bv.data()).map(|(g, b)| g * b));
                self.accumulate(grads, *b, g.data().iter().zip(av.data()).map(|(g, a)| g * a));
            }
            Op::Tanh(a) => {
                let it = g.data().iter().zip(out.data()).map(|(g, y)| g * (1.0 - y * y));
                self.accumulate(grads, *a, it);
            }
            Op::Sigmoid(a) => {
                let it = g.data().iter().zip(out.data()).map(|(g, y)| g * y * (1.0 - y));
                self.accumulate(grads, *a, it);
            }
            Op::Concat(a, b) => {
                let (av, bv) = (self.val(*a), self.val(*b));
                let (ca, cb) = (av.cols(), bv.cols());
                let rows = av.rows();
                let gd = g.data();
                let a_part = (0..rows).flat_map(|r| gd[r * (ca + cb)..r * (ca + cb) + ca].iter().copied());
                self.accumulate(grads, *a, a_part);
                let b_part = (0..rows).flat_map(|r| gd[r * (ca + cb) + ca..(r + 1) * (ca + cb)].iter().copied());
                self.accumulate(grads, *b, b_part);
            }
            Op::Dot(a, b) => {
                let s = g.data()[0];
                let (av, bv) = (self.val(*a), self.val(*b));
                self.accumulate(grads, *a, bv.data().iter().map(|v| s * v));
                self.accumulate(grads, *b, av.data().iter().map(|v| s * v));
            }
            Op::Scale(a, k) => {
                self.accumulate(grads, *a, g.data().iter().map(|v| v * k));
            }
            Op::Sum(a) => {
                let s = g.data()[0];
                let n = self.val(*a).len();
                self.accumulate(grads, *a, std::iter::repeat_n(s, n));
            }
            Op::Log(a) => {
                let av = self.val(*a);
                self.accumulate(grads, *a, g.data().iter().zip(av.data()).map(|(g, x)| g / x));
            }
            Op::Clamp(a, lo, hi) => {
                let av = self.val(*a);
                let it = g
                    .data()
                    .iter()
                    .zip(av.data())
                    .map(|(g, x)| if x >= lo && x <= hi { *g } else { 0.0 });
                self.accumulate(grads, *a, it);
            }
            Op::QuadForm(a, form) => {
                let s = g.data()[0];
                let grad = form.gradient(self.val(*a).data());
                self.accumulate(grads, *a, grad.into_iter().map(|v| s * v));
            }
        }
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], target: NodeId, values: impl Iterator<Item = f64>) {
        if !self.needs_grad[target.0] {
            return;
        }
        let slot = slot(grads, target, self.val(target));
        for (dst, v) in slot.data_mut().iter_mut().zip(values) {
            *dst += v;
        }
    }
}

fn slot<'a>(grads: &'a mut [Option<Tensor>], id: NodeId, like: &Tensor) -> &'a mut Tensor {
    grads[id.0].get_or_insert_with(|| Tensor::zeros(like.shape()))
}

fn parents(op: &Op) -> Vec<NodeId> {
    match op {
        Op::Input { .. } | Op::Constant(_) => Vec::new(),
        Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Concat(a, b) | Op::Dot(a, b) => {
            vec![*a, *b]
        }
        Op::Tanh(a)
        | Op::Sigmoid(a)
        | Op::Scale(a, _)
        | Op::Sum(a)
        | Op::Log(a)
        | Op::Clamp(a, ..)
        | Op::QuadForm(a, _) => vec![*a],
    }
}
