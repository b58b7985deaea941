//! Scalar reverse-mode tape.
//!
//! Every differentiable quantity in the engine is a [`Scalar`]: a value plus an
//! optional node on a [`Tape`]. Scalars that do not depend on any leaf are
//! *detached* constants and never touch the tape, so deterministic factors
//! (indicator tables full of zeros and ones) cost nothing to record.
//!
//! Nodes are appended in evaluation order, so operand ids always precede the
//! node that uses them and the backward pass is a single reverse sweep.

use super::params::{ParamGrads, ParamStore, TensorId};
use super::DiffError;

/// Index of a node on a [`Tape`].
pub type NodeId = u32;

const DETACHED: u32 = u32::MAX;
const NO_SLOT: u32 = u32::MAX;

/// A real value that may be recorded on a tape.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scalar {
    value: f64,
    node: u32,
}

impl Scalar {
    /// A detached constant.
    pub const fn constant(value: f64) -> Self {
        Scalar { value, node: DETACHED }
    }

    pub const ZERO: Scalar = Scalar::constant(0.0);
    pub const ONE: Scalar = Scalar::constant(1.0);

    #[inline]
    pub fn value(self) -> f64 {
        self.value
    }

    #[inline]
    pub fn node(self) -> Option<NodeId> {
        (self.node != DETACHED).then_some(self.node)
    }

    #[inline]
    pub fn is_constant(self) -> bool {
        self.node == DETACHED
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::constant(v)
    }
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Leaf,
    Param,
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    /// `x + c`; the constant lives in the cached value.
    Shift(u32),
    Scale(u32, f64),
    Log(u32),
    Exp(u32),
    Sigmoid(u32),
    /// Unary op with a precomputed local derivative.
    Unary(u32, f64),
    /// `sum_i c_i * x_i` over `terms[start..start + len]`.
    Linear(u32, u32),
    /// Max-shifted log-sum-exp over `terms[start..start + len]`.
    LogSumExp(u32, u32),
}

/// Append-only record of scalar operations.
#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
    values: Vec<f64>,
    terms: Vec<(u32, f64)>,
    params: Vec<(TensorId, u32)>,
    param_slots: Vec<Vec<u32>>,
    recording: bool,
    non_finite: Option<usize>,
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

impl Tape {
    /// A recording tape.
    pub fn new() -> Self {
        Tape {
            ops: Vec::new(),
            values: Vec::new(),
            terms: Vec::new(),
            params: Vec::new(),
            param_slots: Vec::new(),
            recording: true,
            non_finite: None,
        }
    }

    /// A tape that records nothing: every result is a detached constant.
    /// Used for evaluation, argmax execution and finite differences.
    pub fn inference() -> Self {
        Tape {
            recording: false,
            ..Tape::new()
        }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Parameter coordinates that have a leaf on this tape, in creation order.
    pub fn param_leaves(&self) -> impl Iterator<Item = (TensorId, usize)> + '_ {
        self.params.iter().map(|&(t, i)| (t, i as usize))
    }

    /// Errors if any operation so far produced a NaN or infinity.
    pub fn check_finite(&self) -> Result<(), DiffError> {
        match self.non_finite {
            Some(node) => Err(DiffError::NonFiniteValue { node }),
            None => Ok(()),
        }
    }

    fn note(&mut self, value: f64) {
        if !value.is_finite() && self.non_finite.is_none() {
            self.non_finite = Some(self.ops.len());
        }
    }

    fn push(&mut self, op: Op, value: f64) -> Scalar {
        self.note(value);
        if !self.recording {
            return Scalar::constant(value);
        }
        let node = self.ops.len() as u32;
        self.ops.push(op);
        self.values.push(value);
        Scalar { value, node }
    }

    fn constant(&mut self, value: f64) -> Scalar {
        self.note(value);
        Scalar::constant(value)
    }

    /// A free leaf (not a registered parameter). Mostly useful in tests and
    /// for differentiating with respect to ad-hoc inputs.
    pub fn var(&mut self, value: f64) -> Scalar {
        self.push(Op::Leaf, value)
    }

    /// The leaf for one parameter coordinate, created on first use.
    pub fn param(&mut self, store: &ParamStore, tensor: TensorId, index: usize) -> Scalar {
        let value = store.tensor(tensor).values()[index];
        if !self.recording {
            return Scalar::constant(value);
        }
        if self.param_slots.len() <= tensor.0 {
            self.param_slots.resize_with(tensor.0 + 1, Vec::new);
        }
        let slots = &mut self.param_slots[tensor.0];
        if slots.is_empty() {
            slots.resize(store.tensor(tensor).len(), NO_SLOT);
        }
        let slot = slots[index];
        if slot != NO_SLOT {
            return Scalar { value, node: slot };
        }
        self.params.push((tensor, index as u32));
        let s = self.push(Op::Param, value);
        self.param_slots[tensor.0][index] = s.node;
        s
    }

    pub fn add(&mut self, a: Scalar, b: Scalar) -> Scalar {
        let v = a.value + b.value;
        match (a.is_constant(), b.is_constant()) {
            (true, true) => self.constant(v),
            (false, true) if b.value == 0.0 => a,
            (true, false) if a.value == 0.0 => b,
            (false, true) => self.push(Op::Shift(a.node), v),
            (true, false) => self.push(Op::Shift(b.node), v),
            (false, false) => self.push(Op::Add(a.node, b.node), v),
        }
    }

    pub fn sub(&mut self, a: Scalar, b: Scalar) -> Scalar {
        let v = a.value - b.value;
        match (a.is_constant(), b.is_constant()) {
            (true, true) => self.constant(v),
            (false, true) if b.value == 0.0 => a,
            (false, true) => self.push(Op::Shift(a.node), v),
            (true, false) => self.push(Op::Scale(b.node, -1.0), v),
            (false, false) => self.push(Op::Sub(a.node, b.node), v),
        }
    }

    pub fn mul(&mut self, a: Scalar, b: Scalar) -> Scalar {
        let v = a.value * b.value;
        match (a.is_constant(), b.is_constant()) {
            (true, true) => self.constant(v),
            (false, true) => self.scale_node(a, b.value, v),
            (true, false) => self.scale_node(b, a.value, v),
            (false, false) => self.push(Op::Mul(a.node, b.node), v),
        }
    }

    fn scale_node(&mut self, x: Scalar, c: f64, v: f64) -> Scalar {
        if c == 0.0 {
            self.constant(v)
        } else if c == 1.0 {
            x
        } else {
            self.push(Op::Scale(x.node, c), v)
        }
    }

    pub fn div(&mut self, a: Scalar, b: Scalar) -> Scalar {
        let v = a.value / b.value;
        match (a.is_constant(), b.is_constant()) {
            (true, true) => self.constant(v),
            (false, true) => self.scale_node(a, 1.0 / b.value, v),
            (true, false) => {
                let d = -a.value / (b.value * b.value);
                self.push(Op::Unary(b.node, d), v)
            }
            (false, false) => self.push(Op::Div(a.node, b.node), v),
        }
    }

    pub fn neg(&mut self, x: Scalar) -> Scalar {
        self.scale(x, -1.0)
    }

    pub fn scale(&mut self, x: Scalar, c: f64) -> Scalar {
        let v = x.value * c;
        if x.is_constant() {
            self.constant(v)
        } else {
            self.scale_node(x, c, v)
        }
    }

    /// `1 - x`, the complement of a probability.
    pub fn complement(&mut self, x: Scalar) -> Scalar {
        self.sub(Scalar::ONE, x)
    }

    pub fn log(&mut self, x: Scalar) -> Scalar {
        let v = x.value.ln();
        if x.is_constant() {
            self.constant(v)
        } else {
            self.push(Op::Log(x.node), v)
        }
    }

    pub fn exp(&mut self, x: Scalar) -> Scalar {
        let v = x.value.exp();
        if x.is_constant() {
            self.constant(v)
        } else {
            self.push(Op::Exp(x.node), v)
        }
    }

    pub fn sigmoid(&mut self, x: Scalar) -> Scalar {
        let v = stable_sigmoid(x.value);
        if x.is_constant() {
            self.constant(v)
        } else {
            self.push(Op::Sigmoid(x.node), v)
        }
    }

    /// Records `value = f(x)` with the caller-supplied derivative `f'(x)`.
    pub fn custom_unary(&mut self, x: Scalar, value: f64, derivative: f64) -> Scalar {
        if x.is_constant() {
            self.constant(value)
        } else {
            self.push(Op::Unary(x.node, derivative), value)
        }
    }

    pub fn sum(&mut self, xs: &[Scalar]) -> Scalar {
        self.linear(xs.iter().map(|&x| (x, 1.0)), 0.0)
    }

    /// `bias + sum_i c_i * x_i` as a single node.
    pub fn linear<I>(&mut self, terms: I, bias: f64) -> Scalar
    where
        I: IntoIterator<Item = (Scalar, f64)>,
    {
        let start = self.terms.len();
        let mut value = bias;
        let mut last = None;
        for (x, c) in terms {
            value += c * x.value;
            if !x.is_constant() && c != 0.0 {
                last = Some((x, c));
                if self.recording {
                    self.terms.push((x.node, c));
                }
            }
        }
        let len = self.terms.len() - start;
        match (len, last) {
            (0, None) => self.constant(value),
            // One unit term and no offset: reuse the operand itself.
            (1, Some((x, c))) if c == 1.0 && value == x.value => {
                self.terms.truncate(start);
                x
            }
            _ if !self.recording => self.constant(value),
            _ => self.push(Op::Linear(start as u32, len as u32), value),
        }
    }

    /// Numerically stable `log(sum_i exp(x_i))`.
    pub fn log_sum_exp(&mut self, xs: &[Scalar]) -> Scalar {
        assert!(!xs.is_empty(), "log_sum_exp of an empty list");
        let m = xs.iter().map(|x| x.value).fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = xs.iter().map(|x| (x.value - m).exp()).sum();
        let v = m + s.ln();
        if xs.iter().all(|x| x.is_constant()) || !self.recording {
            return self.constant(v);
        }
        let start = self.terms.len();
        for x in xs.iter().filter(|x| !x.is_constant()) {
            self.terms.push((x.node, x.value));
        }
        let len = self.terms.len() - start;
        self.push(Op::LogSumExp(start as u32, len as u32), v)
    }

    /// Softmax via a fused log-sum-exp: `y_i = exp(x_i - lse(x))`.
    pub fn softmax(&mut self, xs: &[Scalar]) -> Vec<Scalar> {
        let lse = self.log_sum_exp(xs);
        xs.iter()
            .map(|&x| {
                let shifted = self.sub(x, lse);
                self.exp(shifted)
            })
            .collect()
    }

    /// Reverse sweep from `output`.
    pub fn backward(&self, output: Scalar) -> Result<Gradients, DiffError> {
        self.check_finite()?;
        let n = self.ops.len();
        let mut adj = vec![0.0; n];
        if let Some(root) = output.node() {
            adj[root as usize] = 1.0;
            for i in (0..=root as usize).rev() {
                let g = adj[i];
                if g == 0.0 {
                    continue;
                }
                match self.ops[i] {
                    Op::Leaf | Op::Param => {}
                    Op::Add(a, b) => {
                        adj[a as usize] += g;
                        adj[b as usize] += g;
                    }
                    Op::Sub(a, b) => {
                        adj[a as usize] += g;
                        adj[b as usize] -= g;
                    }
                    Op::Mul(a, b) => {
                        let (va, vb) = (self.values[a as usize], self.values[b as usize]);
                        adj[a as usize] += g * vb;
                        adj[b as usize] += g * va;
                    }
                    Op::Div(a, b) => {
                        let (va, vb) = (self.values[a as usize], self.values[b as usize]);
                        adj[a as usize] += g / vb;
                        adj[b as usize] -= g * va / (vb * vb);
                    }
                    Op::Shift(a) => adj[a as usize] += g,
                    Op::Scale(a, c) => adj[a as usize] += g * c,
                    Op::Log(a) => adj[a as usize] += g / self.values[a as usize],
                    Op::Exp(a) => adj[a as usize] += g * self.values[i],
                    Op::Sigmoid(a) => {
                        let s = self.values[i];
                        adj[a as usize] += g * s * (1.0 - s);
                    }
                    Op::Unary(a, d) => adj[a as usize] += g * d,
                    Op::Linear(start, len) => {
                        for &(x, c) in &self.terms[start as usize..(start + len) as usize] {
                            adj[x as usize] += g * c;
                        }
                    }
                    Op::LogSumExp(start, len) => {
                        let lse = self.values[i];
                        for &(x, xv) in &self.terms[start as usize..(start + len) as usize] {
                            adj[x as usize] += g * (xv - lse).exp();
                        }
                    }
                }
            }
        }
        if let Some(node) = adj.iter().position(|a| !a.is_finite()) {
            return Err(DiffError::NonFiniteGradient { node });
        }
        Ok(Gradients {
            adjoints: adj,
            params: self
                .params
                .iter()
                .enumerate()
                .map(|(k, &(t, idx))| (t, idx, self.param_node(k)))
                .collect(),
        })
    }

    fn param_node(&self, k: usize) -> u32 {
        let (t, idx) = self.params[k];
        self.param_slots[t.0][idx as usize]
    }
}

/// Adjoints from one backward sweep.
#[derive(Debug, Clone)]
pub struct Gradients {
    adjoints: Vec<f64>,
    params: Vec<(TensorId, u32, u32)>,
}

impl Gradients {
    /// d(output)/d(x). Constants have zero gradient.
    pub fn wrt(&self, x: Scalar) -> f64 {
        x.node().map_or(0.0, |n| self.adjoints[n as usize])
    }

    /// Adds `scale * d(output)/d(param)` into a dense gradient buffer.
    pub fn accumulate_into(&self, grads: &mut ParamGrads, scale: f64) {
        for &(t, idx, node) in &self.params {
            grads.tensor_mut(t)[idx as usize] += scale * self.adjoints[node as usize];
        }
    }

    /// Dense parameter gradients; parameters never reached stay zero.
    pub fn param_grads(&self, store: &ParamStore) -> ParamGrads {
        let mut g = ParamGrads::zeros_like(store);
        self.accumulate_into(&mut g, 1.0);
        g
    }
}

pub(crate) fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
