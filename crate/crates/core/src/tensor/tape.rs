use std::fmt;
use std::sync::Arc;

use super::{matmul_nn, matmul_nt, matmul_tn, Tensor};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Element-wise operations exposed through [`Tape::elementwise`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Elementwise {
    Add,
    Sub,
    Hadamard,
    Sigmoid,
    Tanh,
    Relu,
}

/// Direction along which [`Tape::softmax`] normalizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Every row sums to one.
    Rows,
    /// Every column sums to one.
    Cols,
}

/// Operation tags, used for diagnostics and for the gradient-check fault hook.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Leaf,
    MatMul,
    Add,
    Sub,
    Hadamard,
    Sigmoid,
    Tanh,
    Relu,
    Scale,
    AddRow,
    ScaleRows,
    Softmax,
    ConcatCols,
    SliceCols,
    Transpose,
    Reshape,
    Propagate,
    Sum,
    SumSquares,
}

impl OpKind {
    pub const ALL: [OpKind; 19] = [
        OpKind::Leaf,
        OpKind::MatMul,
        OpKind::Add,
        OpKind::Sub,
        OpKind::Hadamard,
        OpKind::Sigmoid,
        OpKind::Tanh,
        OpKind::Relu,
        OpKind::Scale,
        OpKind::AddRow,
        OpKind::ScaleRows,
        OpKind::Softmax,
        OpKind::ConcatCols,
        OpKind::SliceCols,
        OpKind::Transpose,
        OpKind::Reshape,
        OpKind::Propagate,
        OpKind::Sum,
        OpKind::SumSquares,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Leaf => "leaf",
            OpKind::MatMul => "matmul",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Hadamard => "hadamard",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Tanh => "tanh",
            OpKind::Relu => "relu",
            OpKind::Scale => "scale",
            OpKind::AddRow => "add_row",
            OpKind::ScaleRows => "scale_rows",
            OpKind::Softmax => "softmax",
            OpKind::ConcatCols => "concat_cols",
            OpKind::SliceCols => "slice_cols",
            OpKind::Transpose => "transpose",
            OpKind::Reshape => "reshape",
            OpKind::Propagate => "propagate",
            OpKind::Sum => "sum",
            OpKind::SumSquares => "sum_squares",
        }
    }

    pub fn from_name(name: &str) -> Option<OpKind> {
        OpKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Scale(Var, f64),
    AddRow(Var, Var),
    ScaleRows(Var, Var),
    Softmax(Var, Axis),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    Transpose(Var),
    Reshape(Var),
    Propagate(Arc<Tensor>, Var),
    Sum(Var),
    SumSquares(Var),
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::Sub(..) => OpKind::Sub,
            Op::Hadamard(..) => OpKind::Hadamard,
            Op::Sigmoid(..) => OpKind::Sigmoid,
            Op::Tanh(..) => OpKind::Tanh,
            Op::Relu(..) => OpKind::Relu,
            Op::Scale(..) => OpKind::Scale,
            Op::AddRow(..) => OpKind::AddRow,
            Op::ScaleRows(..) => OpKind::ScaleRows,
            Op::Softmax(..) => OpKind::Softmax,
            Op::ConcatCols(..) => OpKind::ConcatCols,
            Op::SliceCols(..) => OpKind::SliceCols,
            Op::Transpose(..) => OpKind::Transpose,
            Op::Reshape(..) => OpKind::Reshape,
            Op::Propagate(..) => OpKind::Propagate,
            Op::Sum(..) => OpKind::Sum,
            Op::SumSquares(..) => OpKind::SumSquares,
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records a computation for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the node list is already a
/// topological order and the backward sweep is a single reverse pass.
/// A tape is single-writer; independent tapes can live on separate threads.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    fault: Option<(OpKind, f64)>,
}

/// Gradients of a scalar root with respect to every node of a tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient for `var`; exactly zero when `var` does not influence the root.
    pub fn get(&self, var: Var) -> Tensor {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[var.0];
                Tensor::zeros(r, c)
            }
        }
    }

    pub fn take(&mut self, var: Var) -> Tensor {
        match self.grads[var.0].take() {
            Some(g) => g,
            None => {
                let (r, c) = self.shapes[var.0];
                Tensor::zeros(r, c)
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Scales the backward contribution of every `op` node by `factor`.
    /// Exists so the gradient checker can prove it catches a broken rule.
    #[doc(hidden)]
    pub fn inject_fault(&mut self, op: OpKind, factor: f64) {
        self.fault = Some((op, factor));
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> (usize, usize) {
        self.nodes[var.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn record(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let rg = self.needs(inputs);
        self.push(value, op, rg)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.record(value, Op::MatMul(a, b), &[a, b]))
    }

    pub fn elementwise(&mut self, kind: Elementwise, a: Var, b: Option<Var>) -> Result<Var> {
        match (kind, b) {
            (Elementwise::Add, Some(b)) => self.add(a, b),
            (Elementwise::Sub, Some(b)) => self.sub(a, b),
            (Elementwise::Hadamard, Some(b)) => self.hadamard(a, b),
            (Elementwise::Sigmoid, None) => Ok(self.sigmoid(a)),
            (Elementwise::Tanh, None) => Ok(self.tanh(a)),
            (Elementwise::Relu, None) => Ok(self.relu(a)),
            (kind, _) => Err(Error::Contract(format!("wrong operand count for {kind:?}"))),
        }
    }

    fn binary_shapes(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::shape(op, sa, sb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_shapes("add", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.record(value, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_shapes("sub", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        Ok(self.record(value, Op::Sub(a, b), &[a, b]))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_shapes("hadamard", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.record(value, Op::Hadamard(a, b), &[a, b]))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(logistic);
        self.record(value, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.record(value, Op::Tanh(a), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        self.record(value, Op::Relu(a), &[a])
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|x| x * factor);
        self.record(value, Op::Scale(a, factor), &[a])
    }

    /// `x + 1·bias`, broadcasting a `1 x k` row over every row of `x`.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xs, bs) = (self.shape(x), self.shape(bias));
        if bs != (1, xs.1) {
            return Err(Error::shape("add_row", xs, bs));
        }
        let b = self.value(bias).as_slice();
        let mut value = self.value(x).clone();
        for row in value.as_mut_slice().chunks_exact_mut(xs.1.max(1)) {
            for (v, bv) in row.iter_mut().zip(b) {
                *v += bv;
            }
        }
        Ok(self.record(value, Op::AddRow(x, bias), &[x, bias]))
    }

    /// Multiplies row `i` of `x` by `s[i]`, where `s` is a column vector.
    pub fn scale_rows(&mut self, x: Var, s: Var) -> Result<Var> {
        let (xs, ss) = (self.shape(x), self.shape(s));
        if ss != (xs.0, 1) {
            return Err(Error::shape("scale_rows", xs, ss));
        }
        let sv = self.value(s).as_slice();
        let mut value = self.value(x).clone();
        if xs.1 > 0 {
            for (row, &k) in value.as_mut_slice().chunks_exact_mut(xs.1).zip(sv) {
                row.iter_mut().for_each(|v| *v *= k);
            }
        }
        Ok(self.record(value, Op::ScaleRows(x, s), &[x, s]))
    }

    /// Softmax with max-subtraction, normalizing along `axis`.
    pub fn softmax(&mut self, e: Var, axis: Axis) -> Result<Var> {
        let t = self.value(e);
        if t.is_empty() {
            return Err(Error::Contract("softmax of an empty tensor".into()));
        }
        let value = match axis {
            Axis::Rows => softmax_rows(t),
            Axis::Cols => softmax_rows(&t.transpose()).transpose(),
        };
        Ok(self.record(value, Op::Softmax(e, axis), &[e]))
    }

    /// Softmax of an `n x 1` score vector.
    pub fn softmax_vector(&mut self, e: Var) -> Result<Var> {
        let s = self.shape(e);
        if s.1 != 1 || s.0 == 0 {
            return Err(Error::shape("softmax_vector", s, (s.0.max(1), 1)));
        }
        self.softmax(e, Axis::Cols)
    }

    /// Joins tensors with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::Contract("concat of zero tensors".into()));
        };
        let rows = self.shape(first).0;
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.0 != rows {
                return Err(Error::shape("concat_cols", self.shape(first), s));
            }
            total += s.1;
        }
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let value = Tensor::new(rows, total, data)?;
        Ok(self.record(value, Op::ConcatCols(parts.to_vec()), parts))
    }

    /// Columns `[start, start + len)`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (rows, cols) = self.shape(a);
        if start + len > cols {
            return Err(Error::shape(
                "slice_cols",
                (rows, cols),
                (rows, start + len),
            ));
        }
        let t = self.value(a);
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&t.row(r)[start..start + len]);
        }
        let value = Tensor::new(rows, len, data)?;
        Ok(self.record(value, Op::SliceCols(a, start), &[a]))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.record(value, Op::Transpose(a), &[a])
    }

    /// Row-major reinterpretation of `a` under a new shape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let value = self.value(a).reshape(rows, cols)?;
        Ok(self.record(value, Op::Reshape(a), &[a]))
    }

    /// Applies the fixed `n x n` matrix `prop` to each consecutive block of
    /// `n` rows of `x`. With a single block this is plain `prop · x`.
    pub fn propagate(&mut self, prop: &Arc<Tensor>, x: Var) -> Result<Var> {
        let n = prop.rows();
        let (rows, cols) = self.shape(x);
        if prop.cols() != n || n == 0 || rows % n != 0 {
            return Err(Error::shape("propagate", prop.shape(), (rows, cols)));
        }
        let xt = self.value(x);
        let mut data = Vec::with_capacity(rows * cols);
        for b in 0..rows / n {
            let block = xt.slice_rows(b * n, n);
            data.extend(matmul_nn(prop, &block).into_vec());
        }
        let value = Tensor::new(rows, cols, data)?;
        Ok(self.record(value, Op::Propagate(Arc::clone(prop), x), &[x]))
    }

    /// Sum of all entries, as a `1 x 1` tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        self.record(value, Op::Sum(a), &[a])
    }

    /// Sum of squared entries, as a `1 x 1` tensor.
    pub fn sum_squares(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum_squares());
        self.record(value, Op::SumSquares(a), &[a])
    }

    /// Gradients of the scalar `root` with respect to every node.
    ///
    /// The tape is not modified, so calling this twice yields identical
    /// results rather than accumulating.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let shape = self.shape(root);
        if shape != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar root, got {}x{}",
                shape.0, shape.1
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let factor = match self.fault {
                Some((kind, f)) if kind == node.op.kind() => f,
                _ => 1.0,
            };
            let mut acc = Accumulator {
                tape: self,
                grads: &mut grads,
                factor,
            };
            self.backward_node(node, &g, &mut acc);
            grads[idx] = Some(g);
        }

        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }

    fn backward_node(&self, node: &Node, g: &Tensor, acc: &mut Accumulator<'_>) {
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if acc.wants(*a) {
                    acc.add(*a, matmul_nt(g, val(*b)));
                }
                if acc.wants(*b) {
                    acc.add(*b, matmul_tn(val(*a), g));
                }
            }
            Op::Add(a, b) => {
                acc.add(*a, g.clone());
                acc.add(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc.add(*a, g.clone());
                if acc.wants(*b) {
                    acc.add(*b, g.map(|x| -x));
                }
            }
            Op::Hadamard(a, b) => {
                if acc.wants(*a) {
                    acc.add(*a, g.zip_map(val(*b), |x, y| x * y));
                }
                if acc.wants(*b) {
                    acc.add(*b, g.zip_map(val(*a), |x, y| x * y));
                }
            }
            Op::Sigmoid(a) => {
                acc.add(*a, g.zip_map(&node.value, |x, s| x * s * (1.0 - s)));
            }
            Op::Tanh(a) => {
                acc.add(*a, g.zip_map(&node.value, |x, t| x * (1.0 - t * t)));
            }
            Op::Relu(a) => {
                acc.add(
                    *a,
                    g.zip_map(val(*a), |x, input| if input > 0.0 { x } else { 0.0 }),
                );
            }
            Op::Scale(a, k) => acc.add(*a, g.map(|x| x * k)),
            Op::AddRow(x, bias) => {
                acc.add(*x, g.clone());
                if acc.wants(*bias) {
                    let cols = g.cols();
                    let mut col_sums = vec![0.0; cols];
                    if cols > 0 {
                        for row in g.as_slice().chunks_exact(cols) {
                            for (s, v) in col_sums.iter_mut().zip(row) {
                                *s += v;
                            }
                        }
                    }
                    acc.add(*bias, Tensor::new(1, cols, col_sums).expect("bias shape"));
                }
            }
            Op::ScaleRows(x, s) => {
                let (rows, cols) = g.shape();
                if acc.wants(*x) {
                    let sv = val(*s).as_slice();
                    let mut gx = g.clone();
                    if cols > 0 {
                        for (row, &k) in gx.as_mut_slice().chunks_exact_mut(cols).zip(sv) {
                            row.iter_mut().for_each(|v| *v *= k);
                        }
                    }
                    acc.add(*x, gx);
                }
                if acc.wants(*s) {
                    let xv = val(*x);
                    let gs: Vec<f64> = (0..rows)
                        .map(|r| g.row(r).iter().zip(xv.row(r)).map(|(a, b)| a * b).sum())
                        .collect();
                    acc.add(*s, Tensor::column(&gs));
                }
            }
            Op::Softmax(e, axis) => {
                let ge = match axis {
                    Axis::Rows => softmax_rows_backward(&node.value, g),
                    Axis::Cols => {
                        softmax_rows_backward(&node.value.transpose(), &g.transpose()).transpose()
                    }
                };
                acc.add(*e, ge);
            }
            Op::ConcatCols(parts) => {
                let rows = g.rows();
                let mut offset = 0;
                for &p in parts {
                    let width = val(p).cols();
                    if acc.wants(p) {
                        let mut data = Vec::with_capacity(rows * width);
                        for r in 0..rows {
                            data.extend_from_slice(&g.row(r)[offset..offset + width]);
                        }
                        acc.add(p, Tensor::new(rows, width, data).expect("concat split"));
                    }
                    offset += width;
                }
            }
            Op::SliceCols(a, start) => {
                let (rows, cols) = val(*a).shape();
                let width = g.cols();
                let mut ga = Tensor::zeros(rows, cols);
                for r in 0..rows {
                    ga.as_mut_slice()[r * cols + start..r * cols + start + width]
                        .copy_from_slice(g.row(r));
                }
                acc.add(*a, ga);
            }
            Op::Transpose(a) => acc.add(*a, g.transpose()),
            Op::Reshape(a) => {
                let (r, c) = val(*a).shape();
                acc.add(*a, g.reshape(r, c).expect("reshape back"));
            }
            Op::Propagate(prop, x) => {
                let n = prop.rows();
                let mut data = Vec::with_capacity(g.len());
                for b in 0..g.rows() / n {
                    let block = g.slice_rows(b * n, n);
                    data.extend(matmul_tn(prop, &block).into_vec());
                }
                acc.add(
                    *x,
                    Tensor::new(g.rows(), g.cols(), data).expect("propagate"),
                );
            }
            Op::Sum(a) => {
                let (r, c) = val(*a).shape();
                acc.add(*a, Tensor::filled(r, c, g.get(0, 0)));
            }
            Op::SumSquares(a) => {
                let k = 2.0 * g.get(0, 0);
                acc.add(*a, val(*a).map(|x| k * x));
            }
        }
    }
}

struct Accumulator<'a> {
    tape: &'a Tape,
    grads: &'a mut Vec<Option<Tensor>>,
    factor: f64,
}

impl Accumulator<'_> {
    fn wants(&self, v: Var) -> bool {
        self.tape.nodes[v.0].requires_grad
    }

    fn add(&mut self, v: Var, mut g: Tensor) {
        if !self.wants(v) {
            return;
        }
        if self.factor != 1.0 {
            let k = self.factor;
            g.as_mut_slice().iter_mut().for_each(|x| *x *= k);
        }
        match &mut self.grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_rows(t: &Tensor) -> Tensor {
    let cols = t.cols();
    let mut out = t.clone();
    if cols == 0 {
        return out;
    }
    for row in out.as_mut_slice().chunks_exact_mut(cols) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    out
}

fn softmax_rows_backward(y: &Tensor, g: &Tensor) -> Tensor {
    let cols = y.cols();
    let mut out = Tensor::zeros(y.rows(), cols);
    for r in 0..y.rows() {
        let (yr, gr) = (y.row(r), g.row(r));
        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
        for c in 0..cols {
            out.as_mut_slice()[r * cols + c] = yr[c] * (gr[c] - dot);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn activations_at_zero() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::scalar(0.0));
        let s = tape.sigmoid(z);
        let t = tape.tanh(z);
        assert_eq!(tape.value(s).get(0, 0), 0.5);
        assert_eq!(tape.value(t).get(0, 0), 0.0);
    }

    #[test]
    fn relu_clamps_negatives() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[[-1.0, 2.0]]));
        let y = tape.elementwise(Elementwise::Relu, x, None).unwrap();
        assert_eq!(tape.value(y), &Tensor::from_rows(&[[0.0, 2.0]]));
    }

    #[test]
    fn binary_shape_mismatch() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(2, 2));
        let b = tape.constant(Tensor::zeros(2, 3));
        assert!(matches!(
            tape.add(a, b),
            Err(Error::Shape { op: "add", .. })
        ));
        assert!(tape.elementwise(Elementwise::Sigmoid, a, Some(b)).is_err());
        assert!(tape.elementwise(Elementwise::Hadamard, a, None).is_err());
    }

    #[test]
    fn softmax_examples() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::column(&[7.5, 7.5, 7.5]));
        let a = tape.softmax_vector(c).unwrap();
        for &v in tape.value(a).as_slice() {
            assert!(close(v, 1.0 / 3.0, 1e-15));
        }

        let e = tape.constant(Tensor::column(&[0.0, 3f64.ln()]));
        let a = tape.softmax_vector(e).unwrap();
        assert!(close(tape.value(a).get(0, 0), 0.25, 1e-12));
        assert!(close(tape.value(a).get(1, 0), 0.75, 1e-12));

        let big = tape.constant(Tensor::column(&[1000.0, 1000.0]));
        let a = tape.softmax_vector(big).unwrap();
        assert_eq!(tape.value(a).as_slice(), &[0.5, 0.5]);

        let huge = tape.constant(Tensor::column(&[1e6, -1e6, 0.0]));
        let a = tape.softmax_vector(huge).unwrap();
        assert!(tape.value(a).is_finite());
    }

    #[test]
    fn matmul_gradient_hand_case() {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::from_rows(&[[1.0, 1.0]]));
        let b = tape.constant(Tensor::column(&[2.0, 5.0]));
        let p = tape.matmul(a, b).unwrap();
        let root = tape.sum(p);
        let grads = tape.backward(root).unwrap();
        assert_eq!(grads.get(a), Tensor::from_rows(&[[2.0, 5.0]]));
        // constants never receive gradients
        assert_eq!(grads.get(b), Tensor::zeros(2, 1));
    }

    #[test]
    fn sum_of_param_has_unit_gradient() {
        let mut tape = Tape::new();
        let p = tape.param(Tensor::filled(2, 3, 0.7));
        let root = tape.sum(p);
        let grads = tape.backward(root).unwrap();
        assert_eq!(grads.get(p), Tensor::filled(2, 3, 1.0));
    }

    #[test]
    fn squared_offset_gradient() {
        let mut tape = Tape::new();
        let p = tape.param(Tensor::scalar(5.0));
        let three = tape.constant(Tensor::scalar(3.0));
        let d = tape.sub(p, three).unwrap();
        let root = tape.sum_squares(d);
        let grads = tape.backward(root).unwrap();
        assert_eq!(grads.get(p).get(0, 0), 4.0);
    }

    #[test]
    fn unused_param_gets_exact_zero() {
        let mut tape = Tape::new();
        let used = tape.param(Tensor::scalar(2.0));
        let unused = tape.param(Tensor::filled(3, 2, 9.0));
        let root = tape.sum_squares(used);
        let grads = tape.backward(root).unwrap();
        assert_eq!(grads.get(unused), Tensor::zeros(3, 2));
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let mut tape = Tape::new();
        let p = tape.param(Tensor::zeros(2, 1));
        assert!(matches!(tape.backward(p), Err(Error::Contract(_))));
    }

    #[test]
    fn backward_twice_is_idempotent() {
        let mut tape = Tape::new();
        let p = tape.param(Tensor::from_rows(&[[0.3, -1.2]]));
        let s = tape.tanh(p);
        let root = tape.sum_squares(s);
        let first = tape.backward(root).unwrap().get(p);
        let second = tape.backward(root).unwrap().get(p);
        assert_eq!(first, second);
    }

    #[test]
    fn fault_injection_scales_one_rule() {
        let mut tape = Tape::new();
        let p = tape.param(Tensor::scalar(0.4));
        let s = tape.sigmoid(p);
        let root = tape.sum(s);
        let clean = tape.backward(root).unwrap().get(p).get(0, 0);
        tape.inject_fault(OpKind::Sigmoid, 2.0);
        let broken = tape.backward(root).unwrap().get(p).get(0, 0);
        assert!(close(broken, 2.0 * clean, 1e-15));
    }

    #[test]
    fn op_names_round_trip() {
        for kind in OpKind::ALL {
            assert_eq!(OpKind::from_name(kind.name()), Some(kind));
        }
    }
}
