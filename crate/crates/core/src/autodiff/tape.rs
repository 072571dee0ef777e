//! Tape-based reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every operation applied to [`Tensor`] handles during a
//! forward pass. [`Tensor::backward`] then walks the record in reverse and
//! accumulates gradients into a [`Gradients`] table. Nodes that do not depend
//! on any trainable leaf are skipped on the way back.
//!
//! ```
//! use spargcp::autodiff::{Matrix, Tape};
//!
//! let tape = Tape::new();
//! let w = tape.param(Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap());
//! let loss = w.sum().unwrap();
//! let grads = loss.backward().unwrap();
//! assert_eq!(grads.wrt(w).data(), &[1.0; 4]);
//! ```

use std::cell::{Cell, Ref, RefCell};
use std::cmp::Ordering;

use super::matrix::Matrix;
use crate::error::{dimension, validation, Error, Result};

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    AddBias(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Relu(usize),
    Elu(usize),
    LeakyRelu(usize, f64),
    Sigmoid(usize),
    Exp(usize),
    Ln(usize),
    ConcatCols(usize, usize),
    ConcatRows(usize, usize),
    RowGather(usize, Vec<usize>),
    Transpose(usize),
    LogSoftmaxRows(usize),
    SoftmaxRows(usize),
    SegmentSum(usize, Vec<usize>),
    SegmentSoftmax(usize, Vec<usize>),
    ScaleRows(usize, usize),
    SumAll(usize),
    MeanAll(usize),
    SumRows(usize),
    PickPerRow(usize, Vec<usize>),
    Select(usize, usize),
}

struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Operation record for one forward pass.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    consumed: Cell<bool>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Tensor<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Tensor<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

/// Gradients produced by one backward pass, indexed by tensor.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    pub fn get(&self, t: Tensor<'_>) -> Option<&Matrix> {
        self.grads.get(t.id).and_then(Option::as_ref)
    }

    /// Gradient for `t`, or zeros when nothing flowed into it.
    pub fn wrt(&self, t: Tensor<'_>) -> Matrix {
        match self.get(t) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[t.id];
                Matrix::zeros(r, c)
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            consumed: Cell::new(false),
        }
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Clears the record so the tape can be reused for another pass.
    pub fn reset(&mut self) {
        self.nodes.get_mut().clear();
        self.consumed.set(false);
    }

    /// Trainable leaf.
    pub fn param(&self, value: Matrix) -> Tensor<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// Non-trainable leaf.
    pub fn constant(&self, value: Matrix) -> Tensor<'_> {
        self.push(value, Op::Leaf, false)
    }

    fn push(&self, value: Matrix, op: Op, requires_grad: bool) -> Tensor<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Tensor {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn record(&self, name: &str, value: Matrix, op: Op, parents: &[usize]) -> Result<Tensor<'_>> {
        if !value.all_finite() {
            return Err(Error::Numeric(name.to_string()));
        }
        let requires_grad = {
            let nodes = self.nodes.borrow();
            parents.iter().any(|&p| nodes[p].requires_grad)
        };
        Ok(self.push(value, op, requires_grad))
    }

    fn value(&self, id: usize) -> Ref<'_, Matrix> {
        Ref::map(self.nodes.borrow(), |n| &n[id].value)
    }

    fn backward(&self, root: usize) -> Result<Gradients> {
        {
            let nodes = self.nodes.borrow();
            let shape = nodes[root].value.shape();
            if shape != (1, 1) {
                return Err(Error::Usage(format!(
                    "backward needs a scalar root, got {}x{}",
                    shape.0, shape.1
                )));
            }
        }
        if self.consumed.replace(true) {
            return Err(Error::Usage(
                "backward already ran on this tape; reset it first".into(),
            ));
        }
        let nodes = self.nodes.borrow();
        let mut grads: Vec<Option<Matrix>> = vec![None; nodes.len()];
        grads[root] = Some(Matrix::filled(1, 1, 1.0));

        for id in (0..=root).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let mut acc = |target: usize, delta: Matrix| {
                if !nodes[target].requires_grad {
                    return;
                }
                match &mut grads[target] {
                    Some(existing) => existing.add_assign(&delta),
                    slot @ None => *slot = Some(delta),
                }
            };
            let val = |i: usize| &nodes[i].value;
            let out = &node.value;
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    if nodes[*a].requires_grad {
                        acc(*a, g.matmul(&val(*b).transpose())?);
                    }
                    if nodes[*b].requires_grad {
                        acc(*b, val(*a).transpose().matmul(&g)?);
                    }
                }
                Op::AddBias(a, b) => {
                    let mut db = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (d, &x) in db.data_mut().iter_mut().zip(g.row(r)) {
                            *d += x;
                        }
                    }
                    acc(*b, db);
                    acc(*a, g);
                }
                Op::Add(a, b) => {
                    acc(*b, g.clone());
                    acc(*a, g);
                }
                Op::Sub(a, b) => {
                    acc(*b, g.map(|x| -x));
                    acc(*a, g);
                }
                Op::Mul(a, b) => {
                    acc(*a, g.zip_map(val(*b), |x, y| x * y));
                    acc(*b, g.zip_map(val(*a), |x, y| x * y));
                }
                Op::Scale(a, k) => acc(*a, g.map(|x| x * k)),
                Op::Relu(a) => acc(*a, g.zip_map(val(*a), |x, y| if y > 0.0 { x } else { 0.0 })),
                Op::Elu(a) => acc(
                    *a,
                    g.zip_map(out, |x, y| if y > 0.0 { x } else { x * (y + 1.0) }),
                ),
                Op::LeakyRelu(a, slope) => acc(
                    *a,
                    g.zip_map(val(*a), |x, y| if y > 0.0 { x } else { x * slope }),
                ),
                Op::Sigmoid(a) => acc(*a, g.zip_map(out, |x, y| x * y * (1.0 - y))),
                Op::Exp(a) => acc(*a, g.zip_map(out, |x, y| x * y)),
                Op::Ln(a) => acc(*a, g.zip_map(val(*a), |x, y| x / y)),
                Op::ConcatCols(a, b) => {
                    let ca = val(*a).cols();
                    let cb = val(*b).cols();
                    let mut ga = Matrix::zeros(g.rows(), ca);
                    let mut gb = Matrix::zeros(g.rows(), cb);
                    for r in 0..g.rows() {
                        ga.row_mut(r).copy_from_slice(&g.row(r)[..ca]);
                        gb.row_mut(r).copy_from_slice(&g.row(r)[ca..]);
                    }
                    acc(*a, ga);
                    acc(*b, gb);
                }
                Op::ConcatRows(a, b) => {
                    let (ra, c) = val(*a).shape();
                    let split = ra * c;
                    let ga = Matrix::from_vec(ra, c, g.data()[..split].to_vec())?;
                    let gb = Matrix::from_vec(g.rows() - ra, c, g.data()[split..].to_vec())?;
                    acc(*a, ga);
                    acc(*b, gb);
                }
                Op::RowGather(a, index) => {
                    let (r, c) = val(*a).shape();
                    let mut ga = Matrix::zeros(r, c);
                    for (i, &src) in index.iter().enumerate() {
                        for (d, &x) in ga.row_mut(src).iter_mut().zip(g.row(i)) {
                            *d += x;
                        }
                    }
                    acc(*a, ga);
                }
                Op::Transpose(a) => acc(*a, g.transpose()),
                Op::LogSoftmaxRows(a) => {
                    let mut ga = g.clone();
                    for r in 0..g.rows() {
                        let total: f64 = g.row(r).iter().sum();
                        for (d, &y) in ga.row_mut(r).iter_mut().zip(out.row(r)) {
                            *d -= y.exp() * total;
                        }
                    }
                    acc(*a, ga);
                }
                Op::SoftmaxRows(a) => {
                    let mut ga = g.clone();
                    for r in 0..g.rows() {
                        let dot: f64 = g.row(r).iter().zip(out.row(r)).map(|(x, y)| x * y).sum();
                        for (d, &y) in ga.row_mut(r).iter_mut().zip(out.row(r)) {
                            *d = y * (*d - dot);
                        }
                    }
                    acc(*a, ga);
                }
                Op::SegmentSum(a, dest) => {
                    let c = g.cols();
                    let mut ga = Matrix::zeros(dest.len(), c);
                    for (e, &d) in dest.iter().enumerate() {
                        ga.row_mut(e).copy_from_slice(g.row(d));
                    }
                    acc(*a, ga);
                }
                Op::SegmentSoftmax(a, dest) => {
                    let segments = dest.iter().copied().max().map_or(0, |m| m + 1);
                    let mut dot = vec![0.0; segments];
                    for (e, &d) in dest.iter().enumerate() {
                        dot[d] += g.get(e, 0) * out.get(e, 0);
                    }
                    let mut ga = Matrix::zeros(dest.len(), 1);
                    for (e, &d) in dest.iter().enumerate() {
                        ga.set(e, 0, out.get(e, 0) * (g.get(e, 0) - dot[d]));
                    }
                    acc(*a, ga);
                }
                Op::ScaleRows(a, s) => {
                    let av = val(*a);
                    let sv = val(*s);
                    if nodes[*a].requires_grad {
                        let mut ga = g.clone();
                        for r in 0..g.rows() {
                            let k = sv.get(r, 0);
                            ga.row_mut(r).iter_mut().for_each(|x| *x *= k);
                        }
                        acc(*a, ga);
                    }
                    if nodes[*s].requires_grad {
                        let mut gs = Matrix::zeros(g.rows(), 1);
                        for r in 0..g.rows() {
                            let d: f64 = g.row(r).iter().zip(av.row(r)).map(|(x, y)| x * y).sum();
                            gs.set(r, 0, d);
                        }
                        acc(*s, gs);
                    }
                }
                Op::SumAll(a) => {
                    let (r, c) = val(*a).shape();
                    acc(*a, Matrix::filled(r, c, g.get(0, 0)));
                }
                Op::MeanAll(a) => {
                    let (r, c) = val(*a).shape();
                    acc(*a, Matrix::filled(r, c, g.get(0, 0) / (r * c) as f64));
                }
                Op::SumRows(a) => {
                    let (r, c) = val(*a).shape();
                    let mut ga = Matrix::zeros(r, c);
                    for i in 0..r {
                        let k = g.get(i, 0);
                        ga.row_mut(i).iter_mut().for_each(|x| *x = k);
                    }
                    acc(*a, ga);
                }
                Op::PickPerRow(a, cols) => {
                    let (r, c) = val(*a).shape();
                    let mut ga = Matrix::zeros(r, c);
                    for (i, &col) in cols.iter().enumerate() {
                        ga.set(i, col, g.get(i, 0));
                    }
                    acc(*a, ga);
                }
                Op::Select(a, flat) => {
                    let (r, c) = val(*a).shape();
                    let mut ga = Matrix::zeros(r, c);
                    ga.data_mut()[*flat] = g.get(0, 0);
                    acc(*a, ga);
                }
            }
        }
        let shapes = nodes.iter().map(|n| n.value.shape()).collect();
        Ok(Gradients { grads, shapes })
    }
}

fn same_shape(name: &str, a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(dimension(format!(
            "{name}: {}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

fn column_vector(name: &str, shape: (usize, usize)) -> Result<()> {
    if shape.1 != 1 {
        return Err(dimension(format!(
            "{name}: expected a column vector, got {}x{}",
            shape.0, shape.1
        )));
    }
    Ok(())
}

/// Position `j` (1-based) of the order statistic used everywhere a quantile
/// is taken: `clamp(ceil(q * k), 1, k)`.
///
/// A `1e-9` slack keeps products such as `0.9 * 10` from rounding up past
/// the integer they represent.
pub fn quantile_rank(q: f64, k: usize) -> usize {
    let j = (q * k as f64 - 1e-9).ceil();
    (j.max(1.0) as usize).min(k)
}

/// Indices of `values` sorted ascending, ties broken by index.
pub fn argsort_ascending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

impl<'t> Tensor<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    /// The tape this tensor lives on.
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.value(self.id).shape()
    }

    /// Copy of the forward value.
    pub fn value(&self) -> Matrix {
        self.tape.value(self.id).clone()
    }

    /// Scalar value of a 1x1 tensor.
    pub fn scalar(&self) -> f64 {
        let v = self.tape.value(self.id);
        debug_assert_eq!(v.shape(), (1, 1));
        v.get(0, 0)
    }

    pub fn with_value<R>(&self, f: impl FnOnce(&Matrix) -> R) -> R {
        f(&self.tape.value(self.id))
    }

    pub fn backward(self) -> Result<Gradients> {
        self.tape.backward(self.id)
    }

    fn unary(self, name: &str, op: Op, f: impl FnOnce(&Matrix) -> Result<Matrix>) -> Result<Tensor<'t>> {
        let value = f(&self.tape.value(self.id))?;
        self.tape.record(name, value, op, &[self.id])
    }

    fn binary(
        self,
        other: Tensor<'t>,
        name: &str,
        op: Op,
        f: impl FnOnce(&Matrix, &Matrix) -> Result<Matrix>,
    ) -> Result<Tensor<'t>> {
        debug_assert!(std::ptr::eq(self.tape, other.tape), "tensors from different tapes");
        let value = {
            let a = self.tape.value(self.id);
            let b = self.tape.value(other.id);
            f(&a, &b)?
        };
        self.tape.record(name, value, op, &[self.id, other.id])
    }

    pub fn matmul(self, other: Tensor<'t>) -> Result<Tensor<'t>> {
        self.binary(other, "matmul", Op::MatMul(self.id, other.id), |a, b| a.matmul(b))
    }

    /// Adds a `1 x c` bias row to every row.
    pub fn add_bias(self, bias: Tensor<'t>) -> Result<Tensor<'t>> {
        self.binary(bias, "add_bias", Op::AddBias(self.id, bias.id), |a, b| {
            if b.rows() != 1 || b.cols() != a.cols() {
                return Err(dimension(format!(
                    "add_bias: {}x{} with bias {}x{}",
                    a.rows(),
                    a.cols(),
                    b.rows(),
                    b.cols()
                )));
            }
            let mut out = a.clone();
            for r in 0..out.rows() {
                for (o, &x) in out.row_mut(r).iter_mut().zip(b.data()) {
                    *o += x;
                }
            }
            Ok(out)
        })
    }

    pub fn add(self, other: Tensor<'t>) -> Result<Tensor<'t>> {
        self.binary(other, "add", Op::Add(self.id, other.id), |a, b| {
            same_shape("add", a.shape(), b.shape())?;
            Ok(a.zip_map(b, |x, y| x + y))
        })
    }

    pub fn sub(self, other: Tensor<'t>) -> Result<Tensor<'t>> {
        self.binary(other, "sub", Op::Sub(self.id, other.id), |a, b| {
            same_shape("sub", a.shape(), b.shape())?;
            Ok(a.zip_map(b, |x, y| x - y))
        })
    }

    /// Elementwise product.
    pub fn mul(self, other: Tensor<'t>) -> Result<Tensor<'t>> {
        self.binary(other, "mul", Op::Mul(self.id, other.id), |a, b| {
            same_shape("mul", a.shape(), b.shape())?;
            Ok(a.zip_map(b, |x, y| x * y))
        })
    }

    pub fn scale(self, k: f64) -> Result<Tensor<'t>> {
        self.unary("scale", Op::Scale(self.id, k), |a| Ok(a.map(|x| x * k)))
    }

    pub fn relu(self) -> Result<Tensor<'t>> {
        self.unary("relu", Op::Relu(self.id), |a| Ok(a.map(|x| x.max(0.0))))
    }

    /// ELU with unit scale.
    pub fn elu(self) -> Result<Tensor<'t>> {
        self.unary("elu", Op::Elu(self.id), |a| {
            Ok(a.map(|x| if x > 0.0 { x } else { x.exp_m1() }))
        })
    }

    pub fn leaky_relu(self, slope: f64) -> Result<Tensor<'t>> {
        self.unary("leaky_relu", Op::LeakyRelu(self.id, slope), |a| {
            Ok(a.map(|x| if x > 0.0 { x } else { slope * x }))
        })
    }

    pub fn sigmoid(self) -> Result<Tensor<'t>> {
        self.unary("sigmoid", Op::Sigmoid(self.id), |a| {
            Ok(a.map(|x| {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }))
        })
    }

    pub fn exp(self) -> Result<Tensor<'t>> {
        self.unary("exp", Op::Exp(self.id), |a| Ok(a.map(f64::exp)))
    }

    pub fn ln(self) -> Result<Tensor<'t>> {
        self.unary("ln", Op::Ln(self.id), |a| Ok(a.map(f64::ln)))
    }

    pub fn concat_cols(self, other: Tensor<'t>) -> Result<Tensor<'t>> {
        self.binary(other, "concat_cols", Op::ConcatCols(self.id, other.id), |a, b| {
            if a.rows() != b.rows() {
                return Err(dimension(format!(
                    "concat_cols: {} rows vs {} rows",
                    a.rows(),
                    b.rows()
                )));
            }
            let cols = a.cols() + b.cols();
            let mut data = Vec::with_capacity(a.rows() * cols);
            for r in 0..a.rows() {
                data.extend_from_slice(a.row(r));
                data.extend_from_slice(b.row(r));
            }
            Matrix::from_vec(a.rows(), cols, data)
        })
    }

    pub fn concat_rows(self, other: Tensor<'t>) -> Result<Tensor<'t>> {
        self.binary(other, "concat_rows", Op::ConcatRows(self.id, other.id), |a, b| {
            if a.cols() != b.cols() {
                return Err(dimension(format!(
                    "concat_rows: {} cols vs {} cols",
                    a.cols(),
                    b.cols()
                )));
            }
            let mut data = a.data().to_vec();
            data.extend_from_slice(b.data());
            Matrix::from_vec(a.rows() + b.rows(), a.cols(), data)
        })
    }

    pub fn row_gather(self, index: &[usize]) -> Result<Tensor<'t>> {
        self.unary("row_gather", Op::RowGather(self.id, index.to_vec()), |a| {
            a.gather_rows(index)
        })
    }

    pub fn transpose(self) -> Result<Tensor<'t>> {
        self.unary("transpose", Op::Transpose(self.id), |a| Ok(a.transpose()))
    }

    pub fn log_softmax_rows(self) -> Result<Tensor<'t>> {
        self.unary("log_softmax_rows", Op::LogSoftmaxRows(self.id), |a| {
            let mut out = a.clone();
            for r in 0..out.rows() {
                let row = out.row_mut(r);
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
                row.iter_mut().for_each(|x| *x -= lse);
            }
            Ok(out)
        })
    }

    pub fn softmax_rows(self) -> Result<Tensor<'t>> {
        self.unary("softmax_rows", Op::SoftmaxRows(self.id), |a| Ok(softmax_rows(a)))
    }

    /// Row `r` of the result is the sum of message rows whose `dest` is `r`.
    pub fn segment_sum(self, dest: &[usize], num_segments: usize) -> Result<Tensor<'t>> {
        let (rows, _) = self.shape();
        if dest.len() != rows {
            return Err(validation(format!(
                "segment_sum: {} destinations for {rows} messages",
                dest.len()
            )));
        }
        if let Some(&bad) = dest.iter().find(|&&d| d >= num_segments) {
            return Err(validation(format!(
                "segment_sum: destination {bad} out of range for {num_segments} segments"
            )));
        }
        self.unary("segment_sum", Op::SegmentSum(self.id, dest.to_vec()), |a| {
            let mut out = Matrix::zeros(num_segments, a.cols());
            for (e, &d) in dest.iter().enumerate() {
                for (o, &x) in out.row_mut(d).iter_mut().zip(a.row(e)) {
                    *o += x;
                }
            }
            Ok(out)
        })
    }

    /// Softmax of a column of edge logits within each destination group.
    pub fn segment_softmax(self, dest: &[usize], num_segments: usize) -> Result<Tensor<'t>> {
        let shape = self.shape();
        column_vector("segment_softmax", shape)?;
        if dest.len() != shape.0 {
            return Err(validation(format!(
                "segment_softmax: {} destinations for {} logits",
                dest.len(),
                shape.0
            )));
        }
        if let Some(&bad) = dest.iter().find(|&&d| d >= num_segments) {
            return Err(validation(format!(
                "segment_softmax: destination {bad} out of range for {num_segments} segments"
            )));
        }
        self.unary("segment_softmax", Op::SegmentSoftmax(self.id, dest.to_vec()), |a| {
            let mut max = vec![f64::NEG_INFINITY; num_segments];
            for (e, &d) in dest.iter().enumerate() {
                max[d] = max[d].max(a.get(e, 0));
            }
            let mut total = vec![0.0; num_segments];
            let mut out = Matrix::zeros(dest.len(), 1);
            for (e, &d) in dest.iter().enumerate() {
                let v = (a.get(e, 0) - max[d]).exp();
                out.set(e, 0, v);
                total[d] += v;
            }
            for (e, &d) in dest.iter().enumerate() {
                out.set(e, 0, out.get(e, 0) / total[d]);
            }
            Ok(out)
        })
    }

    /// Multiplies row `i` by `scales[i]` where `scales` is a column vector.
    pub fn scale_rows(self, scales: Tensor<'t>) -> Result<Tensor<'t>> {
        self.binary(scales, "scale_rows", Op::ScaleRows(self.id, scales.id), |a, s| {
            if s.shape() != (a.rows(), 1) {
                return Err(dimension(format!(
                    "scale_rows: {}x{} with scales {}x{}",
                    a.rows(),
                    a.cols(),
                    s.rows(),
                    s.cols()
                )));
            }
            let mut out = a.clone();
            for r in 0..out.rows() {
                let k = s.get(r, 0);
                out.row_mut(r).iter_mut().for_each(|x| *x *= k);
            }
            Ok(out)
        })
    }

    pub fn sum(self) -> Result<Tensor<'t>> {
        self.unary("sum", Op::SumAll(self.id), |a| Ok(Matrix::filled(1, 1, a.sum())))
    }

    pub fn mean(self) -> Result<Tensor<'t>> {
        self.unary("mean", Op::MeanAll(self.id), |a| {
            if a.is_empty() {
                return Err(validation("mean of an empty tensor"));
            }
            Ok(Matrix::filled(1, 1, a.sum() / a.len() as f64))
        })
    }

    /// Per-row sums as a column vector.
    pub fn sum_rows(self) -> Result<Tensor<'t>> {
        self.unary("sum_rows", Op::SumRows(self.id), |a| {
            let sums: Vec<f64> = (0..a.rows()).map(|r| a.row(r).iter().sum()).collect();
            Ok(Matrix::column(&sums))
        })
    }

    /// Column vector holding `self[i, cols[i]]`.
    pub fn pick_per_row(self, cols: &[usize]) -> Result<Tensor<'t>> {
        let (rows, c) = self.shape();
        if cols.len() != rows {
            return Err(validation(format!(
                "pick_per_row: {} indices for {rows} rows",
                cols.len()
            )));
        }
        if let Some(&bad) = cols.iter().find(|&&k| k >= c) {
            return Err(validation(format!("pick_per_row: column {bad} out of range for {c}")));
        }
        self.unary("pick_per_row", Op::PickPerRow(self.id, cols.to_vec()), |a| {
            let picked: Vec<f64> = cols.iter().enumerate().map(|(r, &k)| a.get(r, k)).collect();
            Ok(Matrix::column(&picked))
        })
    }

    /// Order-statistic quantile of a vector tensor.
    ///
    /// Returns the `j`-th smallest entry with `j = clamp(ceil(q * k), 1, k)`,
    /// ties broken by position. The gradient flows to that one entry.
    pub fn quantile_value(self, q: f64) -> Result<Tensor<'t>> {
        let (rows, cols) = self.shape();
        if rows != 1 && cols != 1 {
            return Err(dimension(format!("quantile_value: {rows}x{cols} is not a vector")));
        }
        if rows * cols == 0 {
            return Err(validation("quantile_value of an empty vector"));
        }
        if !(q > 0.0 && q <= 1.0) {
            return Err(validation(format!("quantile level {q} outside (0, 1]")));
        }
        let selected = {
            let v = self.tape.value(self.id);
            let order = argsort_ascending(v.data());
            order[quantile_rank(q, v.len()) - 1]
        };
        self.unary("quantile_value", Op::Select(self.id, selected), |a| {
            Ok(Matrix::filled(1, 1, a.data()[selected]))
        })
    }

    /// Mean negative log-likelihood of `labels` under row-wise softmax.
    pub fn cross_entropy(self, labels: &[usize]) -> Result<Tensor<'t>> {
        let (rows, classes) = self.shape();
        if labels.len() != rows {
            return Err(validation(format!(
                "cross_entropy: {} labels for {rows} rows",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(validation(format!("label {bad} out of range for {classes} classes")));
        }
        self.log_softmax_rows()?
            .pick_per_row(labels)?
            .mean()?
            .scale(-1.0)
    }
}

pub(crate) fn softmax_rows(a: &Matrix) -> Matrix {
    let mut out = a.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            total += *x;
        }
        row.iter_mut().for_each(|x| *x /= total);
    }
    out
}
