//! Define-by-run reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Tape`] records every operation applied to [`Var`] handles. Calling
//! [`Tape::backward`] on a scalar result walks the record in reverse and
//! returns the accumulated [`Gradients`]. Tapes are meant to be short-lived:
//! one per training step.
//!
//! ```
//! use dfgp::numeric::{Tape, Tensor};
//!
//! let tape = Tape::new();
//! let x = tape.leaf(Tensor::scalar(3.0));
//! let y = x.mul(x).unwrap();
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.wrt(x).item().unwrap(), 6.0);
//! ```

use std::cell::{Ref, RefCell};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Backward rule: `(upstream gradient, input values, output value) -> one gradient per input`.
pub type BackwardFn = Box<dyn Fn(&Tensor, &[&Tensor], &Tensor) -> Result<Vec<Tensor>>>;

struct Node {
    op: &'static str,
    value: Tensor,
    inputs: Vec<usize>,
    backward: Option<BackwardFn>,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let nodes = self.tape.nodes.borrow();
        let node = &nodes[self.id];
        write!(f, "Var#{}({}, shape {:?})", self.id, node.op, node.value.shape())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Trainable input: gradients are tracked for it.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(Node {
            op: "leaf",
            value,
            inputs: Vec::new(),
            backward: None,
            requires_grad: true,
        })
    }

    /// Input that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(Node {
            op: "constant",
            value,
            inputs: Vec::new(),
            backward: None,
            requires_grad: false,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    /// Drop every recorded node and its buffers.
    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
    }

    fn push(&self, node: Node) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn check_owner(&self, var: Var<'_>) -> Result<()> {
        if !std::ptr::eq(self, var.tape) {
            return Err(Error::Tape("variable belongs to a different tape".into()));
        }
        Ok(())
    }

    /// Record a node whose forward value was computed elsewhere, with a
    /// caller-supplied backward rule. Behaves exactly like a primitive.
    pub fn custom<'t>(
        &'t self,
        op: &'static str,
        value: Tensor,
        inputs: &[Var<'t>],
        backward: BackwardFn,
    ) -> Result<Var<'t>> {
        for v in inputs {
            self.check_owner(*v)?;
        }
        self.record(op, value, inputs, backward)
    }

    fn record<'t>(
        &'t self,
        op: &'static str,
        value: Tensor,
        inputs: &[Var<'t>],
        backward: BackwardFn,
    ) -> Result<Var<'t>> {
        if !value.is_finite() {
            return Err(Error::numeric(op, "non-finite value in result"));
        }
        let requires_grad = {
            let nodes = self.nodes.borrow();
            inputs.iter().any(|v| nodes[v.id].requires_grad)
        };
        Ok(self.push(Node {
            op,
            value,
            inputs: inputs.iter().map(|v| v.id).collect(),
            backward: requires_grad.then_some(backward),
            requires_grad,
        }))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        self.check_owner(loss)?;
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if root.value.len() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        if !root.requires_grad {
            return Err(Error::Tape(
                "backward on a value that does not depend on any leaf".into(),
            ));
        }

        let mut grads: Vec<Option<Tensor>> = vec![None; nodes.len()];
        grads[loss.id] = Some(Tensor::full(root.value.shape(), 1.0));

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            let (Some(rule), Some(upstream)) = (&node.backward, grads[id].as_ref()) else {
                continue;
            };
            let input_values: Vec<&Tensor> = node.inputs.iter().map(|&i| &nodes[i].value).collect();
            let input_grads = rule(upstream, &input_values, &node.value)?;
            if input_grads.len() != node.inputs.len() {
                return Err(Error::Shape(format!(
                    "{}: backward produced {} gradients for {} inputs",
                    node.op,
                    input_grads.len(),
                    node.inputs.len()
                )));
            }
            for (&input, g) in node.inputs.iter().zip(input_grads) {
                if g.shape() != nodes[input].value.shape() {
                    return Err(Error::Shape(format!(
                        "{}: gradient shape {:?} does not match input shape {:?}",
                        node.op,
                        g.shape(),
                        nodes[input].value.shape()
                    )));
                }
                if !g.is_finite() {
                    return Err(Error::numeric(node.op, "non-finite gradient"));
                }
                if !nodes[input].requires_grad {
                    continue;
                }
                match &mut grads[input] {
                    Some(acc) => acc.add_assign(&g)?,
                    slot @ None => *slot = Some(g),
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Gradients of one backward sweep, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var<'_>) -> Option<&Tensor> {
        self.grads.get(var.id).and_then(Option::as_ref)
    }

    /// Gradient for `var`, or zeros of its shape when nothing flowed to it.
    pub fn wrt(&self, var: Var<'_>) -> Tensor {
        match self.get(var) {
            Some(g) => g.clone(),
            None => Tensor::zeros(var.value().shape()),
        }
    }
}

fn axis_split(shape: &[usize], axis: usize) -> Result<(usize, usize, usize)> {
    if axis >= shape.len() {
        return Err(Error::Shape(format!("axis {axis} out of range for shape {shape:?}")));
    }
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    Ok((outer, shape[axis], inner))
}

fn slice_values(t: &Tensor, axis: usize, start: usize, len: usize) -> Result<Tensor> {
    let (outer, dim, inner) = axis_split(t.shape(), axis)?;
    if start + len > dim {
        return Err(Error::Shape(format!(
            "slice {start}..{} out of bounds for axis {axis} of size {dim}",
            start + len
        )));
    }
    let mut out = Vec::with_capacity(outer * len * inner);
    for o in 0..outer {
        let base = o * dim * inner + start * inner;
        out.extend_from_slice(&t.data()[base..base + len * inner]);
    }
    let mut shape = t.shape().to_vec();
    shape[axis] = len;
    Tensor::new(shape, out)
}

fn unslice(g: &Tensor, full: &[usize], axis: usize, start: usize) -> Result<Tensor> {
    let (outer, dim, inner) = axis_split(full, axis)?;
    let len = g.shape()[axis];
    let mut out = Tensor::zeros(full);
    let data = out.data_mut();
    for o in 0..outer {
        let dst = o * dim * inner + start * inner;
        let src = o * len * inner;
        data[dst..dst + len * inner].copy_from_slice(&g.data()[src..src + len * inner]);
    }
    Ok(out)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    /// Borrow of the forward value. Do not hold it across further ops on the same tape.
    pub fn value_ref(&self) -> Ref<'t, Tensor> {
        Ref::map(self.tape.nodes.borrow(), |n| &n[self.id].value)
    }

    pub fn value(&self) -> Tensor {
        self.value_ref().clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value_ref().shape().to_vec()
    }

    pub fn item(&self) -> Result<f64> {
        self.value_ref().item()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    fn same_tape(&self, other: Var<'t>) -> Result<()> {
        if !std::ptr::eq(self.tape, other.tape) {
            return Err(Error::Tape("operands belong to different tapes".into()));
        }
        Ok(())
    }

    fn binary_elementwise(
        self,
        other: Var<'t>,
        op: &'static str,
        forward: impl Fn(f64, f64) -> f64,
        backward: BackwardFn,
    ) -> Result<Var<'t>> {
        self.same_tape(other)?;
        let value = {
            let a = self.value_ref();
            let b = other.value_ref();
            a.check_same_shape(&b, op)?;
            a.zip_map(&b, forward)?
        };
        self.tape.record(op, value, &[self, other], backward)
    }

    fn unary(
        self,
        op: &'static str,
        forward: impl Fn(&Tensor) -> Result<Tensor>,
        backward: BackwardFn,
    ) -> Result<Var<'t>> {
        let value = forward(&self.value_ref())?;
        self.tape.record(op, value, &[self], backward)
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary_elementwise(
            other,
            "add",
            |a, b| a + b,
            Box::new(|g, _, _| Ok(vec![g.clone(), g.clone()])),
        )
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary_elementwise(
            other,
            "sub",
            |a, b| a - b,
            Box::new(|g, _, _| Ok(vec![g.clone(), g.scaled(-1.0)])),
        )
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary_elementwise(
            other,
            "mul",
            |a, b| a * b,
            Box::new(|g, x, _| {
                Ok(vec![
                    g.zip_map(x[1], |g, b| g * b)?,
                    g.zip_map(x[0], |g, a| g * a)?,
                ])
            }),
        )
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(other)?;
        let value = self.value_ref().matmul(&other.value_ref())?;
        self.tape.record(
            "matmul",
            value,
            &[self, other],
            Box::new(|g, x, _| {
                let da = g.matmul(&x[1].transpose()?)?;
                let db = x[0].transpose()?.matmul(g)?;
                Ok(vec![da, db])
            }),
        )
    }

    pub fn scale(self, c: f64) -> Result<Var<'t>> {
        self.unary(
            "scale",
            |x| Ok(x.scaled(c)),
            Box::new(move |g, _, _| Ok(vec![g.scaled(c)])),
        )
    }

    pub fn tanh(self) -> Result<Var<'t>> {
        self.unary(
            "tanh",
            |x| Ok(x.map(f64::tanh)),
            Box::new(|g, _, y| Ok(vec![g.zip_map(y, |g, y| g * (1.0 - y * y))?])),
        )
    }

    pub fn sigmoid(self) -> Result<Var<'t>> {
        self.unary(
            "sigmoid",
            |x| Ok(x.map(sigmoid)),
            Box::new(|g, _, y| Ok(vec![g.zip_map(y, |g, y| g * y * (1.0 - y))?])),
        )
    }

    pub fn exp(self) -> Result<Var<'t>> {
        self.unary(
            "exp",
            |x| Ok(x.map(f64::exp)),
            Box::new(|g, _, y| Ok(vec![g.zip_map(y, |g, y| g * y)?])),
        )
    }

    pub fn log(self) -> Result<Var<'t>> {
        self.unary(
            "log",
            |x| Ok(x.map(f64::ln)),
            Box::new(|g, x, _| Ok(vec![g.zip_map(x[0], |g, x| g / x)?])),
        )
    }

    pub fn softplus(self) -> Result<Var<'t>> {
        self.unary(
            "softplus",
            |x| Ok(x.map(softplus)),
            Box::new(|g, x, _| Ok(vec![g.zip_map(x[0], |g, x| g * sigmoid(x))?])),
        )
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(self) -> Result<Var<'t>> {
        self.unary(
            "sum",
            |x| Ok(Tensor::scalar(x.sum())),
            Box::new(|g, x, _| Ok(vec![Tensor::full(x[0].shape(), g.item()?)])),
        )
    }

    pub fn mean(self) -> Result<Var<'t>> {
        let n = self.value_ref().len();
        if n == 0 {
            return Err(Error::Shape("mean of an empty tensor".into()));
        }
        self.unary(
            "mean",
            |x| Ok(Tensor::scalar(x.sum() / n as f64)),
            Box::new(move |g, x, _| Ok(vec![Tensor::full(x[0].shape(), g.item()? / n as f64)])),
        )
    }

    /// `len` entries starting at `start` along `axis`.
    pub fn slice(self, axis: usize, start: usize, len: usize) -> Result<Var<'t>> {
        let full = self.shape();
        self.unary(
            "slice",
            |x| slice_values(x, axis, start, len),
            Box::new(move |g, _, _| Ok(vec![unslice(g, &full, axis, start)?])),
        )
    }

    pub fn transpose(self) -> Result<Var<'t>> {
        self.unary(
            "transpose",
            Tensor::transpose,
            Box::new(|g, _, _| Ok(vec![g.transpose()?])),
        )
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t>> {
        let original = self.shape();
        self.unary(
            "reshape",
            |x| x.reshaped(shape),
            Box::new(move |g, _, _| Ok(vec![g.reshaped(&original)?])),
        )
    }

    /// Repeat a `[n]` or `[1, n]` row `rows` times into a `[rows, n]` matrix.
    pub fn tile_rows(self, rows: usize) -> Result<Var<'t>> {
        let original = self.shape();
        let n = match original.as_slice() {
            [n] | [1, n] => *n,
            other => {
                return Err(Error::Shape(format!("tile_rows needs a row vector, got {other:?}")))
            }
        };
        self.unary(
            "tile_rows",
            |x| {
                let mut data = Vec::with_capacity(rows * n);
                for _ in 0..rows {
                    data.extend_from_slice(x.data());
                }
                Tensor::matrix(rows, n, data)
            },
            Box::new(move |g, _, _| {
                let mut acc = vec![0.0; n];
                for r in 0..rows {
                    for (a, v) in acc.iter_mut().zip(&g.data()[r * n..(r + 1) * n]) {
                        *a += v;
                    }
                }
                Ok(vec![Tensor::new(original.clone(), acc)?])
            }),
        )
    }

    /// Rows `indices` of a matrix, in order; repeated indices are allowed.
    pub fn gather_rows(self, indices: &[usize]) -> Result<Var<'t>> {
        let (rows, cols) = self.value_ref().dims2()?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(Error::Shape(format!("gather_rows: row {bad} out of {rows}")));
        }
        let idx = indices.to_vec();
        let idx_fwd = idx.clone();
        self.unary(
            "gather_rows",
            move |x| {
                let mut data = Vec::with_capacity(idx_fwd.len() * cols);
                for &i in &idx_fwd {
                    data.extend_from_slice(&x.data()[i * cols..(i + 1) * cols]);
                }
                Tensor::matrix(idx_fwd.len(), cols, data)
            },
            Box::new(move |g, _, _| {
                let mut out = Tensor::zeros(&[rows, cols]);
                let data = out.data_mut();
                for (k, &i) in idx.iter().enumerate() {
                    for j in 0..cols {
                        data[i * cols + j] += g.data()[k * cols + j];
                    }
                }
                Ok(vec![out])
            }),
        )
    }

    /// Row-wise softmax of a matrix.
    pub fn softmax_rows(self) -> Result<Var<'t>> {
        self.unary(
            "softmax_rows",
            |x| {
                let (r, c) = x.dims2()?;
                let mut out = x.data().to_vec();
                for row in out.chunks_mut(c.max(1)).take(r) {
                    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut z = 0.0;
                    for v in row.iter_mut() {
                        *v = (*v - m).exp();
                        z += *v;
                    }
                    for v in row.iter_mut() {
                        *v /= z;
                    }
                }
                Tensor::matrix(r, c, out)
            },
            Box::new(|g, _, y| {
                let (r, c) = y.dims2()?;
                let mut out = vec![0.0; r * c];
                for i in 0..r {
                    let ys = &y.data()[i * c..(i + 1) * c];
                    let gs = &g.data()[i * c..(i + 1) * c];
                    let dot: f64 = ys.iter().zip(gs).map(|(a, b)| a * b).sum();
                    for j in 0..c {
                        out[i * c + j] = ys[j] * (gs[j] - dot);
                    }
                }
                Ok(vec![Tensor::matrix(r, c, out)?])
            }),
        )
    }

    /// Concatenate along `axis`; all other dimensions must agree.
    pub fn concat(parts: &[Var<'t>], axis: usize) -> Result<Var<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Shape("concat of zero tensors".into()))?;
        let tape = first.tape;
        for p in parts {
            first.same_tape(*p)?;
        }
        let shapes: Vec<Vec<usize>> = parts.iter().map(|p| p.shape()).collect();
        let base = &shapes[0];
        for s in &shapes {
            let ok = s.len() == base.len()
                && s.iter()
                    .zip(base)
                    .enumerate()
                    .all(|(k, (a, b))| k == axis || a == b);
            if !ok || axis >= s.len() {
                return Err(Error::Shape(format!(
                    "concat along axis {axis}: incompatible shapes {base:?} and {s:?}"
                )));
            }
        }
        let (outer, _, inner) = axis_split(base, axis)?;
        let lens: Vec<usize> = shapes.iter().map(|s| s[axis]).collect();
        let total: usize = lens.iter().sum();
        let mut data = Vec::with_capacity(outer * total * inner);
        {
            let values: Vec<Ref<'_, Tensor>> = parts.iter().map(|p| p.value_ref()).collect();
            for o in 0..outer {
                for (v, &len) in values.iter().zip(&lens) {
                    let start = o * len * inner;
                    data.extend_from_slice(&v.data()[start..start + len * inner]);
                }
            }
        }
        let mut shape = base.clone();
        shape[axis] = total;
        let value = Tensor::new(shape, data)?;
        tape.record(
            "concat",
            value,
            parts,
            Box::new(move |g, _, _| {
                let mut offset = 0;
                let mut out = Vec::with_capacity(lens.len());
                for &len in &lens {
                    out.push(slice_values(g, axis, offset, len)?);
                    offset += len;
                }
                Ok(out)
            }),
        )
    }
}
