//! Reverse-mode automatic differentiation over dense 2-D arrays.
//!
//! A [`Tape`] records every forward operation as a node holding its value.
//! [`Tape::backward`] walks the nodes in reverse creation order, which is a
//! valid topological order because inputs always precede their consumers.

use std::borrow::Cow;
use std::collections::BTreeMap;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis, Zip};

use super::rng::Rng;
use super::tensor::ParameterSet;
use super::NumError;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Sparse row recipe for [`Tape::gather`]: output row `i` is
/// `sum(w * table[j])` over the `(j, w)` pairs in `rows[i]`.
pub type RowRecipe = Vec<(usize, f64)>;

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    AddConst(Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    RowSoftmax(Var),
    Normalize { x: Var, inv_std: Vec<f64> },
    Dropout { x: Var, mask: Array2<f64> },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    SumRows(Var),
    MeanRows(Var),
    Transpose(Var),
    Gather { table: Var, rows: Vec<RowRecipe> },
    SumAll(Var),
    MeanAll(Var),
    Cosine(Var, Var),
}

struct Node<'a> {
    value: Cow<'a, Array2<f64>>,
    op: Op,
    needs_grad: bool,
}

pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
    leaf_grads: BTreeMap<usize, Array2<f64>>,
    params: BTreeMap<String, Var>,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_of(a: &Array2<f64>) -> Vec<usize> {
    vec![a.nrows(), a.ncols()]
}

fn mismatch(op: &'static str, a: &Array2<f64>, b: &Array2<f64>) -> NumError {
    NumError::ShapeMismatch {
        op,
        left: shape_of(a),
        right: shape_of(b),
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            leaf_grads: BTreeMap::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a leaf. `requires_grad` leaves receive gradients on backward.
    pub fn leaf(&mut self, value: Array2<f64>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op: Op::Leaf,
            needs_grad: requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.leaf(value, false)
    }

    /// Binds a named parameter as a differentiable leaf, borrowing its data.
    /// Binding the same name twice yields the same handle.
    pub fn param(&mut self, params: &'a ParameterSet, name: &str) -> Result<Var, NumError> {
        if let Some(&v) = self.params.get(name) {
            return Ok(v);
        }
        let t = params.get(name)?;
        self.nodes.push(Node {
            value: Cow::Borrowed(&t.data),
            op: Op::Leaf,
            needs_grad: t.requires_grad,
        });
        let v = Var(self.nodes.len() - 1);
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        let a = self.value(v);
        [a.nrows(), a.ncols()]
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[[0, 0]]
    }

    /// Accumulated gradient of a leaf, if backward has reached it.
    pub fn grad(&self, v: Var) -> Option<&Array2<f64>> {
        self.leaf_grads.get(&v.0)
    }

    /// Gradients of bound parameters, keyed by parameter name.
    pub fn param_grads(&self) -> BTreeMap<String, Array2<f64>> {
        self.params
            .iter()
            .filter_map(|(name, v)| self.leaf_grads.get(&v.0).map(|g| (name.clone(), g.clone())))
            .collect()
    }

    pub fn bound_params(&self) -> impl Iterator<Item = (&str, Var)> {
        self.params.iter().map(|(k, v)| (k.as_str(), *v))
    }

    // ---- forward ops -------------------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.ncols() != vb.nrows() {
            return Err(mismatch("matmul", va, vb));
        }
        let out = va.dot(vb);
        Ok(self.push(out, Op::MatMul(a, b), &[a, b]))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), NumError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.dim() != vb.dim() {
            return Err(mismatch(op, va, vb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        self.same_shape("add", a, b)?;
        let out = self.value(a) + self.value(b);
        Ok(self.push(out, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a) - self.value(b);
        Ok(self.push(out, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a) * self.value(b);
        Ok(self.push(out, Op::Mul(a, b), &[a, b]))
    }

    fn row_operand(&self, op: &'static str, x: Var, row: Var) -> Result<(), NumError> {
        let (vx, vr) = (self.value(x), self.value(row));
        if vr.nrows() != 1 || vr.ncols() != vx.ncols() {
            return Err(mismatch(op, vx, vr));
        }
        Ok(())
    }

    /// `x + row` with `row` (1 x c) broadcast over every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var, NumError> {
        self.row_operand("add_row", x, row)?;
        let out = self.value(x) + self.value(row);
        Ok(self.push(out, Op::AddRow(x, row), &[x, row]))
    }

    /// `x * row` elementwise with `row` (1 x c) broadcast over rows.
    pub fn mul_row(&mut self, x: Var, row: Var) -> Result<Var, NumError> {
        self.row_operand("mul_row", x, row)?;
        let out = self.value(x) * self.value(row);
        Ok(self.push(out, Op::MulRow(x, row), &[x, row]))
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Var {
        let out = self.value(x) * k;
        self.push(out, Op::Scale(x, k), &[x])
    }

    pub fn add_scalar(&mut self, x: Var, k: f64) -> Var {
        let out = self.value(x) + k;
        self.push(out, Op::AddScalar(x), &[x])
    }

    /// Adds a constant array (e.g. an attention mask of 0 / -inf entries).
    pub fn add_const(&mut self, x: Var, c: &Array2<f64>) -> Result<Var, NumError> {
        let vx = self.value(x);
        if vx.dim() != c.dim() {
            return Err(mismatch("add_const", vx, c));
        }
        let out = vx + c;
        Ok(self.push(out, Op::AddConst(x), &[x]))
    }

    /// Which side of zero every recorded relu input sits on, in tape order.
    /// Two evaluations with equal patterns lie in the same smooth piece.
    pub fn kink_pattern(&self) -> Vec<bool> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(x) => Some(self.nodes[x.0].value.iter().map(|&v| v > 0.0).collect::<Vec<_>>()),
                _ => None,
            })
            .flatten()
            .collect()
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(|v| v.max(0.0));
        self.push(out, Op::Relu(x), &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(sigmoid);
        self.push(out, Op::Sigmoid(x), &[x])
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(f64::tanh);
        self.push(out, Op::Tanh(x), &[x])
    }

    /// Softmax over each row with max subtraction. Entries equal to -inf get
    /// probability zero; every row needs at least one finite entry.
    pub fn row_softmax(&mut self, x: Var) -> Var {
        let out = row_softmax(self.value(x).view());
        self.push(out, Op::RowSoftmax(x), &[x])
    }

    /// Normalizes each row to zero mean and unit variance (population
    /// variance, epsilon inside the square root). No gain or bias.
    pub fn normalize_rows(&mut self, x: Var) -> Var {
        let vx = self.value(x);
        let c = vx.ncols() as f64;
        let mut out = vx.clone().into_owned();
        let mut inv_std = Vec::with_capacity(vx.nrows());
        for mut row in out.rows_mut() {
            let mean = row.sum() / c;
            row.mapv_inplace(|v| v - mean);
            let var = row.iter().map(|v| v * v).sum::<f64>() / c;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            row.mapv_inplace(|v| v * is);
            inv_std.push(is);
        }
        self.push(out, Op::Normalize { x, inv_std }, &[x])
    }

    /// Row-wise layer normalization followed by a learnable gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var, NumError> {
        let n = self.normalize_rows(x);
        let g = self.mul_row(n, gain)?;
        self.add_row(g, bias)
    }

    /// Inverted dropout. Identity in eval mode or when `p == 0`.
    pub fn dropout(&mut self, x: Var, p: f64, mode: Mode, rng: &mut Rng) -> Var {
        if mode == Mode::Eval || p <= 0.0 {
            return x;
        }
        let keep = 1.0 / (1.0 - p);
        let (r, c) = self.value(x).dim();
        let mask = Array2::from_shape_simple_fn((r, c), || if rng.uniform() < p { 0.0 } else { keep });
        let out = self.value(x) * &mask;
        self.push(out, Op::Dropout { x, mask }, &[x])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NumError> {
        let views: Vec<ArrayView2<f64>> = parts.iter().map(|v| self.value(*v).view()).collect();
        let out = concatenate(Axis(1), &views).map_err(|_| NumError::ShapeMismatch {
            op: "concat_cols",
            left: parts.iter().map(|v| self.shape(*v)[0]).collect(),
            right: parts.iter().map(|v| self.shape(*v)[1]).collect(),
        })?;
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), parts))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NumError> {
        let views: Vec<ArrayView2<f64>> = parts.iter().map(|v| self.value(*v).view()).collect();
        let out = concatenate(Axis(0), &views).map_err(|_| NumError::ShapeMismatch {
            op: "concat_rows",
            left: parts.iter().map(|v| self.shape(*v)[0]).collect(),
            right: parts.iter().map(|v| self.shape(*v)[1]).collect(),
        })?;
        Ok(self.push(out, Op::ConcatRows(parts.to_vec()), parts))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var, NumError> {
        let vx = self.value(x);
        if start >= end || end > vx.ncols() {
            return Err(NumError::ShapeMismatch {
                op: "slice_cols",
                left: shape_of(vx),
                right: vec![start, end],
            });
        }
        let out = vx.slice(s![.., start..end]).to_owned();
        Ok(self.push(out, Op::SliceCols(x, start), &[x]))
    }

    /// Rows `start..end`.
    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var, NumError> {
        let vx = self.value(x);
        if start >= end || end > vx.nrows() {
            return Err(NumError::ShapeMismatch {
                op: "slice_rows",
                left: shape_of(vx),
                right: vec![start, end],
            });
        }
        let out = vx.slice(s![start..end, ..]).to_owned();
        Ok(self.push(out, Op::SliceRows(x, start), &[x]))
    }

    /// Sum over rows: (n x c) -> (1 x c).
    pub fn sum_rows(&mut self, x: Var) -> Var {
        let out = self.value(x).sum_axis(Axis(0)).insert_axis(Axis(0));
        self.push(out, Op::SumRows(x), &[x])
    }

    /// Mean over rows: (n x c) -> (1 x c).
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let vx = self.value(x);
        let n = vx.nrows() as f64;
        let out = (vx.sum_axis(Axis(0)) / n).insert_axis(Axis(0));
        self.push(out, Op::MeanRows(x), &[x])
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let out = self.value(x).t().to_owned();
        self.push(out, Op::Transpose(x), &[x])
    }

    /// Weighted row gather from an embedding table.
    pub fn gather(&mut self, table: Var, rows: Vec<RowRecipe>) -> Result<Var, NumError> {
        let vt = self.value(table);
        let (nt, c) = vt.dim();
        let mut out = Array2::zeros((rows.len(), c));
        for (i, recipe) in rows.iter().enumerate() {
            for &(j, w) in recipe {
                if j >= nt {
                    return Err(NumError::IndexOutOfRange { index: j, len: nt });
                }
                out.row_mut(i).scaled_add(w, &vt.row(j));
            }
        }
        Ok(self.push(out, Op::Gather { table, rows }, &[table]))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let out = Array2::from_elem((1, 1), self.value(x).sum());
        self.push(out, Op::SumAll(x), &[x])
    }

    pub fn mean_all(&mut self, x: Var) -> Var {
        let vx = self.value(x);
        let out = Array2::from_elem((1, 1), vx.sum() / vx.len() as f64);
        self.push(out, Op::MeanAll(x), &[x])
    }

    /// Cosine similarity of two `1 x n` rows, as a `1 x 1` value.
    pub fn cosine(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        self.same_shape("cosine", a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        if va.nrows() != 1 {
            return Err(mismatch("cosine", va, vb));
        }
        let na = va.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na < super::ZERO_NORM || nb < super::ZERO_NORM {
            return Err(NumError::ZeroVector);
        }
        let dot = Zip::from(va).and(vb).fold(0.0, |acc, x, y| acc + x * y);
        let out = Array2::from_elem((1, 1), dot / (na * nb));
        Ok(self.push(out, Op::Cosine(a, b), &[a, b]))
    }

    // ---- backward ----------------------------------------------------------

    /// Back-propagates from a scalar `loss`. Leaf gradients accumulate
    /// across calls.
    pub fn backward(&mut self, loss: Var) -> Result<(), NumError> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(NumError::NotScalar(shape_of(lv)));
        }
        let mut grads: Vec<Option<Array2<f64>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Array2::ones((1, 1)));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                match self.leaf_grads.get_mut(&i) {
                    Some(acc) => *acc += &g,
                    None => {
                        self.leaf_grads.insert(i, g);
                    }
                }
                continue;
            }
            for (input, contrib) in self.local_grads(i, &g) {
                if !self.nodes[input.0].needs_grad {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => *acc += &contrib,
                    slot @ None => *slot = Some(contrib),
                }
            }
        }
        Ok(())
    }

    fn local_grads(&self, i: usize, g: &Array2<f64>) -> Vec<(Var, Array2<f64>)> {
        let node = &self.nodes[i];
        let out = &*node.value;
        let val = |v: Var| -> &Array2<f64> { self.value(v) };
        let wants = |v: Var| self.nodes[v.0].needs_grad;
        match &node.op {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b) => {
                let mut r = Vec::with_capacity(2);
                if wants(*a) {
                    r.push((*a, g.dot(&val(*b).t())));
                }
                if wants(*b) {
                    r.push((*b, val(*a).t().dot(g)));
                }
                r
            }
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Sub(a, b) => vec![(*a, g.clone()), (*b, -g)],
            Op::Mul(a, b) => vec![(*a, g * val(*b)), (*b, g * val(*a))],
            Op::AddRow(x, row) => vec![
                (*x, g.clone()),
                (*row, g.sum_axis(Axis(0)).insert_axis(Axis(0))),
            ],
            Op::MulRow(x, row) => {
                let gx = g * val(*row);
                let grow = (g * val(*x)).sum_axis(Axis(0)).insert_axis(Axis(0));
                vec![(*x, gx), (*row, grow)]
            }
            Op::Scale(x, k) => vec![(*x, g * *k)],
            Op::AddScalar(x) | Op::AddConst(x) => vec![(*x, g.clone())],
            Op::Relu(x) => {
                let mut gx = g.clone();
                Zip::from(&mut gx)
                    .and(val(*x))
                    .for_each(|d, &v| if v <= 0.0 { *d = 0.0 });
                vec![(*x, gx)]
            }
            Op::Sigmoid(x) => {
                let gx = Zip::from(g).and(out).map_collect(|&d, &y| d * y * (1.0 - y));
                vec![(*x, gx)]
            }
            Op::Tanh(x) => {
                let gx = Zip::from(g).and(out).map_collect(|&d, &y| d * (1.0 - y * y));
                vec![(*x, gx)]
            }
            Op::RowSoftmax(x) => {
                let mut gx = g * out;
                for (mut grow, yrow) in gx.rows_mut().into_iter().zip(out.rows()) {
                    let dot: f64 = grow.sum();
                    Zip::from(&mut grow).and(&yrow).for_each(|d, &y| *d -= y * dot);
                }
                vec![(*x, gx)]
            }
            Op::Normalize { x, inv_std } => {
                let c = out.ncols() as f64;
                let mut gx = Array2::zeros(out.dim());
                for (r, ((mut dst, grow), yrow)) in gx
                    .rows_mut()
                    .into_iter()
                    .zip(g.rows())
                    .zip(out.rows())
                    .enumerate()
                {
                    let mean_g = grow.sum() / c;
                    let mean_gy = grow.dot(&yrow) / c;
                    let is = inv_std[r];
                    Zip::from(&mut dst)
                        .and(&grow)
                        .and(&yrow)
                        .for_each(|d, &dg, &y| *d = is * (dg - mean_g - y * mean_gy));
                }
                vec![(*x, gx)]
            }
            Op::Dropout { x, mask } => vec![(*x, g * mask)],
            Op::ConcatCols(parts) => {
                let mut start = 0;
                parts
                    .iter()
                    .map(|p| {
                        let w = val(*p).ncols();
                        let piece = g.slice(s![.., start..start + w]).to_owned();
                        start += w;
                        (*p, piece)
                    })
                    .collect()
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                parts
                    .iter()
                    .map(|p| {
                        let h = val(*p).nrows();
                        let piece = g.slice(s![start..start + h, ..]).to_owned();
                        start += h;
                        (*p, piece)
                    })
                    .collect()
            }
            Op::SliceCols(x, start) => {
                let mut gx = Array2::zeros(val(*x).dim());
                gx.slice_mut(s![.., *start..*start + g.ncols()]).assign(g);
                vec![(*x, gx)]
            }
            Op::SliceRows(x, start) => {
                let mut gx = Array2::zeros(val(*x).dim());
                gx.slice_mut(s![*start..*start + g.nrows(), ..]).assign(g);
                vec![(*x, gx)]
            }
            Op::SumRows(x) => {
                let n = val(*x).nrows();
                vec![(*x, g.broadcast((n, g.ncols())).unwrap().to_owned())]
            }
            Op::MeanRows(x) => {
                let n = val(*x).nrows();
                vec![(*x, g.broadcast((n, g.ncols())).unwrap().to_owned() / n as f64)]
            }
            Op::Transpose(x) => vec![(*x, g.t().to_owned())],
            Op::Gather { table, rows } => {
                let mut gt = Array2::zeros(val(*table).dim());
                for (i, recipe) in rows.iter().enumerate() {
                    for &(j, w) in recipe {
                        gt.row_mut(j).scaled_add(w, &g.row(i));
                    }
                }
                vec![(*table, gt)]
            }
            Op::SumAll(x) => vec![(*x, Array2::from_elem(val(*x).dim(), g[[0, 0]]))],
            Op::MeanAll(x) => {
                let vx = val(*x);
                vec![(*x, Array2::from_elem(vx.dim(), g[[0, 0]] / vx.len() as f64))]
            }
            Op::Cosine(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                let s = out[[0, 0]];
                let na2: f64 = va.iter().map(|x| x * x).sum();
                let nb2: f64 = vb.iter().map(|x| x * x).sum();
                let inv = 1.0 / (na2.sqrt() * nb2.sqrt());
                let d = g[[0, 0]];
                let ga = (vb * inv - va * (s / na2)) * d;
                let gb = (va * inv - vb * (s / nb2)) * d;
                vec![(*a, ga), (*b, gb)]
            }
        }
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Max-subtracted row softmax on a plain array.
pub fn row_softmax(x: ArrayView2<f64>) -> Array2<f64> {
    let mut out = x.to_owned();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}
