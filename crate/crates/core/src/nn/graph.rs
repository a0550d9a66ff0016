//! Reverse-mode automatic differentiation over row-major `f64` matrices.
//!
//! A [`Graph`] is a tape: every operation appends a node holding its value and
//! the recipe for its backward pass. Sequences are stored time-major, so row
//! `t * batch + b` holds time step `t` of batch element `b`; a time shift of
//! `d` steps is then a row shift of `d * batch`.

use std::collections::HashMap;
use std::rc::Rc;

use ndarray::{s, Array1, Array2, Axis, Zip};

use super::params::{ParamId, ParamStore};

pub type Mat = Array2<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    MulConst(Var, Rc<Mat>),
    Sigmoid(Var),
    Tanh(Var),
    LeakyRelu(Var, f64),
    Exp(Var),
    Abs(Var),
    Square(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    ShiftRows(Var, isize),
    TileRows(Var, usize),
    SumAll(Var),
    BatchNorm {
        x: Var,
        inv_std: Array1<f64>,
    },
    LstmCell {
        gates: Var,
        c_prev: Var,
        /// Activated gates `[i | f | g | o]` followed by `tanh(c)`.
        cache: Mat,
    },
}

struct Node {
    value: Mat,
    op: Op,
    needs_grad: bool,
}

/// Gradients of a scalar w.r.t. every parameter that took part in the forward pass.
#[derive(Debug, Default)]
pub struct Gradients {
    pub by_param: HashMap<ParamId, Mat>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Mat> {
        self.by_param.get(&id)
    }

    pub fn global_norm(&self) -> f64 {
        self.by_param
            .values()
            .map(|g| g.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.by_param.values_mut() {
            g.mapv_inplace(|v| v * factor);
        }
    }
}

pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
    training: bool,
    buffer_updates: Vec<(ParamId, Mat)>,
}

impl Graph {
    pub fn new(training: bool) -> Self {
        Graph {
            nodes: Vec::with_capacity(1024),
            params: HashMap::new(),
            training,
            buffer_updates: Vec::new(),
        }
    }

    pub fn inference() -> Self {
        Self::new(false)
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.dim(), (1, 1));
        m[[0, 0]]
    }

    /// Running-statistics updates recorded by batch-norm layers in training mode.
    pub fn take_buffer_updates(&mut self) -> Vec<(ParamId, Mat)> {
        std::mem::take(&mut self.buffer_updates)
    }

    pub(crate) fn push_buffer_update(&mut self, id: ParamId, value: Mat) {
        self.buffer_updates.push((id, value));
    }

    fn push(&mut self, value: Mat, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn input(&mut self, value: Mat) -> Var {
        self.push(value, Op::Input, false)
    }

    /// Leaf for a stored parameter; repeated calls return the same node so
    /// gradients from every use accumulate in one place.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let trainable = store.is_trainable(id);
        let v = self.push(store.value(id).clone(), Op::Param(id), trainable);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(value, Op::MatMul(a, b), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        let ng = self.ng(a) || self.ng(b);
        self.push(value, Op::Add(a, b), ng)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) - self.value(b);
        let ng = self.ng(a) || self.ng(b);
        self.push(value, Op::Sub(a, b), ng)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) * self.value(b);
        let ng = self.ng(a) || self.ng(b);
        self.push(value, Op::Mul(a, b), ng)
    }

    /// `a[n, m] + row[1, m]`, broadcasting the row.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.shape(row).0, 1, "add_row expects a single row");
        let value = self.value(a) + self.value(row);
        let ng = self.ng(a) || self.ng(row);
        self.push(value, Op::AddRow(a, row), ng)
    }

    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.shape(row).0, 1, "mul_row expects a single row");
        let value = self.value(a) * self.value(row);
        let ng = self.ng(a) || self.ng(row);
        self.push(value, Op::MulRow(a, row), ng)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a) * c;
        let ng = self.ng(a);
        self.push(value, Op::Scale(a, c), ng)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a) + c;
        let ng = self.ng(a);
        self.push(value, Op::AddScalar(a), ng)
    }

    /// Elementwise product with a constant of the same shape.
    pub fn mul_const(&mut self, a: Var, c: Rc<Mat>) -> Var {
        let value = self.value(a) * &*c;
        let ng = self.ng(a);
        self.push(value, Op::MulConst(a, c), ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(sigmoid);
        let ng = self.ng(a);
        self.push(value, Op::Sigmoid(a), ng)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::tanh);
        let ng = self.ng(a);
        self.push(value, Op::Tanh(a), ng)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = self.value(a).mapv(|v| if v > 0.0 { v } else { slope * v });
        let ng = self.ng(a);
        self.push(value, Op::LeakyRelu(a, slope), ng)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::exp);
        let ng = self.ng(a);
        self.push(value, Op::Exp(a), ng)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::abs);
        let ng = self.ng(a);
        self.push(value, Op::Abs(a), ng)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|v| v * v);
        let ng = self.ng(a);
        self.push(value, Op::Square(a), ng)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("concat_cols: row mismatch");
        let value = if value.is_standard_layout() { value } else { value.as_standard_layout().into_owned() };
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push(value, Op::ConcatCols(parts.to_vec()), ng)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let value = self.value(a).slice(s![.., start..end]).to_owned();
        let ng = self.ng(a);
        self.push(value, Op::SliceCols(a, start), ng)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(0), &views).expect("concat_rows: col mismatch");
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push(value, Op::ConcatRows(parts.to_vec()), ng)
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Var {
        let value = self.value(a).slice(s![start..end, ..]).to_owned();
        let ng = self.ng(a);
        self.push(value, Op::SliceRows(a, start), ng)
    }

    /// `out[r] = a[r - k]`, zero where `r - k` falls outside the matrix.
    pub fn shift_rows(&mut self, a: Var, k: isize) -> Var {
        let value = shift_rows(self.value(a), k);
        let ng = self.ng(a);
        self.push(value, Op::ShiftRows(a, k), ng)
    }

    /// Stacks `times` copies of `a` vertically.
    pub fn tile_rows(&mut self, a: Var, times: usize) -> Var {
        let src = self.value(a);
        let views: Vec<_> = (0..times).map(|_| src.view()).collect();
        let value = ndarray::concatenate(Axis(0), &views).expect("tile_rows");
        let ng = self.ng(a);
        self.push(value, Op::TileRows(a, times), ng)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        let ng = self.ng(a);
        self.push(value, Op::SumAll(a), ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Column-wise standardization with batch statistics; returns the normalized
    /// values together with the batch mean and biased variance.
    pub fn batch_norm_train(&mut self, x: Var, eps: f64) -> (Var, Array1<f64>, Array1<f64>) {
        let xv = self.value(x);
        let n = xv.nrows() as f64;
        let mean = xv.sum_axis(Axis(0)) / n;
        let centered = xv - &mean;
        let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / n;
        let inv_std = var.mapv(|v| 1.0 / (v + eps).sqrt());
        let value = centered * &inv_std;
        let ng = self.ng(x);
        let out = self.push(value, Op::BatchNorm { x, inv_std }, ng);
        (out, mean, var)
    }

    /// One LSTM step from pre-activation gates `[i | f | g | o]` (width `4h`)
    /// and the previous cell state. Returns `[h | c]` (width `2h`).
    pub fn lstm_cell(&mut self, gates: Var, c_prev: Var) -> Var {
        let gv = self.value(gates);
        let cp = self.value(c_prev);
        let (rows, w4) = gv.dim();
        let h = w4 / 4;
        assert_eq!(cp.dim(), (rows, h), "lstm_cell: cell state shape");
        let mut cache = Array2::<f64>::zeros((rows, 5 * h));
        let mut out = Array2::<f64>::zeros((rows, 2 * h));
        for r in 0..rows {
            for j in 0..h {
                let i = sigmoid(gv[[r, j]]);
                let f = sigmoid(gv[[r, h + j]]);
                let g = gv[[r, 2 * h + j]].tanh();
                let o = sigmoid(gv[[r, 3 * h + j]]);
                let c = f * cp[[r, j]] + i * g;
                let tc = c.tanh();
                cache[[r, j]] = i;
                cache[[r, h + j]] = f;
                cache[[r, 2 * h + j]] = g;
                cache[[r, 3 * h + j]] = o;
                cache[[r, 4 * h + j]] = tc;
                out[[r, j]] = o * tc;
                out[[r, h + j]] = c;
            }
        }
        let ng = self.ng(gates) || self.ng(c_prev);
        self.push(
            out,
            Op::LstmCell {
                gates,
                c_prev,
                cache,
            },
            ng,
        )
    }

    /// Backpropagates from a scalar node, returning parameter gradients.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.shape(loss), (1, 1), "backward expects a scalar loss");
        let mut grads: Vec<Option<Mat>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Array2::ones((1, 1)));
        let mut out = Gradients::default();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let acc = |v: Var, d: Mat, grads: &mut Vec<Option<Mat>>| {
                if !self.nodes[v.0].needs_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(existing) => *existing += &d,
                    slot @ None => *slot = Some(d),
                }
            };
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    out.by_param
                        .entry(*id)
                        .and_modify(|e| *e += &g)
                        .or_insert(g);
                }
                Op::MatMul(a, b) => {
                    if self.ng(*a) {
                        acc(*a, g.dot(&self.value(*b).t()), &mut grads);
                    }
                    if self.ng(*b) {
                        acc(*b, self.value(*a).t().dot(&g), &mut grads);
                    }
                }
                Op::Add(a, b) => {
                    acc(*b, g.clone(), &mut grads);
                    acc(*a, g, &mut grads);
                }
                Op::Sub(a, b) => {
                    acc(*b, -&g, &mut grads);
                    acc(*a, g, &mut grads);
                }
                Op::Mul(a, b) => {
                    if self.ng(*a) {
                        acc(*a, &g * self.value(*b), &mut grads);
                    }
                    if self.ng(*b) {
                        acc(*b, &g * self.value(*a), &mut grads);
                    }
                }
                Op::AddRow(a, row) => {
                    if self.ng(*row) {
                        acc(*row, g.sum_axis(Axis(0)).insert_axis(Axis(0)), &mut grads);
                    }
                    acc(*a, g, &mut grads);
                }
                Op::MulRow(a, row) => {
                    if self.ng(*row) {
                        let d = (&g * self.value(*a)).sum_axis(Axis(0)).insert_axis(Axis(0));
                        acc(*row, d, &mut grads);
                    }
                    if self.ng(*a) {
                        acc(*a, &g * self.value(*row), &mut grads);
                    }
                }
                Op::Scale(a, c) => acc(*a, g * *c, &mut grads),
                Op::AddScalar(a) => acc(*a, g, &mut grads),
                Op::MulConst(a, c) => acc(*a, g * &**c, &mut grads),
                Op::Sigmoid(a) => {
                    let mut d = g;
                    Zip::from(&mut d)
                        .and(&node.value)
                        .for_each(|d, &y| *d *= y * (1.0 - y));
                    acc(*a, d, &mut grads);
                }
                Op::Tanh(a) => {
                    let mut d = g;
                    Zip::from(&mut d)
                        .and(&node.value)
                        .for_each(|d, &y| *d *= 1.0 - y * y);
                    acc(*a, d, &mut grads);
                }
                Op::LeakyRelu(a, slope) => {
                    let mut d = g;
                    Zip::from(&mut d)
                        .and(self.value(*a))
                        .for_each(|d, &x| {
                            if x <= 0.0 {
                                *d *= slope
                            }
                        });
                    acc(*a, d, &mut grads);
                }
                Op::Exp(a) => acc(*a, g * &node.value, &mut grads),
                Op::Abs(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(self.value(*a)).for_each(|d, &x| {
                        *d *= if x > 0.0 {
                            1.0
                        } else if x < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    });
                    acc(*a, d, &mut grads);
                }
                Op::Square(a) => {
                    let d = g * self.value(*a) * 2.0;
                    acc(*a, d, &mut grads);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.shape(p).1;
                        if self.ng(p) {
                            acc(p, g.slice(s![.., start..start + w]).to_owned(), &mut grads);
                        }
                        start += w;
                    }
                }
                Op::SliceCols(a, start) => {
                    if self.ng(*a) {
                        let mut d = Array2::zeros(self.shape(*a));
                        let w = g.ncols();
                        d.slice_mut(s![.., *start..*start + w]).assign(&g);
                        acc(*a, d, &mut grads);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let h = self.shape(p).0;
                        if self.ng(p) {
                            acc(p, g.slice(s![start..start + h, ..]).to_owned(), &mut grads);
                        }
                        start += h;
                    }
                }
                Op::SliceRows(a, start) => {
                    if self.ng(*a) {
                        let mut d = Array2::zeros(self.shape(*a));
                        let h = g.nrows();
                        d.slice_mut(s![*start..*start + h, ..]).assign(&g);
                        acc(*a, d, &mut grads);
                    }
                }
                Op::ShiftRows(a, k) => acc(*a, shift_rows(&g, -*k), &mut grads),
                Op::TileRows(a, times) => {
                    let rows = self.shape(*a).0;
                    let mut d = Array2::zeros(self.shape(*a));
                    for t in 0..*times {
                        d += &g.slice(s![t * rows..(t + 1) * rows, ..]);
                    }
                    acc(*a, d, &mut grads);
                }
                Op::SumAll(a) => {
                    let d = Array2::from_elem(self.shape(*a), g[[0, 0]]);
                    acc(*a, d, &mut grads);
                }
                Op::BatchNorm { x, inv_std } => {
                    let xhat = &node.value;
                    let n = xhat.nrows() as f64;
                    let sum_g = g.sum_axis(Axis(0));
                    let sum_gx = (&g * xhat).sum_axis(Axis(0));
                    let d = ((&g * n - &sum_g) - xhat * &sum_gx) * &(inv_std / n);
                    acc(*x, d, &mut grads);
                }
                Op::LstmCell {
                    gates,
                    c_prev,
                    cache,
                } => {
                    let (rows, w2) = g.dim();
                    let h = w2 / 2;
                    let cp = self.value(*c_prev);
                    let mut dgates = Array2::<f64>::zeros((rows, 4 * h));
                    let mut dcp = Array2::<f64>::zeros((rows, h));
                    for r in 0..rows {
                        for j in 0..h {
                            let i = cache[[r, j]];
                            let f = cache[[r, h + j]];
                            let gg = cache[[r, 2 * h + j]];
                            let o = cache[[r, 3 * h + j]];
                            let tc = cache[[r, 4 * h + j]];
                            let dh = g[[r, j]];
                            let dc = g[[r, h + j]] + dh * o * (1.0 - tc * tc);
                            dgates[[r, j]] = dc * gg * i * (1.0 - i);
                            dgates[[r, h + j]] = dc * cp[[r, j]] * f * (1.0 - f);
                            dgates[[r, 2 * h + j]] = dc * i * (1.0 - gg * gg);
                            dgates[[r, 3 * h + j]] = dh * tc * o * (1.0 - o);
                            dcp[[r, j]] = dc * f;
                        }
                    }
                    acc(*gates, dgates, &mut grads);
                    acc(*c_prev, dcp, &mut grads);
                }
            }
        }
        out
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn shift_rows(a: &Mat, k: isize) -> Mat {
    let n = a.nrows() as isize;
    let mut out = Array2::zeros(a.dim());
    if k.abs() >= n {
        return out;
    }
    if k >= 0 {
        let k = k as usize;
        out.slice_mut(s![k.., ..])
            .assign(&a.slice(s![..(n as usize - k), ..]));
    } else {
        let k = (-k) as usize;
        out.slice_mut(s![..(n as usize - k), ..])
            .assign(&a.slice(s![k.., ..]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Central-difference check of d(sum(f(x)))/dx for a unary graph builder.
    fn check_unary(x0: Mat, build: impl Fn(&mut Graph, Var) -> Var) {
        let mut store = ParamStore::new();
        let id = store.add("x", x0.clone(), true);
        let mut g = Graph::new(true);
        let x = g.param(&store, id);
        let y = build(&mut g, x);
        let l = g.sum(y);
        let grads = g.backward(l);
        let analytic = grads.get(id).unwrap().clone();
        let h = 1e-6;
        for idx in 0..x0.len() {
            let (r, c) = (idx / x0.ncols(), idx % x0.ncols());
            let eval = |delta: f64| {
                let mut s2 = store.clone();
                s2.value_mut(id)[[r, c]] += delta;
                let mut g = Graph::new(true);
                let x = g.param(&s2, id);
                let y = build(&mut g, x);
                let l = g.sum(y);
                g.scalar(l)
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            let a = analytic[[r, c]];
            assert!(
                (a - numeric).abs() <= 1e-6 * (1.0 + numeric.abs()),
                "grad mismatch at {idx}: analytic {a}, numeric {numeric}"
            );
        }
    }

    fn sample() -> Mat {
        array![[0.3, -1.2, 0.7], [1.1, 0.4, -0.5], [-0.8, 0.9, 0.2], [0.05, -0.3, 1.4]]
    }

    #[test]
    fn elementwise_gradients() {
        check_unary(sample(), |g, x| g.tanh(x));
        check_unary(sample(), |g, x| g.sigmoid(x));
        check_unary(sample(), |g, x| g.exp(x));
        check_unary(sample(), |g, x| g.leaky_relu(x, 0.2));
        check_unary(sample(), |g, x| g.square(x));
        check_unary(sample(), |g, x| g.abs(x));
    }

    #[test]
    fn structural_gradients() {
        check_unary(sample(), |g, x| {
            let a = g.slice_cols(x, 1, 3);
            let b = g.shift_rows(a, 1);
            let c = g.shift_rows(x, -2);
            let d = g.concat_cols(&[b, c]);
            let e = g.tile_rows(d, 2);
            let f = g.slice_rows(e, 2, 7);
            g.square(f)
        });
        check_unary(sample(), |g, x| {
            let w = g.input(array![[0.5, -0.2], [0.1, 0.3], [-0.7, 0.6]]);
            let y = g.matmul(x, w);
            let r = g.slice_rows(x, 0, 1);
            let r = g.slice_cols(r, 0, 2);
            let z = g.mul_row(y, r);
            let z = g.add_row(z, r);
            g.tanh(z)
        });
    }

    #[test]
    fn batch_norm_gradient() {
        check_unary(sample(), |g, x| {
            let (y, _, _) = g.batch_norm_train(x, 1e-5);
            let w = g.input(array![[1.0, 2.0, -1.0], [0.5, 0.1, 3.0], [-2.0, 1.0, 0.2], [0.3, 0.3, 0.3]]);
            g.mul(y, w)
        });
    }

    #[test]
    fn lstm_cell_gradient() {
        let gates = Array2::from_shape_fn((2, 8), |(r, c)| ((r * 8 + c) as f64 * 0.37).sin());
        check_unary(gates, |g, x| {
            let c0 = g.input(array![[0.2, -0.4], [0.7, 0.1]]);
            let hc = g.lstm_cell(x, c0);
            let w = g.input(array![[1.0, -2.0, 0.5, 1.5], [0.3, 0.8, -1.0, 2.0]]);
            g.mul(hc, w)
        });
        let c0 = array![[0.2, -0.4], [0.7, 0.1]];
        check_unary(c0, |g, c| {
            let gates = g.input(Array2::from_shape_fn((2, 8), |(r, k)| ((r + k) as f64 * 0.3).cos()));
            let hc = g.lstm_cell(gates, c);
            g.square(hc)
        });
    }

    #[test]
    fn shift_rows_pads_with_zeros() {
        let a = array![[1.0], [2.0], [3.0]];
        assert_eq!(shift_rows(&a, 1), array![[0.0], [1.0], [2.0]]);
        assert_eq!(shift_rows(&a, -1), array![[2.0], [3.0], [0.0]]);
        assert_eq!(shift_rows(&a, 5), array![[0.0], [0.0], [0.0]]);
    }
}
