//! Tape-based reverse-mode differentiation over [`Matrix`] values.
//!
//! Every operation appends a node holding its forward value; [`Graph::backward`]
//! walks the tape in reverse from one or more seeded outputs. The op set is the
//! one the encoders need, nothing more.

use crate::model::attention::{rotate_pairs, softmax_in_place};
use crate::tensor::{dot, Matrix};

const LN_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulT(Var, Var),
    Add(Var, Var),
    /// `x + b` with `b` a `1 x cols` row broadcast over rows.
    AddRow(Var, Var),
    Scale(Var, f64),
    /// `offset + s * c` for a `1 x 1` variable `s` and constant `c`.
    ScalarTimes { s: Var, c: Matrix },
    /// Row `i` of `x` times `s[i]`, with `s` a column vector.
    RowScale(Var, Var),
    SoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Matrix,
        inv_std: Vec<f64>,
    },
    Gelu(Var),
    Softplus(Var),
    Sigmoid(Var),
    ColSlice(Var, usize),
    ConcatCols(Vec<Var>),
    /// Rotation of consecutive channel pairs of row `i` by `phases[i]`.
    Rotate(Var, Vec<f64>),
    MeanRows(Var),
    L2NormalizeRows(Var),
}

struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn inverse_softplus(y: f64) -> f64 {
    y + (-(-y).exp_m1()).ln()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul_t(self.value(b));
        self.push(v, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    pub fn add_row(&mut self, x: Var, b: Var) -> Var {
        let bias = self.value(b);
        assert_eq!(bias.rows(), 1, "add_row expects a row vector");
        let mut v = self.value(x).clone();
        for r in 0..v.rows() {
            for (o, bb) in v.row_mut(r).iter_mut().zip(bias.as_slice()) {
                *o += bb;
            }
        }
        self.push(v, Op::AddRow(x, b))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let v = self.value(x).scale(s);
        self.push(v, Op::Scale(x, s))
    }

    /// `offset + s * c` for a scalar variable `s`.
    pub fn scalar_times(&mut self, s: Var, c: Matrix, offset: f64) -> Var {
        let sv = self.value(s).get(0, 0);
        let v = c.map(|x| offset + sv * x);
        self.push(v, Op::ScalarTimes { s, c })
    }

    pub fn row_scale(&mut self, x: Var, s: Var) -> Var {
        let sv = self.value(s);
        let mut v = self.value(x).clone();
        assert_eq!(sv.shape(), (v.rows(), 1), "row_scale expects a column vector");
        for r in 0..v.rows() {
            let k = sv.get(r, 0);
            v.row_mut(r).iter_mut().for_each(|o| *o *= k);
        }
        self.push(v, Op::RowScale(x, s))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let mut v = self.value(x).clone();
        for r in 0..v.rows() {
            softmax_in_place(v.row_mut(r));
        }
        self.push(v, Op::SoftmaxRows(x))
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let xv = self.value(x);
        let (n, d) = xv.shape();
        let mut xhat = Matrix::zeros(n, d);
        let mut inv_std = Vec::with_capacity(n);
        for r in 0..n {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            for (o, v) in xhat.row_mut(r).iter_mut().zip(row) {
                *o = (v - mean) * is;
            }
            inv_std.push(is);
        }
        let g = self.value(gamma).as_slice();
        let b = self.value(beta).as_slice();
        let mut y = xhat.clone();
        for r in 0..n {
            for ((o, gg), bb) in y.row_mut(r).iter_mut().zip(g).zip(b) {
                *o = *o * gg + bb;
            }
        }
        self.push(
            y,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        )
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let v = self.value(x).map(gelu);
        self.push(v, Op::Gelu(x))
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        let v = self.value(x).map(softplus);
        self.push(v, Op::Softplus(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.value(x).map(sigmoid);
        self.push(v, Op::Sigmoid(x))
    }

    pub fn col_slice(&mut self, x: Var, start: usize, len: usize) -> Var {
        let xv = self.value(x);
        let mut v = Matrix::zeros(xv.rows(), len);
        for r in 0..xv.rows() {
            v.row_mut(r).copy_from_slice(&xv.row(r)[start..start + len]);
        }
        self.push(v, Op::ColSlice(x, start))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut v = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut c = 0;
            for p in parts {
                let src = self.value(*p).row(r);
                v.row_mut(r)[c..c + src.len()].copy_from_slice(src);
                c += src.len();
            }
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn rotate(&mut self, x: Var, phases: Vec<f64>) -> Var {
        let mut v = self.value(x).clone();
        assert_eq!(phases.len(), v.rows());
        for (r, &phi) in phases.iter().enumerate() {
            rotate_pairs(v.row_mut(r), phi);
        }
        self.push(v, Op::Rotate(x, phases))
    }

    pub fn mean_rows(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let mut v = Matrix::zeros(1, xv.cols());
        for r in 0..xv.rows() {
            for (o, x) in v.row_mut(0).iter_mut().zip(xv.row(r)) {
                *o += x;
            }
        }
        let n = xv.rows() as f64;
        v.as_mut_slice().iter_mut().for_each(|o| *o /= n);
        self.push(v, Op::MeanRows(x))
    }

    pub fn l2_normalize_rows(&mut self, x: Var) -> Var {
        let mut v = self.value(x).clone();
        for r in 0..v.rows() {
            let row = v.row_mut(r);
            let norm = dot(row, row).sqrt();
            row.iter_mut().for_each(|o| *o /= norm);
        }
        self.push(v, Op::L2NormalizeRows(x))
    }

    /// Reverse pass seeded with `d loss / d output` for each listed output.
    /// Returns the gradient of every node (None where nothing flowed).
    pub fn backward(&self, seeds: &[(Var, Matrix)]) -> Gradients {
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        for (v, g) in seeds {
            accumulate(&mut grads, *v, g.clone());
        }
        for i in (0..self.nodes.len()).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.value(*b));
                    let gb = self.value(*a).t_matmul(&g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::MatMulT(a, b) => {
                    let ga = g.matmul(self.value(*b));
                    let gb = g.t_matmul(self.value(*a));
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::AddRow(x, b) => {
                    let mut gb = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, v) in gb.row_mut(0).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *x, g);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(x, s) => accumulate(&mut grads, *x, g.scale(*s)),
                Op::ScalarTimes { s, c } => {
                    let gs = dot(g.as_slice(), c.as_slice());
                    accumulate(&mut grads, *s, Matrix::scalar(gs));
                }
                Op::RowScale(x, s) => {
                    let xv = self.value(*x);
                    let sv = self.value(*s);
                    let mut gx = g.clone();
                    let mut gs = Matrix::zeros(sv.rows(), 1);
                    for r in 0..g.rows() {
                        gs.set(r, 0, dot(g.row(r), xv.row(r)));
                        let k = sv.get(r, 0);
                        gx.row_mut(r).iter_mut().for_each(|o| *o *= k);
                    }
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *s, gs);
                }
                Op::SoftmaxRows(x) => {
                    let y = &node.value;
                    let mut gx = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let inner = dot(g.row(r), y.row(r));
                        for ((o, gg), yy) in gx.row_mut(r).iter_mut().zip(g.row(r)).zip(y.row(r)) {
                            *o = yy * (gg - inner);
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let gv = self.value(*gamma).as_slice();
                    let (n, d) = g.shape();
                    let mut gx = Matrix::zeros(n, d);
                    let mut ggamma = Matrix::zeros(1, d);
                    let mut gbeta = Matrix::zeros(1, d);
                    for r in 0..n {
                        let gr = g.row(r);
                        let xh = xhat.row(r);
                        let dxhat: Vec<f64> = gr.iter().zip(gv).map(|(a, b)| a * b).collect();
                        let mean_d = dxhat.iter().sum::<f64>() / d as f64;
                        let mean_dx = dot(&dxhat, xh) / d as f64;
                        for c in 0..d {
                            gx.set(r, c, inv_std[r] * (dxhat[c] - mean_d - xh[c] * mean_dx));
                        }
                        for c in 0..d {
                            ggamma.as_mut_slice()[c] += gr[c] * xh[c];
                            gbeta.as_mut_slice()[c] += gr[c];
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *gamma, ggamma);
                    accumulate(&mut grads, *beta, gbeta);
                }
                Op::Gelu(x) => {
                    let xv = self.value(*x);
                    let mut gx = g;
                    for (o, v) in gx.as_mut_slice().iter_mut().zip(xv.as_slice()) {
                        *o *= gelu_grad(*v);
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Softplus(x) => {
                    let xv = self.value(*x);
                    let mut gx = g;
                    for (o, v) in gx.as_mut_slice().iter_mut().zip(xv.as_slice()) {
                        *o *= sigmoid(*v);
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Sigmoid(x) => {
                    let mut gx = g;
                    for (o, y) in gx.as_mut_slice().iter_mut().zip(node.value.as_slice()) {
                        *o *= y * (1.0 - y);
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::ColSlice(x, start) => {
                    let xv = self.value(*x);
                    let mut gx = Matrix::zeros(xv.rows(), xv.cols());
                    for r in 0..g.rows() {
                        gx.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::ConcatCols(parts) => {
                    let mut c = 0;
                    for p in parts {
                        let w = self.value(*p).cols();
                        let mut gp = Matrix::zeros(g.rows(), w);
                        for r in 0..g.rows() {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[c..c + w]);
                        }
                        accumulate(&mut grads, *p, gp);
                        c += w;
                    }
                }
                Op::Rotate(x, phases) => {
                    let mut gx = g;
                    for (r, &phi) in phases.iter().enumerate() {
                        rotate_pairs(gx.row_mut(r), -phi);
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::MeanRows(x) => {
                    let xv = self.value(*x);
                    let n = xv.rows() as f64;
                    let mut gx = Matrix::zeros(xv.rows(), xv.cols());
                    for r in 0..xv.rows() {
                        for (o, gg) in gx.row_mut(r).iter_mut().zip(g.row(0)) {
                            *o = gg / n;
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::L2NormalizeRows(x) => {
                    let xv = self.value(*x);
                    let y = &node.value;
                    let mut gx = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let norm = dot(xv.row(r), xv.row(r)).sqrt();
                        let inner = dot(y.row(r), g.row(r));
                        for ((o, gg), yy) in gx.row_mut(r).iter_mut().zip(g.row(r)).zip(y.row(r)) {
                            *o = (gg - yy * inner) / norm;
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
            }
        }
        Gradients { grads }
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }
}
