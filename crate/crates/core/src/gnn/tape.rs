//! Minimal reverse-mode differentiation over dense matrices.
//!
//! Operations are recorded in evaluation order; [`Tape::backward`] walks them
//! in reverse and accumulates adjoints. Only the handful of ops the model needs
//! are implemented.

use alloc::vec::Vec;

use crate::math;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a[n x m] + b[1 x m]`
    AddBias(Var, Var),
    Add(Var, Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    Scale(Var, f64),
    Gather(Var, Vec<usize>),
    ScatterAdd(Var, Vec<usize>),
    ConcatRows(Vec<Var>),
    /// Row `r` multiplied by the constant `w[r]`.
    MulConstRows(Var, Vec<f64>),
    /// Per-head row-wise dot product: `[R x H*d] . [R x H*d] -> [R x H]`.
    HeadDot(Var, Var, usize),
    /// Head block `h` of row `r` scaled by `alpha[r, h]`.
    HeadScale(Var, Var, usize),
    /// Mean over head blocks: `[R x H*d] -> [R x d]`.
    HeadMean(Var, usize),
    /// Column-wise softmax over rows sharing a segment id.
    SegmentSoftmax(Var, Vec<usize>, usize),
    /// Mean binary cross-entropy on logits.
    BceWithLogits(Var, Vec<f64>),
    /// Mean focal loss on logits with binary targets.
    FocalWithLogits(Var, Vec<f64>, f64),
    SumSquares(Var),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add_bias(&mut self, a: Var, b: Var) -> Var {
        let bias = self.value(b);
        assert_eq!(bias.rows, 1, "bias is a row vector");
        let mut v = self.value(a).clone();
        assert_eq!(v.cols, bias.cols, "bias width");
        for r in 0..v.rows {
            for (x, b) in v.row_mut(r).iter_mut().zip(&bias.data) {
                *x += b;
            }
        }
        self.push(v, Op::AddBias(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let xw = self.matmul(x, w);
        self.add_bias(xw, b)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        v.data.iter_mut().for_each(|x| {
            if *x < 0.0 {
                *x = 0.0
            }
        });
        self.push(v, Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let mut v = self.value(a).clone();
        v.data.iter_mut().for_each(|x| {
            if *x < 0.0 {
                *x *= slope
            }
        });
        self.push(v, Op::LeakyRelu(a, slope))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let mut v = self.value(a).clone();
        v.scale(s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn gather(&mut self, a: Var, idx: Vec<usize>) -> Var {
        let src = self.value(a);
        let mut v = Matrix::zeros(idx.len(), src.cols);
        for (r, &i) in idx.iter().enumerate() {
            v.row_mut(r).copy_from_slice(src.row(i));
        }
        self.push(v, Op::Gather(a, idx))
    }

    /// Sums row `r` of `a` into row `idx[r]` of an `n_out`-row result.
    pub fn scatter_add(&mut self, a: Var, idx: Vec<usize>, n_out: usize) -> Var {
        let src = self.value(a);
        assert_eq!(src.rows, idx.len(), "scatter index length");
        let mut v = Matrix::zeros(n_out, src.cols);
        for (r, &i) in idx.iter().enumerate() {
            for (d, s) in v.row_mut(i).iter_mut().zip(src.row(r)) {
                *d += s;
            }
        }
        self.push(v, Op::ScatterAdd(a, idx))
    }

    pub fn concat_rows(&mut self, parts: Vec<Var>) -> Var {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in &parts {
            let m = self.value(p);
            assert_eq!(m.cols, cols, "concat width");
            rows += m.rows;
            data.extend_from_slice(&m.data);
        }
        self.push(Matrix::from_vec(rows, cols, data), Op::ConcatRows(parts))
    }

    pub fn mul_const_rows(&mut self, a: Var, w: Vec<f64>) -> Var {
        let mut v = self.value(a).clone();
        assert_eq!(v.rows, w.len(), "row weights");
        for (r, &s) in w.iter().enumerate() {
            v.row_mut(r).iter_mut().for_each(|x| *x *= s);
        }
        self.push(v, Op::MulConstRows(a, w))
    }

    pub fn head_dot(&mut self, a: Var, b: Var, heads: usize) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape(), "head_dot shape");
        let d = x.cols / heads;
        let mut v = Matrix::zeros(x.rows, heads);
        for r in 0..x.rows {
            let (xr, yr) = (x.row(r), y.row(r));
            for h in 0..heads {
                let s = h * d;
                v.set(r, h, xr[s..s + d].iter().zip(&yr[s..s + d]).map(|(p, q)| p * q).sum());
            }
        }
        self.push(v, Op::HeadDot(a, b, heads))
    }

    pub fn head_scale(&mut self, a: Var, alpha: Var, heads: usize) -> Var {
        let (x, al) = (self.value(a), self.value(alpha));
        assert_eq!((x.rows, heads), al.shape(), "head_scale shape");
        let d = x.cols / heads;
        let mut v = x.clone();
        for r in 0..v.rows {
            for (j, val) in v.row_mut(r).iter_mut().enumerate() {
                *val *= al.get(r, j / d);
            }
        }
        self.push(v, Op::HeadScale(a, alpha, heads))
    }

    pub fn head_mean(&mut self, a: Var, heads: usize) -> Var {
        let x = self.value(a);
        let d = x.cols / heads;
        let mut v = Matrix::zeros(x.rows, d);
        let inv = 1.0 / heads as f64;
        for r in 0..x.rows {
            let xr = x.row(r);
            for (c, out) in v.row_mut(r).iter_mut().enumerate() {
                *out = (0..heads).map(|h| xr[h * d + c]).sum::<f64>() * inv;
            }
        }
        self.push(v, Op::HeadMean(a, heads))
    }

    pub fn segment_softmax(&mut self, a: Var, seg: Vec<usize>, n_seg: usize) -> Var {
        let x = self.value(a);
        assert_eq!(x.rows, seg.len(), "segment ids");
        let mut max = Matrix::filled(n_seg, x.cols, f64::NEG_INFINITY);
        for (r, &s) in seg.iter().enumerate() {
            for c in 0..x.cols {
                if x.get(r, c) > max.get(s, c) {
                    max.set(s, c, x.get(r, c));
                }
            }
        }
        let mut v = Matrix::zeros(x.rows, x.cols);
        let mut denom = Matrix::zeros(n_seg, x.cols);
        for (r, &s) in seg.iter().enumerate() {
            for c in 0..x.cols {
                let e = math::exp(x.get(r, c) - max.get(s, c));
                v.set(r, c, e);
                denom.set(s, c, denom.get(s, c) + e);
            }
        }
        for (r, &s) in seg.iter().enumerate() {
            for c in 0..x.cols {
                v.set(r, c, v.get(r, c) / denom.get(s, c));
            }
        }
        self.push(v, Op::SegmentSoftmax(a, seg, n_seg))
    }

    pub fn bce_with_logits(&mut self, logits: Var, target: Vec<f64>) -> Var {
        let x = self.value(logits);
        assert_eq!(x.data.len(), target.len(), "target length");
        let n = target.len() as f64;
        let loss = x.data.iter().zip(&target).map(|(&z, &t)| math::softplus(z) - t * z).sum::<f64>() / n;
        self.push(Matrix::filled(1, 1, loss), Op::BceWithLogits(logits, target))
    }

    pub fn focal_with_logits(&mut self, logits: Var, target: Vec<f64>, gamma: f64) -> Var {
        let x = self.value(logits);
        assert_eq!(x.data.len(), target.len(), "target length");
        let n = target.len() as f64;
        let loss = x
            .data
            .iter()
            .zip(&target)
            .map(|(&z, &t)| {
                let zz = if t > 0.5 { z } else { -z };
                let pt = math::sigmoid(zz);
                math::powf(1.0 - pt, gamma) * math::softplus(-zz)
            })
            .sum::<f64>()
            / n;
        self.push(Matrix::filled(1, 1, loss), Op::FocalWithLogits(logits, target, gamma))
    }

    pub fn sum_squares(&mut self, a: Var) -> Var {
        let s = self.value(a).sum_squares();
        self.push(Matrix::filled(1, 1, s), Op::SumSquares(a))
    }

    /// Signs of every rectifier input, in evaluation order.
    pub fn activation_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for n in &self.nodes {
            if let Op::Relu(a) | Op::LeakyRelu(a, _) = n.op {
                out.extend(self.nodes[a.0].value.data.iter().map(|&x| x > 0.0));
            }
        }
        out
    }

    /// Adjoints of every node with respect to the scalar `root`.
    pub fn backward(&self, root: Var) -> Vec<Option<Matrix>> {
        assert_eq!(self.value(root).shape(), (1, 1), "backward from a scalar");
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Matrix::filled(1, 1, 1.0));
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        grads
    }

    fn propagate(&self, i: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                accumulate(grads, *a, g.matmul_t(val(*b)));
                accumulate(grads, *b, val(*a).t_matmul(g));
            }
            Op::AddBias(a, b) => {
                accumulate(grads, *a, g.clone());
                let mut gb = Matrix::zeros(1, g.cols);
                for r in 0..g.rows {
                    for (d, s) in gb.data.iter_mut().zip(g.row(r)) {
                        *d += s;
                    }
                }
                accumulate(grads, *b, gb);
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::Relu(a) => {
                let mut ga = g.clone();
                for (x, inp) in ga.data.iter_mut().zip(&val(*a).data) {
                    if *inp <= 0.0 {
                        *x = 0.0;
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::LeakyRelu(a, slope) => {
                let mut ga = g.clone();
                for (x, inp) in ga.data.iter_mut().zip(&val(*a).data) {
                    if *inp < 0.0 {
                        *x *= slope;
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::Scale(a, s) => {
                let mut ga = g.clone();
                ga.scale(*s);
                accumulate(grads, *a, ga);
            }
            Op::Gather(a, idx) => {
                let src = val(*a);
                let mut ga = Matrix::zeros(src.rows, src.cols);
                for (r, &k) in idx.iter().enumerate() {
                    for (d, s) in ga.row_mut(k).iter_mut().zip(g.row(r)) {
                        *d += s;
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::ScatterAdd(a, idx) => {
                let mut ga = Matrix::zeros(idx.len(), g.cols);
                for (r, &k) in idx.iter().enumerate() {
                    ga.row_mut(r).copy_from_slice(g.row(k));
                }
                accumulate(grads, *a, ga);
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let rows = val(p).rows;
                    let data = g.data[offset * g.cols..(offset + rows) * g.cols].to_vec();
                    accumulate(grads, p, Matrix::from_vec(rows, g.cols, data));
                    offset += rows;
                }
            }
            Op::MulConstRows(a, w) => {
                let mut ga = g.clone();
                for (r, &s) in w.iter().enumerate() {
                    ga.row_mut(r).iter_mut().for_each(|x| *x *= s);
                }
                accumulate(grads, *a, ga);
            }
            Op::HeadDot(a, b, heads) => {
                let (x, y) = (val(*a), val(*b));
                let d = x.cols / heads;
                let mut ga = Matrix::zeros(x.rows, x.cols);
                let mut gb = Matrix::zeros(x.rows, x.cols);
                for r in 0..x.rows {
                    for j in 0..x.cols {
                        let up = g.get(r, j / d);
                        ga.set(r, j, up * y.get(r, j));
                        gb.set(r, j, up * x.get(r, j));
                    }
                }
                accumulate(grads, *a, ga);
                accumulate(grads, *b, gb);
            }
            Op::HeadScale(a, alpha, heads) => {
                let (x, al) = (val(*a), val(*alpha));
                let d = x.cols / heads;
                let mut ga = Matrix::zeros(x.rows, x.cols);
                let mut gal = Matrix::zeros(al.rows, al.cols);
                for r in 0..x.rows {
                    for j in 0..x.cols {
                        let h = j / d;
                        ga.set(r, j, g.get(r, j) * al.get(r, h));
                        gal.set(r, h, gal.get(r, h) + g.get(r, j) * x.get(r, j));
                    }
                }
                accumulate(grads, *a, ga);
                accumulate(grads, *alpha, gal);
            }
            Op::HeadMean(a, heads) => {
                let x = val(*a);
                let d = x.cols / heads;
                let inv = 1.0 / *heads as f64;
                let mut ga = Matrix::zeros(x.rows, x.cols);
                for r in 0..x.rows {
                    for j in 0..x.cols {
                        ga.set(r, j, g.get(r, j % d) * inv);
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::SegmentSoftmax(a, seg, n_seg) => {
                let y = &self.nodes[i].value;
                let mut dot = Matrix::zeros(*n_seg, y.cols);
                for (r, &s) in seg.iter().enumerate() {
                    for c in 0..y.cols {
                        dot.set(s, c, dot.get(s, c) + y.get(r, c) * g.get(r, c));
                    }
                }
                let mut ga = Matrix::zeros(y.rows, y.cols);
                for (r, &s) in seg.iter().enumerate() {
                    for c in 0..y.cols {
                        ga.set(r, c, y.get(r, c) * (g.get(r, c) - dot.get(s, c)));
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::BceWithLogits(a, target) => {
                let x = val(*a);
                let n = target.len() as f64;
                let up = g.get(0, 0);
                let data = x.data.iter().zip(target).map(|(&z, &t)| up * (math::sigmoid(z) - t) / n).collect();
                accumulate(grads, *a, Matrix::from_vec(x.rows, x.cols, data));
            }
            Op::FocalWithLogits(a, target, gamma) => {
                let x = val(*a);
                let n = target.len() as f64;
                let up = g.get(0, 0);
                let data = x
                    .data
                    .iter()
                    .zip(target)
                    .map(|(&z, &t)| {
                        let sign = if t > 0.5 { 1.0 } else { -1.0 };
                        let zz = sign * z;
                        let pt = math::sigmoid(zz);
                        let q = 1.0 - pt;
                        // d/dzz of (1-pt)^g * softplus(-zz)
                        let d = -gamma * math::powf(q, *gamma) * pt * math::softplus(-zz) - math::powf(q, *gamma + 1.0);
                        up * sign * d / n
                    })
                    .collect();
                accumulate(grads, *a, Matrix::from_vec(x.rows, x.cols, data));
            }
            Op::SumSquares(a) => {
                let mut ga = val(*a).clone();
                ga.scale(2.0 * g.get(0, 0));
                accumulate(grads, *a, ga);
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central-difference check of `f` built on a single leaf.
    fn check(x0: Matrix, build: impl Fn(&mut Tape, Var) -> Var) {
        let mut t = Tape::new();
        let x = t.leaf(x0.clone());
        let y = build(&mut t, x);
        let g = t.backward(y)[x.0].clone().unwrap();
        let h = 1e-6;
        for k in 0..x0.data.len() {
            let eval = |delta: f64| {
                let mut m = x0.clone();
                m.data[k] += delta;
                let mut t = Tape::new();
                let x = t.leaf(m);
                let y = build(&mut t, x);
                t.value(y).get(0, 0)
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            assert!((fd - g.data[k]).abs() < 1e-6 * (1.0 + fd.abs()), "k={k}: fd {fd} vs {}", g.data[k]);
        }
    }

    fn m(rows: usize, cols: usize, seed: u64) -> Matrix {
        let data = (0..rows * cols).map(|i| (((i as u64 + 1) * (seed + 7) * 2654435761) % 1000) as f64 / 500.0 - 1.0).collect();
        Matrix::from_vec(rows, cols, data)
    }

    #[test]
    fn attention_chain_gradients() {
        check(m(4, 6, 1), |t, x| {
            let k = t.leaf(m(4, 6, 2));
            let s = t.head_dot(x, k, 2);
            let a = t.segment_softmax(s, vec![0, 1, 0, 1], 2);
            let v = t.head_scale(x, a, 2);
            let agg = t.scatter_add(v, vec![0, 1, 0, 1], 2);
            let hm = t.head_mean(agg, 2);
            let lr = t.leaky_relu(hm, 0.2);
            t.sum_squares(lr)
        });
    }

    #[test]
    fn linear_and_losses_gradients() {
        check(m(3, 4, 3), |t, x| {
            let w = t.leaf(m(4, 1, 4));
            let b = t.leaf(m(1, 1, 5));
            let y = t.linear(x, w, b);
            t.bce_with_logits(y, vec![0.0, 1.0, 0.0])
        });
        check(m(3, 1, 6), |t, x| t.focal_with_logits(x, vec![1.0, 0.0, 0.0], 2.0));
        check(m(3, 2, 7), |t, x| {
            let g = t.gather(x, vec![2, 0, 2, 1]);
            let w = t.mul_const_rows(g, vec![0.5, 2.0, -1.0, 0.3]);
            let c = t.concat_rows(vec![w, x]);
            let s = t.scale(c, 1.5);
            let r = t.relu(s);
            t.sum_squares(r)
        });
    }

    #[test]
    fn softmax_rows_sum_to_one_per_segment() {
        let mut t = Tape::new();
        let x = t.leaf(m(5, 2, 9));
        let y = t.segment_softmax(x, vec![0, 0, 1, 1, 1], 2);
        let v = t.value(y);
        for c in 0..2 {
            assert!((v.get(0, c) + v.get(1, c) - 1.0).abs() < 1e-12);
            assert!((v.get(2, c) + v.get(3, c) + v.get(4, c) - 1.0).abs() < 1e-12);
        }
    }
}
