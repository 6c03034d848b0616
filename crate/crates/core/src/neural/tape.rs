//! Forward tape and reverse-mode sweep.
//!
//! Nodes are appended in evaluation order, so a single reverse pass over
//! the node list visits every consumer before its inputs.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{LayerGrad, LayerKind, LayerParams, Tensor, HALF_LN_2PI, LOG_STD_MAX, LOG_STD_MIN};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

enum Op<'p> {
    Input,
    Conv2d { x: usize, layer: &'p LayerParams },
    Dense { x: usize, layer: &'p LayerParams },
    Relu { x: usize },
    Reshape { x: usize },
    Clamp { x: usize, lo: f64, hi: f64 },
    /// `μ + exp(logσ)·ε`
    Reparam { mu: usize, log_std: usize, eps: Tensor },
    /// Row-wise log-density of the standard draw `ε` behind a reparameterised sample.
    LogProbEps { log_std: usize },
    /// Row-wise log-density of a fixed action.
    LogProb { mu: usize, log_std: usize, action: Tensor },
    Sum { x: usize },
    Dot { x: usize, w: Tensor },
    Add { a: usize, b: usize },
}

struct Node<'p> {
    value: Tensor,
    op: Op<'p>,
}

/// Gradients of one backward sweep.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    pub layers: BTreeMap<String, LayerGrad>,
    nodes: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to a tape node, if it was reached.
    pub fn wrt(&self, id: NodeId) -> Option<&Tensor> {
        self.nodes.get(id.0).and_then(|g| g.as_ref())
    }

    pub fn layer(&self, name: &str) -> Option<&LayerGrad> {
        self.layers.get(name)
    }
}

/// Records one forward evaluation. Layer parameters are borrowed for the
/// lifetime of the tape, so weights cannot change under a pending pass.
#[derive(Default)]
pub struct Tape<'p> {
    nodes: Vec<Node<'p>>,
    consumed: bool,
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), consumed: false }
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Branch taken by every piecewise op on the tape: for ReLU whether
    /// the input is positive, for clamps whether the input lies strictly
    /// inside the bounds. Two evaluations with equal active sets lie on
    /// the same smooth piece of the network.
    pub fn active_set(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for node in &self.nodes {
            match node.op {
                Op::Relu { x } => out.extend(self.nodes[x].value.data().iter().map(|v| *v > 0.0)),
                Op::Clamp { x, lo, hi } => out.extend(self.nodes[x].value.data().iter().map(|v| *v > lo && *v < hi)),
                _ => {}
            }
        }
        out
    }

    fn push(&mut self, value: Tensor, op: Op<'p>) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn input(&mut self, t: Tensor) -> NodeId {
        self.push(t, Op::Input)
    }

    pub fn conv2d(&mut self, x: NodeId, layer: &'p LayerParams) -> Result<NodeId> {
        let LayerKind::Conv2d { in_ch, out_ch, kernel } = layer.kind else {
            return Err(Error::Dimension(format!("{} is not a conv layer", layer.name)));
        };
        let xs = self.value(x).shape();
        if xs.len() != 4 || xs[1] != in_ch {
            return Err(Error::Dimension(format!("{}: input {xs:?}, expected [B, {in_ch}, H, W]", layer.name)));
        }
        let out = conv_forward(self.value(x), &layer.weight, &layer.bias, out_ch, kernel);
        Ok(self.push(out, Op::Conv2d { x: x.0, layer }))
    }

    pub fn dense(&mut self, x: NodeId, layer: &'p LayerParams) -> Result<NodeId> {
        let LayerKind::Dense { inputs, outputs } = layer.kind else {
            return Err(Error::Dimension(format!("{} is not a dense layer", layer.name)));
        };
        let xs = self.value(x).shape();
        if xs.len() != 2 || xs[1] != inputs {
            return Err(Error::Dimension(format!("{}: input {xs:?}, expected [B, {inputs}]", layer.name)));
        }
        let out = dense_forward(self.value(x), &layer.weight, &layer.bias, outputs);
        Ok(self.push(out, Op::Dense { x: x.0, layer }))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).map(|v| v.max(0.0));
        self.push(out, Op::Relu { x: x.0 })
    }

    /// `[B, ...]` to `[B, rest]`.
    pub fn flatten(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x);
        let b = v.batch();
        let rest = v.len() / b.max(1);
        let out = v.clone().reshape(&[b, rest])?;
        Ok(self.push(out, Op::Reshape { x: x.0 }))
    }

    pub fn clamp(&mut self, x: NodeId, lo: f64, hi: f64) -> NodeId {
        let out = self.value(x).map(|v| v.clamp(lo, hi));
        self.push(out, Op::Clamp { x: x.0, lo, hi })
    }

    /// Reparameterised draw `a = μ + exp(logσ)·ε` with its row-wise
    /// log-density. `logσ` is clamped to `[LOG_STD_MIN, LOG_STD_MAX]`.
    pub fn gaussian_sample<R: Rng + ?Sized>(&mut self, mu: NodeId, log_std: NodeId, rng: &mut R) -> Result<(NodeId, NodeId)> {
        let shape = self.value(mu).shape().to_vec();
        let n: usize = shape.iter().product();
        let eps = Tensor::new(&shape, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())?;
        self.gaussian_sample_with(mu, log_std, eps)
    }

    /// [`Tape::gaussian_sample`] with a caller-supplied standard draw.
    pub fn gaussian_sample_with(&mut self, mu: NodeId, log_std: NodeId, eps: Tensor) -> Result<(NodeId, NodeId)> {
        self.check_head(mu, log_std, eps.shape())?;
        let ls = self.clamp(log_std, LOG_STD_MIN, LOG_STD_MAX);
        let m = self.value(mu);
        let s = self.value(ls);
        let a: Vec<f64> = m.data().iter().zip(s.data()).zip(eps.data()).map(|((m, s), e)| m + s.exp() * e).collect();
        let a = Tensor::new(m.shape(), a)?;
        let logp = row_sums(s, |i, ls| -ls - HALF_LN_2PI - 0.5 * eps.data()[i] * eps.data()[i]);
        let action = self.push(a, Op::Reparam { mu: mu.0, log_std: ls.0, eps });
        let logp = self.push(logp, Op::LogProbEps { log_std: ls.0 });
        Ok((action, logp))
    }

    /// Row-wise log-density of a fixed `action` under `N(μ, exp(logσ)²)`.
    pub fn gaussian_log_prob(&mut self, mu: NodeId, log_std: NodeId, action: Tensor) -> Result<NodeId> {
        self.check_head(mu, log_std, action.shape())?;
        let ls = self.clamp(log_std, LOG_STD_MIN, LOG_STD_MAX);
        let m = self.value(mu).data();
        let s = self.value(ls);
        let logp = row_sums(s, |i, ls| {
            let z = (action.data()[i] - m[i]) * (-ls).exp();
            -ls - HALF_LN_2PI - 0.5 * z * z
        });
        Ok(self.push(logp, Op::LogProb { mu: mu.0, log_std: ls.0, action }))
    }

    fn check_head(&self, mu: NodeId, log_std: NodeId, other: &[usize]) -> Result<()> {
        let (a, b) = (self.value(mu).shape(), self.value(log_std).shape());
        if a != b || a != other || a.len() != 2 {
            return Err(Error::Dimension(format!("Gaussian head shapes {a:?}, {b:?}, {other:?}")));
        }
        Ok(())
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum { x: x.0 })
    }

    /// Scalar `Σ x ⊙ w` for a constant `w`.
    pub fn dot(&mut self, x: NodeId, w: Tensor) -> Result<NodeId> {
        if self.value(x).len() != w.len() {
            return Err(Error::Dimension(format!("dot of {:?} with {:?}", self.value(x).shape(), w.shape())));
        }
        let s = self.value(x).data().iter().zip(w.data()).map(|(a, b)| a * b).sum();
        Ok(self.push(Tensor::scalar(s), Op::Dot { x: x.0, w }))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::Dimension(format!("add of {:?} and {:?}", va.shape(), vb.shape())));
        }
        let mut out = va.clone();
        out.add_assign(vb);
        Ok(self.push(out, Op::Add { a: a.0, b: b.0 }))
    }

    /// Reverse sweep from a scalar node. A tape can be swept once.
    pub fn backward(&mut self, loss: NodeId) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Dimension(format!("loss must be scalar, got {:?}", self.value(loss).shape())));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        let mut layers: BTreeMap<String, LayerGrad> = BTreeMap::new();
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Input => {}
                Op::Conv2d { x, layer } => {
                    let LayerKind::Conv2d { kernel, .. } = layer.kind else { unreachable!() };
                    let xv = &self.nodes[*x].value;
                    let (dx, dw, db) = conv_backward(xv, &layer.weight, &g, kernel);
                    accumulate_layer(&mut layers, layer, dw, db);
                    accumulate(&mut grads, *x, dx);
                }
                Op::Dense { x, layer } => {
                    let xv = &self.nodes[*x].value;
                    let (dx, dw, db) = dense_backward(xv, &layer.weight, &g);
                    accumulate_layer(&mut layers, layer, dw, db);
                    accumulate(&mut grads, *x, dx);
                }
                Op::Relu { x } => {
                    let xv = &self.nodes[*x].value;
                    let mut dx = g.clone();
                    for (d, v) in dx.data_mut().iter_mut().zip(xv.data()) {
                        if *v <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::Reshape { x } => {
                    let shape = self.nodes[*x].value.shape().to_vec();
                    accumulate(&mut grads, *x, g.clone().reshape(&shape)?);
                }
                Op::Clamp { x, lo, hi } => {
                    let xv = &self.nodes[*x].value;
                    let mut dx = g.clone();
                    for (d, v) in dx.data_mut().iter_mut().zip(xv.data()) {
                        if *v < *lo || *v > *hi {
                            *d = 0.0;
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::Reparam { mu, log_std, eps } => {
                    let ls = &self.nodes[*log_std].value;
                    let dls: Vec<f64> = g.data().iter().zip(ls.data()).zip(eps.data()).map(|((g, s), e)| g * s.exp() * e).collect();
                    accumulate(&mut grads, *mu, g.clone());
                    accumulate(&mut grads, *log_std, Tensor::new(ls.shape(), dls)?);
                }
                Op::LogProbEps { log_std } => {
                    let ls = &self.nodes[*log_std].value;
                    let cols = ls.shape()[1];
                    let dls: Vec<f64> = (0..ls.len()).map(|i| -g.data()[i / cols]).collect();
                    accumulate(&mut grads, *log_std, Tensor::new(ls.shape(), dls)?);
                }
                Op::LogProb { mu, log_std, action } => {
                    let m = &self.nodes[*mu].value;
                    let ls = &self.nodes[*log_std].value;
                    let cols = ls.shape()[1];
                    let mut dmu = Vec::with_capacity(ls.len());
                    let mut dls = Vec::with_capacity(ls.len());
                    for i in 0..ls.len() {
                        let inv = (-ls.data()[i]).exp();
                        let z = (action.data()[i] - m.data()[i]) * inv;
                        let gr = g.data()[i / cols];
                        dmu.push(gr * z * inv);
                        dls.push(gr * (z * z - 1.0));
                    }
                    accumulate(&mut grads, *mu, Tensor::new(m.shape(), dmu)?);
                    accumulate(&mut grads, *log_std, Tensor::new(ls.shape(), dls)?);
                }
                Op::Sum { x } => {
                    let shape = self.nodes[*x].value.shape().to_vec();
                    accumulate(&mut grads, *x, Tensor::full(&shape, g.item()));
                }
                Op::Dot { x, w } => {
                    let shape = self.nodes[*x].value.shape().to_vec();
                    let gv = g.item();
                    accumulate(&mut grads, *x, Tensor::new(&shape, w.data().iter().map(|v| v * gv).collect())?);
                }
                Op::Add { a, b } => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.clone());
                }
            }
            grads[id] = Some(g);
        }
        Ok(Gradients { layers, nodes: grads })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: usize, g: Tensor) {
    match &mut grads[id] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn accumulate_layer(layers: &mut BTreeMap<String, LayerGrad>, layer: &LayerParams, dw: Tensor, db: Tensor) {
    match layers.get_mut(&layer.name) {
        Some(acc) => {
            acc.weight.add_assign(&dw);
            acc.bias.add_assign(&db);
        }
        None => {
            layers.insert(layer.name.clone(), LayerGrad { weight: dw, bias: db });
        }
    }
}

/// `[B, A]` → `[B]` summing `f(flat_index, value)` along each row.
fn row_sums(t: &Tensor, f: impl Fn(usize, f64) -> f64) -> Tensor {
    let cols = t.shape()[1];
    let rows = t.shape()[0];
    let data = (0..rows).map(|r| (0..cols).map(|c| f(r * cols + c, t.data()[r * cols + c])).sum()).collect();
    Tensor::new(&[rows], data).expect("row count matches")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for k in 0..4 {
            acc[k] += a[4 * i + k] * b[4 * i + k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += alpha * x;
    }
}

fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor, outputs: usize) -> Tensor {
    let batch = x.shape()[0];
    let inputs = x.shape()[1];
    let mut out = vec![0.0; batch * outputs];
    for r in 0..batch {
        let xr = &x.data()[r * inputs..(r + 1) * inputs];
        for o in 0..outputs {
            out[r * outputs + o] = b.data()[o] + dot(xr, &w.data()[o * inputs..(o + 1) * inputs]);
        }
    }
    Tensor::new(&[batch, outputs], out).expect("dense output shape")
}

fn dense_backward(x: &Tensor, w: &Tensor, g: &Tensor) -> (Tensor, Tensor, Tensor) {
    let batch = x.shape()[0];
    let inputs = x.shape()[1];
    let outputs = w.shape()[0];
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = Tensor::zeros(w.shape());
    let mut db = Tensor::zeros(&[outputs]);
    for r in 0..batch {
        let xr = &x.data()[r * inputs..(r + 1) * inputs];
        for o in 0..outputs {
            let go = g.data()[r * outputs + o];
            if go == 0.0 {
                continue;
            }
            db.data_mut()[o] += go;
            axpy(go, &w.data()[o * inputs..(o + 1) * inputs], &mut dx.data_mut()[r * inputs..(r + 1) * inputs]);
            axpy(go, xr, &mut dw.data_mut()[o * inputs..(o + 1) * inputs]);
        }
    }
    (dx, dw, db)
}

/// Output rows/cols `[lo, hi)` whose tap `d` lands inside an axis of length `n`.
fn tap_range(n: usize, d: usize, pad: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(d);
    let hi = (n + pad).saturating_sub(d).min(n);
    (lo, hi.max(lo))
}

fn conv_forward(x: &Tensor, w: &Tensor, b: &Tensor, out_ch: usize, k: usize) -> Tensor {
    let [batch, in_ch, h, wd] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let pad = k / 2;
    let plane = h * wd;
    let mut out = vec![0.0; batch * out_ch * plane];
    for bi in 0..batch {
        for o in 0..out_ch {
            let obase = (bi * out_ch + o) * plane;
            out[obase..obase + plane].iter_mut().for_each(|v| *v = b.data()[o]);
            for c in 0..in_ch {
                let xbase = (bi * in_ch + c) * plane;
                for di in 0..k {
                    let (i_lo, i_hi) = tap_range(h, di, pad);
                    for dj in 0..k {
                        let wv = w.data()[((o * in_ch + c) * k + di) * k + dj];
                        let (j_lo, j_hi) = tap_range(wd, dj, pad);
                        for i in i_lo..i_hi {
                            let xi = i + di - pad;
                            let orow = &mut out[obase + i * wd + j_lo..obase + i * wd + j_hi];
                            let xrow = &x.data()[xbase + xi * wd + j_lo + dj - pad..xbase + xi * wd + j_hi + dj - pad];
                            axpy(wv, xrow, orow);
                        }
                    }
                }
            }
        }
    }
    Tensor::new(&[batch, out_ch, h, wd], out).expect("conv output shape")
}

fn conv_backward(x: &Tensor, w: &Tensor, g: &Tensor, k: usize) -> (Tensor, Tensor, Tensor) {
    let [batch, in_ch, h, wd] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let out_ch = w.shape()[0];
    let pad = k / 2;
    let plane = h * wd;
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = Tensor::zeros(w.shape());
    let mut db = Tensor::zeros(&[out_ch]);
    for bi in 0..batch {
        for o in 0..out_ch {
            let gbase = (bi * out_ch + o) * plane;
            db.data_mut()[o] += g.data()[gbase..gbase + plane].iter().sum::<f64>();
            for c in 0..in_ch {
                let xbase = (bi * in_ch + c) * plane;
                for di in 0..k {
                    let (i_lo, i_hi) = tap_range(h, di, pad);
                    for dj in 0..k {
                        let widx = ((o * in_ch + c) * k + di) * k + dj;
                        let wv = w.data()[widx];
                        let (j_lo, j_hi) = tap_range(wd, dj, pad);
                        let mut acc = 0.0;
                        for i in i_lo..i_hi {
                            let xi = i + di - pad;
                            let grow = &g.data()[gbase + i * wd + j_lo..gbase + i * wd + j_hi];
                            let xs = xbase + xi * wd + j_lo + dj - pad;
                            let xe = xbase + xi * wd + j_hi + dj - pad;
                            acc += dot(grow, &x.data()[xs..xe]);
                            axpy(wv, grow, &mut dx.data_mut()[xs..xe]);
                        }
                        dw.data_mut()[widx] += acc;
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SeedTree;
    use crate::neural::init_gaussian;

    /// Direct six-loop cross-correlation with zero padding.
    fn conv_reference(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
        let s = x.shape();
        let (bn, cin, h, wd) = (s[0], s[1], s[2], s[3]);
        let (cout, k) = (w.shape()[0], w.shape()[2]);
        let p = (k / 2) as isize;
        let mut out = Tensor::zeros(&[bn, cout, h, wd]);
        for n in 0..bn {
            for o in 0..cout {
                for i in 0..h {
                    for j in 0..wd {
                        let mut acc = b.data()[o];
                        for c in 0..cin {
                            for di in 0..k {
                                for dj in 0..k {
                                    let xi = i as isize + di as isize - p;
                                    let xj = j as isize + dj as isize - p;
                                    if xi < 0 || xj < 0 || xi >= h as isize || xj >= wd as isize {
                                        continue;
                                    }
                                    let xv = x.data()[((n * cin + c) * h + xi as usize) * wd + xj as usize];
                                    acc += w.data()[((o * cin + c) * k + di) * k + dj] * xv;
                                }
                            }
                        }
                        out.data_mut()[((n * cout + o) * h + i) * wd + j] = acc;
                    }
                }
            }
        }
        out
    }

    fn conv_layer(cin: usize, cout: usize, k: usize, seed: u64) -> LayerParams {
        LayerParams::new("conv", LayerKind::Conv2d { in_ch: cin, out_ch: cout, kernel: k }, &mut SeedTree::new(seed).rng()).unwrap()
    }

    fn dense_layer(i: usize, o: usize, seed: u64) -> LayerParams {
        let mut l = LayerParams::new("dense", LayerKind::Dense { inputs: i, outputs: o }, &mut SeedTree::new(seed).rng()).unwrap();
        l.bias = init_gaussian(&[o], 0.3, &mut SeedTree::new(seed + 1).rng()).unwrap();
        l
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let den: f64 = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        num / den.max(1e-300)
    }

    #[test]
    fn identity_kernel() {
        let mut l = conv_layer(3, 3, 1, 0);
        l.weight = Tensor::zeros(&[3, 3, 1, 1]);
        for c in 0..3 {
            l.weight.data_mut()[c * 3 + c] = 1.0;
        }
        let x = init_gaussian(&[2, 3, 4, 5], 1.0, &mut SeedTree::new(1).rng()).unwrap();
        let mut tape = Tape::new();
        let xi = tape.input(x.clone());
        let y = tape.conv2d(xi, &l).unwrap();
        assert_eq!(tape.value(y), &x);
    }

    #[test]
    fn zero_kernel_gives_bias() {
        let mut l = conv_layer(2, 3, 3, 0);
        l.weight = Tensor::zeros(l.weight.shape());
        l.bias = Tensor::full(&[3], 0.75);
        let x = init_gaussian(&[1, 2, 4, 4], 1.0, &mut SeedTree::new(2).rng()).unwrap();
        let mut tape = Tape::new();
        let xi = tape.input(x);
        let y = tape.conv2d(xi, &l).unwrap();
        assert!(tape.value(y).data().iter().all(|v| *v == 0.75));
    }

    #[test]
    fn conv_matches_reference() {
        let mut l = conv_layer(4, 5, 3, 3);
        l.bias = init_gaussian(&[5], 1.0, &mut SeedTree::new(4).rng()).unwrap();
        let x = init_gaussian(&[2, 4, 4, 7], 1.0, &mut SeedTree::new(5).rng()).unwrap();
        let mut tape = Tape::new();
        let xi = tape.input(x.clone());
        let y = tape.conv2d(xi, &l).unwrap();
        let want = conv_reference(&x, &l.weight, &l.bias);
        assert!(rel_err(tape.value(y).data(), want.data()) < 1e-12);
    }

    #[test]
    fn conv_shape_mismatch() {
        let l = conv_layer(4, 5, 3, 3);
        let mut tape = Tape::new();
        let xi = tape.input(Tensor::zeros(&[1, 3, 4, 4]));
        assert!(tape.conv2d(xi, &l).is_err());
        let d = dense_layer(3, 2, 1);
        assert!(tape.dense(xi, &d).is_err());
    }

    #[test]
    fn dense_cases() {
        let mut l = dense_layer(3, 3, 1);
        l.weight = Tensor::zeros(&[3, 3]);
        l.bias = Tensor::zeros(&[3]);
        for i in 0..3 {
            l.weight.data_mut()[i * 3 + i] = 1.0;
        }
        let x = Tensor::new(&[1, 3], vec![1.0, -2.0, 3.5]).unwrap();
        let mut tape = Tape::new();
        let xi = tape.input(x.clone());
        let y = tape.dense(xi, &l).unwrap();
        assert_eq!(tape.value(y), &x);

        let kind = LayerKind::Dense { inputs: 1, outputs: 1 };
        let s = LayerParams::from_parts("s", kind, Tensor::full(&[1, 1], 2.5), Tensor::full(&[1], -1.0));
        let mut tape = Tape::new();
        let xi = tape.input(Tensor::full(&[1, 1], 4.0));
        let y = tape.dense(xi, &s).unwrap();
        assert_eq!(tape.value(y).item(), 9.0);

        let l = dense_layer(7, 4, 9);
        let x = init_gaussian(&[3, 7], 1.0, &mut SeedTree::new(10).rng()).unwrap();
        let mut tape = Tape::new();
        let xi = tape.input(x.clone());
        let y = tape.dense(xi, &l).unwrap();
        let mut want = vec![0.0; 12];
        for r in 0..3 {
            for o in 0..4 {
                want[r * 4 + o] = l.bias.data()[o] + (0..7).map(|i| l.weight.data()[o * 7 + i] * x.data()[r * 7 + i]).sum::<f64>();
            }
        }
        assert!(rel_err(tape.value(y).data(), &want) < 1e-12);
    }

    #[test]
    fn relu_forward_and_mask() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::new(&[3], vec![-1.0, 0.0, 2.0]).unwrap());
        let y = tape.relu(x);
        assert_eq!(tape.value(y).data(), &[0.0, 0.0, 2.0]);
        let s = tape.sum(y);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[0.0, 0.0, 1.0]);

        let mut tape = Tape::new();
        let x = tape.input(Tensor::new(&[2], vec![-1.0, -0.5]).unwrap());
        let y = tape.relu(x);
        assert!(tape.value(y).data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sum_gradient_is_ones_and_tape_is_single_use() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::new(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let s = tape.sum(x);
        let g = tape.backward(s).unwrap();
        assert!(g.wrt(x).unwrap().data().iter().all(|v| *v == 1.0));
        assert!(matches!(tape.backward(s), Err(Error::TapeConsumed)));
    }

    #[test]
    fn constant_loss_has_zero_layer_gradients() {
        let l = dense_layer(3, 2, 4);
        let mut tape = Tape::new();
        let x = tape.input(Tensor::full(&[1, 3], 1.0));
        let y = tape.dense(x, &l).unwrap();
        let loss = tape.dot(y, Tensor::zeros(&[1, 2])).unwrap();
        let g = tape.backward(loss).unwrap();
        let lg = g.layer("dense").unwrap();
        assert!(lg.weight.data().iter().chain(lg.bias.data()).all(|v| *v == 0.0));
    }

    #[test]
    fn gaussian_sample_cases() {
        let mut tape = Tape::new();
        let mu = tape.input(Tensor::zeros(&[1, 3]));
        let ls = tape.input(Tensor::zeros(&[1, 3]));
        let (a, lp) = tape.gaussian_sample_with(mu, ls, Tensor::zeros(&[1, 3])).unwrap();
        assert!(tape.value(a).data().iter().all(|v| *v == 0.0));
        assert!((tape.value(lp).item() + 3.0 * 0.918_938_533_204_672_7).abs() < 1e-12);
        let g = tape.backward(lp).unwrap();
        // density maximum: ∂logp/∂μ = 0 at ε = 0
        assert!(g.wrt(mu).map_or(true, |t| t.data().iter().all(|v| *v == 0.0)));

        let mut tape = Tape::new();
        let mu = tape.input(Tensor::new(&[1, 2], vec![0.3, -0.7]).unwrap());
        let ls = tape.input(Tensor::full(&[1, 2], -50.0));
        let eps = Tensor::new(&[1, 2], vec![2.0, -3.0]).unwrap();
        let (a, _) = tape.gaussian_sample_with(mu, ls, eps.clone()).unwrap();
        for i in 0..2 {
            let d = (tape.value(a).data()[i] - tape.value(mu).data()[i]).abs();
            assert!(d <= 5e-5 * eps.data()[i].abs());
        }
    }

    #[test]
    fn gaussian_sample_statistics() {
        let n = 100_000;
        let mut tape = Tape::new();
        let mu = tape.input(Tensor::full(&[n, 1], 1.5));
        let ls = tape.input(Tensor::full(&[n, 1], 0.4f64.ln()));
        let (a, _) = tape.gaussian_sample(mu, ls, &mut SeedTree::new(77).rng()).unwrap();
        let v = tape.value(a).data();
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((mean - 1.5).abs() < 3.0 * 0.4 / (n as f64).sqrt(), "{mean}");
        assert!((std - 0.4).abs() / 0.4 < 0.02, "{std}");
    }

    #[test]
    fn logp_falls_with_eps_norm() {
        let logp = |e: f64| {
            let mut tape = Tape::new();
            let mu = tape.input(Tensor::zeros(&[1, 2]));
            let ls = tape.input(Tensor::zeros(&[1, 2]));
            let (_, lp) = tape.gaussian_sample_with(mu, ls, Tensor::full(&[1, 2], e)).unwrap();
            tape.value(lp).item()
        };
        assert!(logp(0.5) > logp(1.0));
        assert!(logp(1.0) > logp(2.0));
    }

    /// Central-difference check of d(loss)/d(param) for every parameter of
    /// a conv → relu → flatten → dense heads → Gaussian chain.
    #[test]
    fn composed_chain_matches_finite_differences() {
        let mut conv = conv_layer(2, 3, 3, 11);
        conv.bias = init_gaussian(&[3], 0.2, &mut SeedTree::new(12).rng()).unwrap();
        let x = init_gaussian(&[2, 2, 3, 4], 1.0, &mut SeedTree::new(14).rng()).unwrap();
        let action = init_gaussian(&[2, 2], 1.0, &mut SeedTree::new(15).rng()).unwrap();
        let eps = init_gaussian(&[2, 2], 1.0, &mut SeedTree::new(16).rng()).unwrap();
        let wsum = init_gaussian(&[2, 2], 1.0, &mut SeedTree::new(17).rng()).unwrap();
        let mut head_mu = dense_layer(3 * 3 * 4, 2, 18);
        head_mu.name = "mu".into();
        let mut head_ls = dense_layer(3 * 3 * 4, 2, 19);
        head_ls.name = "ls".into();

        let run = |conv: &LayerParams, hm: &LayerParams, hl: &LayerParams, grad: bool| -> (f64, Option<Gradients>) {
            let mut tape = Tape::new();
            let xi = tape.input(x.clone());
            let h = tape.conv2d(xi, conv).unwrap();
            let h = tape.relu(h);
            let h = tape.flatten(h).unwrap();
            let mu = tape.dense(h, hm).unwrap();
            let ls = tape.dense(h, hl).unwrap();
            let lp = tape.gaussian_log_prob(mu, ls, action.clone()).unwrap();
            let (a, lpe) = tape.gaussian_sample_with(mu, ls, eps.clone()).unwrap();
            let t1 = tape.sum(lp);
            let t2 = tape.dot(a, wsum.clone()).unwrap();
            let t3 = tape.sum(lpe);
            let l = tape.add(t1, t2).unwrap();
            let l = tape.add(l, t3).unwrap();
            let v = tape.value(l).item();
            (v, grad.then(|| tape.backward(l).unwrap()))
        };

        let (_, g) = run(&conv, &head_mu, &head_ls, true);
        let g = g.unwrap();
        let h = 1e-5;
        let mut worst = 0.0f64;
        let mut check = |which: usize| {
            let (base, name) = match which {
                0 => (&conv, "conv"),
                1 => (&head_mu, "mu"),
                _ => (&head_ls, "ls"),
            };
            let lg = g.layer(name).unwrap();
            for (is_bias, len) in [(false, base.weight.len()), (true, base.bias.len())] {
                for i in 0..len {
                    let eval = |delta: f64| {
                        let mut p = base.clone();
                        let t = if is_bias { &mut p.bias } else { &mut p.weight };
                        t.data_mut()[i] += delta;
                        match which {
                            0 => run(&p, &head_mu, &head_ls, false).0,
                            1 => run(&conv, &p, &head_ls, false).0,
                            _ => run(&conv, &head_mu, &p, false).0,
                        }
                    };
                    let fd = (eval(h) - eval(-h)) / (2.0 * h);
                    let an = if is_bias { lg.bias.data()[i] } else { lg.weight.data()[i] };
                    let err = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
                    worst = worst.max(err);
                }
            }
        };
        for w in 0..3 {
            check(w);
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }
}
