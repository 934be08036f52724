//! Wengert-tape reverse-mode automatic differentiation over dense matrices.
//!
//! Operations are recorded in creation order; parents always precede their
//! consumers, so the backward sweep is a single reverse pass. `backward`
//! propagates through local adjoint buffers and then adds the result into
//! each node's persistent gradient, so repeated calls accumulate.

use super::matrix::{
    depthwise_conv_val, gelu_grad_f64, layer_norm_val, relu_val, softmax_rows_val, Matrix,
};
use super::matrix::gelu_val;
use super::real::Real;
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct NodeId(pub(crate) usize);

enum Op<R: Real> {
    Leaf,
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, R),
    /// Broadcast-add of a 1xC row vector to every row of a TxC matrix.
    AddRow(NodeId, NodeId),
    Relu(NodeId),
    Gelu(NodeId),
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        eps: f64,
    },
    SoftmaxRows(NodeId),
    DepthwiseConv {
        x: NodeId,
        kernels: NodeId,
    },
    /// Mean absolute difference against a constant target; scalar output.
    L1Loss {
        x: NodeId,
        target: Matrix<R>,
    },
    SumAll(NodeId),
    ConcatCols(Vec<NodeId>),
    /// Mean negative log-likelihood of per-row labels under row softmax.
    CrossEntropy {
        logits: NodeId,
        labels: Vec<usize>,
    },
}

struct TapeNode<R: Real> {
    value: Matrix<R>,
    grad: Option<Matrix<R>>,
    op: Op<R>,
}

pub struct Tape<R: Real = f32> {
    nodes: Vec<TapeNode<R>>,
}

impl<R: Real> Default for Tape<R> {
    fn default() -> Self {
        Self::new()
    }
}

impl<R: Real> Tape<R> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix<R>, op: Op<R>) -> NodeId {
        self.nodes.push(TapeNode {
            value,
            grad: None,
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Insert an input or parameter node.
    pub fn leaf(&mut self, value: Matrix<R>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, id: NodeId) -> &Matrix<R> {
        &self.nodes[id.0].value
    }

    /// Gradient accumulated into `id` by previous `backward` calls, if any.
    pub fn grad(&self, id: NodeId) -> Option<&Matrix<R>> {
        self.nodes[id.0].grad.as_ref()
    }

    /// Gradient of `id`, or zeros when no backward pass reached it.
    pub fn grad_or_zeros(&self, id: NodeId) -> Matrix<R> {
        let n = &self.nodes[id.0];
        n.grad
            .clone()
            .unwrap_or_else(|| Matrix::zeros(n.value.rows(), n.value.cols()))
    }

    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn shape_of(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.shape()
    }

    // -- op constructors ----------------------------------------------------

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ar, ac) = self.shape_of(a);
        let (br, bc) = self.shape_of(b);
        if ac != br {
            return Err(Error::shape(
                "matmul",
                format!("{ar}x{ac} * {br}x{bc}: inner dimensions differ"),
            ));
        }
        let value = self.value(a).matmul(self.value(b));
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).transpose();
        self.push(value, Op::Transpose(a))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape(a, b, "add")?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape(a, b, "sub")?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        Ok(self.push(value, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape(a, b, "mul")?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.push(value, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: NodeId, factor: R) -> NodeId {
        let value = self.value(a).scale(factor);
        self.push(value, Op::Scale(a, factor))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let (rr, rc) = self.shape_of(row);
        let (_, ac) = self.shape_of(a);
        if rr != 1 || rc != ac {
            return Err(Error::shape(
                "add_row",
                format!("bias {rr}x{rc} against matrix with {ac} columns"),
            ));
        }
        let value = self.value(a).add_row_broadcast(self.value(row));
        Ok(self.push(value, Op::AddRow(a, row)))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let value = relu_val(self.value(a));
        self.push(value, Op::Relu(a))
    }

    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        let value = gelu_val(self.value(a));
        self.push(value, Op::Gelu(a))
    }

    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId, eps: f64) -> Result<NodeId> {
        if eps <= 0.0 {
            return Err(Error::Config(format!("layer_norm eps must be > 0, got {eps}")));
        }
        let (_, xc) = self.shape_of(x);
        for (id, name) in [(gain, "gain"), (bias, "bias")] {
            let (r, c) = self.shape_of(id);
            if r != 1 || c != xc {
                return Err(Error::shape(
                    "layer_norm",
                    format!("{name} is {r}x{c}, expected 1x{xc}"),
                ));
            }
        }
        let value = layer_norm_val(self.value(x), self.value(gain), self.value(bias), eps);
        Ok(self.push(value, Op::LayerNorm { x, gain, bias, eps }))
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let value = softmax_rows_val(self.value(a));
        self.push(value, Op::SoftmaxRows(a))
    }

    pub fn depthwise_conv(&mut self, x: NodeId, kernels: NodeId) -> Result<NodeId> {
        let (kw, kc) = self.shape_of(kernels);
        let (_, xc) = self.shape_of(x);
        if kw % 2 == 0 {
            return Err(Error::Config(format!(
                "depthwise_conv kernel width must be odd, got {kw}"
            )));
        }
        if kc != xc {
            return Err(Error::shape(
                "depthwise_conv",
                format!("kernels cover {kc} columns, input has {xc}"),
            ));
        }
        let value = depthwise_conv_val(self.value(x), self.value(kernels));
        Ok(self.push(value, Op::DepthwiseConv { x, kernels }))
    }

    /// Mean absolute elementwise difference against a constant target.
    pub fn l1_loss(&mut self, x: NodeId, target: &Matrix<R>) -> Result<NodeId> {
        if self.shape_of(x) != target.shape() {
            return Err(Error::shape(
                "l1_loss",
                format!(
                    "prediction {:?} vs target {:?}",
                    self.shape_of(x),
                    target.shape()
                ),
            ));
        }
        let mean = self.value(x).mean_abs_diff_f64(target);
        let value = Matrix::filled(1, 1, R::from_f64(mean));
        Ok(self.push(
            value,
            Op::L1Loss {
                x,
                target: target.clone(),
            },
        ))
    }

    /// Mean absolute elementwise difference between two nodes; gradients
    /// flow into both.
    pub fn l1_between(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape(a, b, "l1_between")?;
        let diff = self.sub(a, b)?;
        let (r, c) = self.shape_of(diff);
        let zeros = Matrix::zeros(r, c);
        self.l1_loss(diff, &zeros)
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let total = self.value(a).sum_f64();
        let value = Matrix::filled(1, 1, R::from_f64(total));
        self.push(value, Op::SumAll(a))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::Validation("concat_cols of zero parts".into()));
        }
        let rows = self.shape_of(parts[0]).0;
        let mut cols = 0;
        for &p in parts {
            let (r, c) = self.shape_of(p);
            if r != rows {
                return Err(Error::shape(
                    "concat_cols",
                    format!("part has {r} rows, expected {rows}"),
                ));
            }
            cols += c;
        }
        let mut value = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let part = &self.nodes[p.0].value;
            for r in 0..rows {
                let src = part.row(r);
                value.row_mut(r)[offset..offset + src.len()].copy_from_slice(src);
            }
            offset += part.cols();
        }
        Ok(self.push(value, Op::ConcatCols(parts.to_vec())))
    }

    /// Mean cross-entropy of one label per row against row-softmax of logits.
    pub fn cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let (rows, cols) = self.shape_of(logits);
        if labels.len() != rows {
            return Err(Error::shape(
                "cross_entropy",
                format!("{} labels for {rows} rows", labels.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= cols) {
            return Err(Error::Validation(format!(
                "label {bad} out of range for {cols} classes"
            )));
        }
        let x = self.value(logits);
        let mut total = 0.0f64;
        for (r, &label) in labels.iter().enumerate() {
            let row = x.row(r);
            let max = row.iter().map(|v| v.to_f64()).fold(f64::NEG_INFINITY, f64::max);
            let lse = max
                + row
                    .iter()
                    .map(|v| (v.to_f64() - max).exp())
                    .sum::<f64>()
                    .ln();
            total += lse - row[label].to_f64();
        }
        let value = Matrix::filled(1, 1, R::from_f64(total / rows as f64));
        Ok(self.push(
            value,
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
            },
        ))
    }

    fn binary_same_shape(&self, a: NodeId, b: NodeId, op: &'static str) -> Result<()> {
        let sa = self.shape_of(a);
        let sb = self.shape_of(b);
        if sa != sb {
            return Err(Error::shape(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    // -- backward -----------------------------------------------------------

    /// Reverse sweep from a scalar loss. Adjoints are propagated through
    /// local buffers and added into each node's persistent gradient, so
    /// calling twice doubles the gradients.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.shape_of(loss) != (1, 1) {
            return Err(Error::Validation(format!(
                "backward requires a scalar loss, got {:?}",
                self.shape_of(loss)
            )));
        }
        let mut adj: Vec<Option<Matrix<R>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(Matrix::filled(1, 1, R::one()));

        for id in (0..=loss.0).rev() {
            let Some(out_adj) = adj[id].take() else {
                continue;
            };
            self.propagate(id, &out_adj, &mut adj);
            let node = &mut self.nodes[id];
            match node.grad.as_mut() {
                Some(g) => g.add_assign(&out_adj),
                None => node.grad = Some(out_adj),
            }
        }
        Ok(())
    }

    fn accumulate(adj: &mut [Option<Matrix<R>>], id: NodeId, delta: Matrix<R>) {
        match adj[id.0].as_mut() {
            Some(g) => g.add_assign(&delta),
            None => adj[id.0] = Some(delta),
        }
    }

    fn propagate(&self, id: usize, g: &Matrix<R>, adj: &mut [Option<Matrix<R>>]) {
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let da = g.matmul(&self.nodes[b.0].value.transpose());
                let db = self.nodes[a.0].value.transpose().matmul(g);
                Self::accumulate(adj, *a, da);
                Self::accumulate(adj, *b, db);
            }
            Op::Transpose(a) => {
                Self::accumulate(adj, *a, g.transpose());
            }
            Op::Add(a, b) => {
                Self::accumulate(adj, *a, g.clone());
                Self::accumulate(adj, *b, g.clone());
            }
            Op::Sub(a, b) => {
                Self::accumulate(adj, *a, g.clone());
                Self::accumulate(adj, *b, g.scale(-R::one()));
            }
            Op::Mul(a, b) => {
                let da = g.zip_map(&self.nodes[b.0].value, |x, y| x * y);
                let db = g.zip_map(&self.nodes[a.0].value, |x, y| x * y);
                Self::accumulate(adj, *a, da);
                Self::accumulate(adj, *b, db);
            }
            Op::Scale(a, factor) => {
                Self::accumulate(adj, *a, g.scale(*factor));
            }
            Op::AddRow(a, row) => {
                Self::accumulate(adj, *a, g.clone());
                let mut drow = Matrix::zeros(1, g.cols());
                for r in 0..g.rows() {
                    drow.add_assign(&Matrix::from_vec(1, g.cols(), g.row(r).to_vec()).unwrap());
                }
                Self::accumulate(adj, *row, drow);
            }
            Op::Relu(a) => {
                let x = &self.nodes[a.0].value;
                let da = g.zip_map(x, |gv, xv| if xv > R::zero() { gv } else { R::zero() });
                Self::accumulate(adj, *a, da);
            }
            Op::Gelu(a) => {
                let x = &self.nodes[a.0].value;
                let da = g.zip_map(x, |gv, xv| {
                    R::from_f64(gv.to_f64() * gelu_grad_f64(xv.to_f64()))
                });
                Self::accumulate(adj, *a, da);
            }
            Op::LayerNorm { x, gain, bias, eps } => {
                let xv = &self.nodes[x.0].value;
                let gv = &self.nodes[gain.0].value;
                let n = xv.cols();
                let nf = n as f64;
                let mut dx = Matrix::zeros(xv.rows(), n);
                let mut dgain = Matrix::zeros(1, n);
                let mut dbias = Matrix::zeros(1, n);
                for r in 0..xv.rows() {
                    let row = xv.row(r);
                    let grow = g.row(r);
                    let mean = row.iter().map(|v| v.to_f64()).sum::<f64>() / nf;
                    let var = row
                        .iter()
                        .map(|v| {
                            let d = v.to_f64() - mean;
                            d * d
                        })
                        .sum::<f64>()
                        / nf;
                    let inv = 1.0 / (var + eps).sqrt();
                    // xhat and upstream-through-gain in f64
                    let xhat: Vec<f64> =
                        row.iter().map(|v| (v.to_f64() - mean) * inv).collect();
                    let dxhat: Vec<f64> = grow
                        .iter()
                        .zip(gv.as_slice())
                        .map(|(gg, gn)| gg.to_f64() * gn.to_f64())
                        .collect();
                    let mean_dxhat = dxhat.iter().sum::<f64>() / nf;
                    let mean_dxhat_xhat =
                        dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum::<f64>() / nf;
                    let dxr = dx.row_mut(r);
                    for c in 0..n {
                        dxr[c] = R::from_f64(
                            (dxhat[c] - mean_dxhat - xhat[c] * mean_dxhat_xhat) * inv,
                        );
                    }
                    for c in 0..n {
                        let cur = dgain.as_slice()[c];
                        dgain.as_mut_slice()[c] =
                            cur + R::from_f64(grow[c].to_f64() * xhat[c]);
                        let curb = dbias.as_slice()[c];
                        dbias.as_mut_slice()[c] = curb + grow[c];
                    }
                }
                Self::accumulate(adj, *x, dx);
                Self::accumulate(adj, *gain, dgain);
                Self::accumulate(adj, *bias, dbias);
            }
            Op::SoftmaxRows(a) => {
                let y = &self.nodes[id].value;
                let mut da = Matrix::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let yr = y.row(r);
                    let gr = g.row(r);
                    let dot = yr
                        .iter()
                        .zip(gr.iter())
                        .map(|(a, b)| a.to_f64() * b.to_f64())
                        .sum::<f64>();
                    let dr = da.row_mut(r);
                    for c in 0..yr.len() {
                        dr[c] = R::from_f64(yr[c].to_f64() * (gr[c].to_f64() - dot));
                    }
                }
                Self::accumulate(adj, *a, da);
            }
            Op::DepthwiseConv { x, kernels } => {
                let xv = &self.nodes[x.0].value;
                let kv = &self.nodes[kernels.0].value;
                let width = kv.rows();
                let half = width / 2;
                let (t_len, d) = xv.shape();
                let mut dx = Matrix::zeros(t_len, d);
                let mut dk = Matrix::zeros(width, d);
                for t in 0..t_len {
                    let grow = g.row(t);
                    for w in 0..width {
                        let src = t as isize + w as isize - half as isize;
                        if src < 0 || src >= t_len as isize {
                            continue;
                        }
                        let s = src as usize;
                        let krow = kv.row(w);
                        let xrow = xv.row(s);
                        let dxrow = dx.row_mut(s);
                        for c in 0..d {
                            dxrow[c] += krow[c] * grow[c];
                        }
                        let dkrow = dk.row_mut(w);
                        for c in 0..d {
                            dkrow[c] += xrow[c] * grow[c];
                        }
                    }
                }
                Self::accumulate(adj, *x, dx);
                Self::accumulate(adj, *kernels, dk);
            }
            Op::L1Loss { x, target } => {
                let xv = &self.nodes[x.0].value;
                let scale = g.get(0, 0).to_f64() / xv.len() as f64;
                let dx = xv.zip_map(target, |a, t| {
                    let d = a - t;
                    if d > R::zero() {
                        R::from_f64(scale)
                    } else if d < R::zero() {
                        R::from_f64(-scale)
                    } else {
                        R::zero()
                    }
                });
                Self::accumulate(adj, *x, dx);
            }
            Op::SumAll(a) => {
                let (r, c) = self.nodes[a.0].value.shape();
                let da = Matrix::filled(r, c, g.get(0, 0));
                Self::accumulate(adj, *a, da);
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (rows, cols) = self.nodes[p.0].value.shape();
                    let mut dp = Matrix::zeros(rows, cols);
                    for r in 0..rows {
                        dp.row_mut(r)
                            .copy_from_slice(&g.row(r)[offset..offset + cols]);
                    }
                    offset += cols;
                    Self::accumulate(adj, p, dp);
                }
            }
            Op::CrossEntropy { logits, labels } => {
                let x = &self.nodes[logits.0].value;
                let scale = g.get(0, 0).to_f64() / x.rows() as f64;
                let mut dx = Matrix::zeros(x.rows(), x.cols());
                for (r, &label) in labels.iter().enumerate() {
                    let row = x.row(r);
                    let max = row.iter().map(|v| v.to_f64()).fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = row.iter().map(|v| (v.to_f64() - max).exp()).collect();
                    let denom: f64 = exps.iter().sum();
                    let dr = dx.row_mut(r);
                    for c in 0..row.len() {
                        let p = exps[c] / denom;
                        let delta = if c == label { 1.0 } else { 0.0 };
                        dr[c] = R::from_f64((p - delta) * scale);
                    }
                }
                Self::accumulate(adj, *logits, dx);
            }
        }
    }
}
