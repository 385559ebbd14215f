//! Minimal reverse-mode differentiation over a fixed set of matrix primitives.
//!
//! Nodes are appended in evaluation order and only ever reference earlier
//! nodes, so walking the node list backwards is a reverse topological order.

use std::collections::BTreeMap;

use super::matrix::{dot, matmul, matmul_nt, matmul_tn, norm, DenseMatrix};
use super::ops;
use crate::error::{Error, Result};

/// Identifies a trainable parameter block for gradient accumulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamSlot(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param(ParamSlot),
    ParamRows {
        slot: ParamSlot,
        indices: Vec<usize>,
        total_rows: usize,
    },
    GatherRows {
        input: NodeId,
        indices: Vec<usize>,
    },
    MatMul(NodeId, NodeId),
    Affine {
        x: NodeId,
        w: NodeId,
        bias: NodeId,
    },
    Relu(NodeId),
    Sigmoid(NodeId),
    CosineRows {
        a: NodeId,
        b: NodeId,
        eps: f64,
    },
    PairedCosine {
        a: NodeId,
        b: NodeId,
        eps: f64,
    },
    PairedDot(NodeId, NodeId),
    RowNormalize {
        input: NodeId,
        eps: f64,
    },
    RowSoftmax(NodeId),
    Add(NodeId, NodeId),
    ScaleShift {
        input: NodeId,
        scale: f64,
        shift: f64,
    },
    SquaredError {
        pred: NodeId,
        targets: Vec<f64>,
    },
    PairwiseDistance(NodeId),
}

impl Op {
    fn inputs(&self) -> Vec<NodeId> {
        match self {
            Op::Constant | Op::Param(_) | Op::ParamRows { .. } => vec![],
            Op::GatherRows { input, .. }
            | Op::Relu(input)
            | Op::Sigmoid(input)
            | Op::RowNormalize { input, .. }
            | Op::RowSoftmax(input)
            | Op::ScaleShift { input, .. }
            | Op::PairwiseDistance(input)
            | Op::SquaredError { pred: input, .. } => vec![*input],
            Op::MatMul(a, b)
            | Op::PairedDot(a, b)
            | Op::Add(a, b)
            | Op::CosineRows { a, b, .. }
            | Op::PairedCosine { a, b, .. } => vec![*a, *b],
            Op::Affine { x, w, bias } => vec![*x, *w, *bias],
        }
    }

    fn is_leaf(&self) -> bool {
        matches!(self, Op::Constant | Op::Param(_) | Op::ParamRows { .. })
    }
}

struct Node {
    op: Op,
    value: DenseMatrix,
}

/// Per-parameter gradients produced by [`Tape::backward`].
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    by_slot: BTreeMap<ParamSlot, DenseMatrix>,
}

impl Gradients {
    pub fn get(&self, slot: ParamSlot) -> Option<&DenseMatrix> {
        self.by_slot.get(&slot)
    }

    pub fn get_mut(&mut self, slot: ParamSlot) -> Option<&mut DenseMatrix> {
        self.by_slot.get_mut(&slot)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamSlot, &DenseMatrix)> {
        self.by_slot.iter().map(|(s, m)| (*s, m))
    }

    fn accumulate(&mut self, slot: ParamSlot, g: &DenseMatrix) -> Result<()> {
        match self.by_slot.get_mut(&slot) {
            Some(acc) => acc.add_assign(g),
            None => {
                self.by_slot.insert(slot, g.clone());
                Ok(())
            }
        }
    }

    fn accumulate_rows(
        &mut self,
        slot: ParamSlot,
        total_rows: usize,
        indices: &[usize],
        g: &DenseMatrix,
    ) -> Result<()> {
        let acc = self
            .by_slot
            .entry(slot)
            .or_insert_with(|| DenseMatrix::zeros(total_rows, g.cols()));
        if acc.shape() != (total_rows, g.cols()) {
            return Err(Error::dim(
                "param_rows",
                format!("gradient {:?} vs {:?}", acc.shape(), (total_rows, g.cols())),
            ));
        }
        scatter_add(acc, indices, g);
        Ok(())
    }
}

/// Records primitive applications and their forward values.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &DenseMatrix {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.value(id).data()[0]
    }

    fn push_leaf(&mut self, op: Op, value: DenseMatrix) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    fn push(&mut self, op: Op) -> Result<NodeId> {
        let value = compute(&op, |id| &self.nodes[id.0].value)?;
        self.nodes.push(Node { op, value });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: DenseMatrix) -> NodeId {
        self.push_leaf(Op::Constant, value)
    }

    /// Registers a whole parameter block.
    pub fn param(&mut self, slot: ParamSlot, value: &DenseMatrix) -> NodeId {
        self.push_leaf(Op::Param(slot), value.clone())
    }

    /// Registers only the listed rows of a parameter block; the gradient is
    /// scattered back into a full-size matrix.
    pub fn param_rows(
        &mut self,
        slot: ParamSlot,
        value: &DenseMatrix,
        indices: &[usize],
    ) -> Result<NodeId> {
        let rows = value.gather_rows(indices)?;
        Ok(self.push_leaf(
            Op::ParamRows {
                slot,
                indices: indices.to_vec(),
                total_rows: value.rows(),
            },
            rows,
        ))
    }

    pub fn gather_rows(&mut self, input: NodeId, indices: &[usize]) -> Result<NodeId> {
        self.push(Op::GatherRows {
            input,
            indices: indices.to_vec(),
        })
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::MatMul(a, b))
    }

    pub fn affine(&mut self, x: NodeId, w: NodeId, bias: NodeId) -> Result<NodeId> {
        self.push(Op::Affine { x, w, bias })
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Sigmoid(x))
    }

    pub fn cosine_rows(&mut self, a: NodeId, b: NodeId, eps: f64) -> Result<NodeId> {
        self.push(Op::CosineRows { a, b, eps })
    }

    pub fn paired_cosine(&mut self, a: NodeId, b: NodeId, eps: f64) -> Result<NodeId> {
        self.push(Op::PairedCosine { a, b, eps })
    }

    pub fn paired_dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::PairedDot(a, b))
    }

    pub fn row_normalize(&mut self, input: NodeId, eps: f64) -> Result<NodeId> {
        self.push(Op::RowNormalize { input, eps })
    }

    pub fn row_softmax(&mut self, input: NodeId) -> Result<NodeId> {
        self.push(Op::RowSoftmax(input))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Add(a, b))
    }

    /// `scale · x + shift`, elementwise.
    pub fn scale_shift(&mut self, input: NodeId, scale: f64, shift: f64) -> Result<NodeId> {
        self.push(Op::ScaleShift {
            input,
            scale,
            shift,
        })
    }

    pub fn scale(&mut self, input: NodeId, scale: f64) -> Result<NodeId> {
        self.scale_shift(input, scale, 0.0)
    }

    /// `Σ (target − pred)²` reduced to a 1×1 node.
    pub fn squared_error(&mut self, pred: NodeId, targets: &[f64]) -> Result<NodeId> {
        self.push(Op::SquaredError {
            pred,
            targets: targets.to_vec(),
        })
    }

    /// `Σ_{i<j} ‖x_i − x_j‖²` reduced to a 1×1 node.
    pub fn pairwise_distance(&mut self, input: NodeId) -> Result<NodeId> {
        self.push(Op::PairwiseDistance(input))
    }

    /// Recomputes every node from the recorded leaves.
    pub fn replay(&self) -> Result<Vec<DenseMatrix>> {
        let mut values: Vec<DenseMatrix> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = if node.op.is_leaf() {
                node.value.clone()
            } else {
                compute(&node.op, |id| &values[id.0])?
            };
            values.push(v);
        }
        Ok(values)
    }

    /// Reverse pass from a scalar `output`, returning gradients for every
    /// parameter block reachable from it.
    pub fn backward(&self, output: NodeId) -> Result<Gradients> {
        if self.value(output).shape() != (1, 1) {
            return Err(Error::dim(
                "backward",
                format!("output must be 1x1, got {:?}", self.value(output).shape()),
            ));
        }
        let mut adjoints: Vec<Option<DenseMatrix>> = vec![None; output.0 + 1];
        adjoints[output.0] = Some(DenseMatrix::scalar(1.0));
        let mut grads = Gradients::default();

        for idx in (0..=output.0).rev() {
            let Some(g) = adjoints[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            debug_assert!(node.op.inputs().iter().all(|i| i.0 < idx));
            let val = |id: NodeId| &self.nodes[id.0].value;
            match &node.op {
                Op::Constant => {}
                Op::Param(slot) => grads.accumulate(*slot, &g)?,
                Op::ParamRows {
                    slot,
                    indices,
                    total_rows,
                } => grads.accumulate_rows(*slot, *total_rows, indices, &g)?,
                Op::GatherRows { input, indices } => {
                    let (rows, cols) = val(*input).shape();
                    let mut gi = DenseMatrix::zeros(rows, cols);
                    scatter_add(&mut gi, indices, &g);
                    accumulate(&mut adjoints, *input, gi)?;
                }
                Op::MatMul(a, b) => {
                    let ga = matmul_nt(&g, val(*b))?;
                    let gb = matmul_tn(val(*a), &g)?;
                    accumulate(&mut adjoints, *a, ga)?;
                    accumulate(&mut adjoints, *b, gb)?;
                }
                Op::Affine { x, w, bias } => {
                    let gx = matmul_nt(&g, val(*w))?;
                    let gw = matmul_tn(val(*x), &g)?;
                    let mut gb = DenseMatrix::zeros(1, g.cols());
                    for r in g.row_iter() {
                        for (acc, v) in gb.row_mut(0).iter_mut().zip(r) {
                            *acc += v;
                        }
                    }
                    accumulate(&mut adjoints, *x, gx)?;
                    accumulate(&mut adjoints, *w, gw)?;
                    accumulate(&mut adjoints, *bias, gb)?;
                }
                Op::Relu(x) => {
                    let mut gx = g;
                    for (gv, xv) in gx.data_mut().iter_mut().zip(val(*x).data()) {
                        if *xv <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                    accumulate(&mut adjoints, *x, gx)?;
                }
                Op::Sigmoid(x) => {
                    let mut gx = g;
                    for (gv, y) in gx.data_mut().iter_mut().zip(node.value.data()) {
                        *gv *= y * (1.0 - y);
                    }
                    accumulate(&mut adjoints, *x, gx)?;
                }
                Op::CosineRows { a, b, eps } => {
                    let (ga, gb) = cosine_rows_backward(val(*a), val(*b), &node.value, &g, *eps)?;
                    accumulate(&mut adjoints, *a, ga)?;
                    accumulate(&mut adjoints, *b, gb)?;
                }
                Op::PairedCosine { a, b, eps } => {
                    let (ga, gb) = paired_cosine_backward(val(*a), val(*b), &node.value, &g, *eps);
                    accumulate(&mut adjoints, *a, ga)?;
                    accumulate(&mut adjoints, *b, gb)?;
                }
                Op::PairedDot(a, b) => {
                    let (av, bv) = (val(*a), val(*b));
                    let mut ga = bv.clone();
                    let mut gb = av.clone();
                    for r in 0..g.rows() {
                        let s = g.get(r, 0);
                        ga.row_mut(r).iter_mut().for_each(|v| *v *= s);
                        gb.row_mut(r).iter_mut().for_each(|v| *v *= s);
                    }
                    accumulate(&mut adjoints, *a, ga)?;
                    accumulate(&mut adjoints, *b, gb)?;
                }
                Op::RowNormalize { input, eps } => {
                    let x = val(*input);
                    let y = &node.value;
                    let mut gx = g;
                    for r in 0..x.rows() {
                        let sum: f64 = x.row(r).iter().sum();
                        let gr = gx.row_mut(r);
                        if sum > *eps {
                            let proj = dot(gr, y.row(r));
                            gr.iter_mut().for_each(|v| *v = (*v - proj) / sum);
                        } else {
                            gr.iter_mut().for_each(|v| *v /= *eps);
                        }
                    }
                    accumulate(&mut adjoints, *input, gx)?;
                }
                Op::RowSoftmax(input) => {
                    let y = &node.value;
                    let mut gx = g;
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let gr = gx.row_mut(r);
                        let proj = dot(gr, yr);
                        for (gv, yv) in gr.iter_mut().zip(yr) {
                            *gv = yv * (*gv - proj);
                        }
                    }
                    accumulate(&mut adjoints, *input, gx)?;
                }
                Op::Add(a, b) => {
                    accumulate(&mut adjoints, *a, g.clone())?;
                    accumulate(&mut adjoints, *b, g)?;
                }
                Op::ScaleShift { input, scale, .. } => {
                    let s = *scale;
                    accumulate(&mut adjoints, *input, g.map(|v| v * s))?;
                }
                Op::SquaredError { pred, targets } => {
                    let s = g.data()[0];
                    let p = val(*pred);
                    let data = p
                        .data()
                        .iter()
                        .zip(targets)
                        .map(|(pv, t)| 2.0 * s * (pv - t))
                        .collect();
                    accumulate(&mut adjoints, *pred, DenseMatrix::from_vec(p.rows(), 1, data)?)?;
                }
                Op::PairwiseDistance(input) => {
                    let s = g.data()[0];
                    let x = val(*input);
                    let k = x.rows() as f64;
                    let mut col_sum = vec![0.0; x.cols()];
                    for r in x.row_iter() {
                        for (c, v) in col_sum.iter_mut().zip(r) {
                            *c += v;
                        }
                    }
                    let mut gx = x.clone();
                    for r in 0..x.rows() {
                        for (gv, c) in gx.row_mut(r).iter_mut().zip(&col_sum) {
                            *gv = 2.0 * s * (k * *gv - c);
                        }
                    }
                    accumulate(&mut adjoints, *input, gx)?;
                }
            }
        }
        Ok(grads)
    }
}

fn accumulate(adjoints: &mut [Option<DenseMatrix>], id: NodeId, g: DenseMatrix) -> Result<()> {
    match &mut adjoints[id.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

fn scatter_add(target: &mut DenseMatrix, indices: &[usize], g: &DenseMatrix) {
    for (r, &i) in indices.iter().enumerate() {
        for (t, v) in target.row_mut(i).iter_mut().zip(g.row(r)) {
            *t += v;
        }
    }
}

fn compute<'a>(op: &Op, val: impl Fn(NodeId) -> &'a DenseMatrix) -> Result<DenseMatrix> {
    Ok(match op {
        Op::Constant | Op::Param(_) | Op::ParamRows { .. } => {
            unreachable!("leaf values are supplied at registration")
        }
        Op::GatherRows { input, indices } => val(*input).gather_rows(indices)?,
        Op::MatMul(a, b) => matmul(val(*a), val(*b))?,
        Op::Affine { x, w, bias } => ops::affine(val(*x), val(*w), val(*bias))?,
        Op::Relu(x) => ops::relu(val(*x)),
        Op::Sigmoid(x) => ops::sigmoid(val(*x)),
        Op::CosineRows { a, b, eps } => ops::cosine_rows(val(*a), val(*b), *eps)?,
        Op::PairedCosine { a, b, eps } => ops::paired_cosine(val(*a), val(*b), *eps)?,
        Op::PairedDot(a, b) => ops::paired_dot(val(*a), val(*b))?,
        Op::RowNormalize { input, eps } => ops::row_normalize(val(*input), *eps)?,
        Op::RowSoftmax(input) => ops::row_softmax(val(*input)),
        Op::Add(a, b) => {
            let mut out = val(*a).clone();
            out.add_assign(val(*b))?;
            out
        }
        Op::ScaleShift {
            input,
            scale,
            shift,
        } => val(*input).map(|v| scale * v + shift),
        Op::SquaredError { pred, targets } => {
            DenseMatrix::scalar(ops::squared_error_sum(val(*pred), targets)?)
        }
        Op::PairwiseDistance(input) => {
            DenseMatrix::scalar(ops::pairwise_sq_distance_sum(val(*input)))
        }
    })
}

fn cosine_rows_backward(
    a: &DenseMatrix,
    b: &DenseMatrix,
    out: &DenseMatrix,
    g: &DenseMatrix,
    eps: f64,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let na = ops::row_norms(a);
    let nb = ops::row_norms(b);
    let da: Vec<f64> = na.iter().map(|n| n.max(eps)).collect();
    let db: Vec<f64> = nb.iter().map(|n| n.max(eps)).collect();

    // ∂c_ij/∂a_i = b_j/(A_i B_j) − c_ij a_i/A_i²  (second term only when ‖a_i‖ > eps)
    let mut b_scaled = b.clone();
    for (j, d) in db.iter().enumerate() {
        b_scaled.row_mut(j).iter_mut().for_each(|v| *v /= d);
    }
    let mut a_scaled = a.clone();
    for (i, d) in da.iter().enumerate() {
        a_scaled.row_mut(i).iter_mut().for_each(|v| *v /= d);
    }

    let mut ga = matmul(g, &b_scaled)?;
    for i in 0..a.rows() {
        let s: f64 = dot(g.row(i), out.row(i));
        let norm_active = na[i] > eps;
        let ai = a.row(i);
        for (gv, av) in ga.row_mut(i).iter_mut().zip(ai) {
            *gv /= da[i];
            if norm_active {
                *gv -= s * av / (da[i] * da[i]);
            }
        }
    }

    let mut gb = matmul_tn(g, &a_scaled)?;
    for j in 0..b.rows() {
        let s: f64 = (0..a.rows()).map(|i| g.get(i, j) * out.get(i, j)).sum();
        let norm_active = nb[j] > eps;
        let bj = b.row(j);
        for (gv, bv) in gb.row_mut(j).iter_mut().zip(bj) {
            *gv /= db[j];
            if norm_active {
                *gv -= s * bv / (db[j] * db[j]);
            }
        }
    }
    Ok((ga, gb))
}

fn paired_cosine_backward(
    a: &DenseMatrix,
    b: &DenseMatrix,
    out: &DenseMatrix,
    g: &DenseMatrix,
    eps: f64,
) -> (DenseMatrix, DenseMatrix) {
    let mut ga = DenseMatrix::zeros(a.rows(), a.cols());
    let mut gb = DenseMatrix::zeros(b.rows(), b.cols());
    for i in 0..a.rows() {
        let (ai, bi) = (a.row(i), b.row(i));
        let (na, nb) = (norm(ai), norm(bi));
        let (da, db) = (na.max(eps), nb.max(eps));
        let c = out.get(i, 0);
        let s = g.get(i, 0);
        for (l, gv) in ga.row_mut(i).iter_mut().enumerate() {
            let mut v = bi[l] / (da * db);
            if na > eps {
                v -= c * ai[l] / (da * da);
            }
            *gv = s * v;
        }
        for (l, gv) in gb.row_mut(i).iter_mut().enumerate() {
            let mut v = ai[l] / (da * db);
            if nb > eps {
                v -= c * bi[l] / (db * db);
            }
            *gv = s * v;
        }
    }
    (ga, gb)
}
