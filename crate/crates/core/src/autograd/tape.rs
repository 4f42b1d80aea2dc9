use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::graph::PropagationOperator;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Identifies one dropout stream: the same key always yields the same mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DropoutKey {
    pub seed: u64,
    pub layer: u32,
    pub epoch: u32,
}

enum Op<'g> {
    Leaf,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    Spmm(&'g PropagationOperator, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    ScaleConst(NodeId, f64),
    ScaleBy(NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Relu(NodeId),
    Mask(NodeId, Matrix),
    LogSoftmaxRows(NodeId),
    NllLoss(NodeId, Vec<(usize, usize)>),
    Sum(NodeId),
}

struct Node<'g> {
    op: Op<'g>,
    value: Matrix,
}

/// Append-only record of a forward computation. Insertion order is a
/// topological order; [`Tape::backward`] walks it in reverse.
#[derive(Default)]
pub struct Tape<'g> {
    nodes: Vec<Node<'g>>,
}

fn shape_err(what: &str, a: &Matrix, b: &Matrix) -> Error {
    Error::DimensionMismatch(format!("{what}: {}x{} with {}x{}", a.rows(), a.cols(), b.rows(), b.cols()))
}

impl<'g> Tape<'g> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    /// Which ReLU inputs were positive, in recording order. Two forward
    /// passes with equal signatures lie on the same smooth piece.
    pub fn relu_signature(&self) -> Vec<bool> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(a) => Some(a),
                _ => None,
            })
            .flat_map(|a| self.value(a).as_slice().iter().map(|&v| v > 0.0))
            .collect()
    }

    fn push(&mut self, op: Op<'g>, value: Matrix) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    /// Constant input; receives no gradient.
    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        self.push(Op::Param(id), store.value(id).clone())
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), value))
    }

    /// `P·a` with `P` held constant.
    pub fn spmm_const(&mut self, p: &'g PropagationOperator, a: NodeId) -> Result<NodeId> {
        let value = p.spmm(self.value(a))?;
        Ok(self.push(Op::Spmm(p, a), value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add(a, b), value))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).sub(self.value(b))?;
        Ok(self.push(Op::Sub(a, b), value))
    }

    pub fn scale_const(&mut self, a: NodeId, s: f64) -> NodeId {
        let value = self.value(a).scale(s);
        self.push(Op::ScaleConst(a, s), value)
    }

    /// `s·a` where `s` is a 1x1 node.
    pub fn scale(&mut self, a: NodeId, s: NodeId) -> Result<NodeId> {
        let sv = self.value(s);
        if sv.shape() != (1, 1) {
            return Err(shape_err("scale by non-scalar", self.value(a), sv));
        }
        let value = self.value(a).scale(sv.item());
        Ok(self.push(Op::ScaleBy(a, s), value))
    }

    /// Adds a `1×f` row to every row of `a`.
    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(bias));
        if bv.rows() != 1 || bv.cols() != av.cols() {
            return Err(shape_err("add_bias", av, bv));
        }
        let mut value = av.clone();
        for r in 0..value.rows() {
            for (v, b) in value.row_mut(r).iter_mut().zip(bv.as_slice()) {
                *v += b;
            }
        }
        Ok(self.push(Op::AddBias(a, bias), value))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(|v| v.max(0.0));
        self.push(Op::Relu(a), value)
    }

    /// Inverted dropout. Identity in eval mode or at rate 0.
    pub fn dropout(&mut self, a: NodeId, rate: f64, key: DropoutKey, mode: Mode) -> Result<NodeId> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::OutOfRange { name: "dropout", value: rate, range: "[0, 1)" });
        }
        if mode == Mode::Eval || rate == 0.0 {
            return Ok(a);
        }
        let (rows, cols) = self.value(a).shape();
        let mask = dropout_mask(rows, cols, rate, key);
        let value = self.value(a).zip_map(&mask, |v, m| v * m);
        Ok(self.push(Op::Mask(a, mask), value))
    }

    pub fn log_softmax_rows(&mut self, a: NodeId) -> NodeId {
        let x = self.value(a);
        let mut value = x.clone();
        for r in 0..x.rows() {
            let row = value.row_mut(r);
            let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            for v in row.iter_mut() {
                *v -= lse;
            }
        }
        self.push(Op::LogSoftmaxRows(a), value)
    }

    /// Mean of `−logp[row, label]` over the rows in `mask`.
    pub fn nll_loss(&mut self, logp: NodeId, labels: &[usize], mask: &[usize]) -> Result<NodeId> {
        if mask.is_empty() {
            return Err(Error::EmptyMask);
        }
        let lp = self.value(logp);
        if labels.len() != lp.rows() {
            return Err(Error::DimensionMismatch(format!("{} labels for {} rows", labels.len(), lp.rows())));
        }
        let mut targets = Vec::with_capacity(mask.len());
        let mut total = 0.0;
        for &r in mask {
            let label = labels[r];
            if r >= lp.rows() || label >= lp.cols() {
                return Err(Error::DimensionMismatch(format!(
                    "target ({r}, {label}) outside {}x{} log-probabilities",
                    lp.rows(),
                    lp.cols()
                )));
            }
            total -= lp.get(r, label);
            targets.push((r, label));
        }
        let value = Matrix::scalar(total / mask.len() as f64);
        Ok(self.push(Op::NllLoss(logp, targets), value))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let value = Matrix::scalar(self.value(a).sum());
        self.push(Op::Sum(a), value)
    }

    /// Reverse pass from a scalar `loss`, accumulating into the parameter
    /// gradients of `store`.
    pub fn backward(&self, loss: NodeId, store: &mut ParamStore) -> Result<()> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(Error::NonScalarLoss { rows: lv.rows(), cols: lv.cols() });
        }
        let mut adj: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[loss.0] = Some(Matrix::scalar(1.0));

        fn accum(adj: &mut [Option<Matrix>], id: NodeId, g: Matrix) {
            match &mut adj[id.0] {
                Some(acc) => acc.axpy(1.0, &g),
                slot @ None => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param(pid) => store.get_mut(*pid).grad.axpy(1.0, &g),
                Op::MatMul(a, b) => {
                    accum(&mut adj, *a, g.matmul_t(self.value(*b)));
                    accum(&mut adj, *b, self.value(*a).t_matmul(&g));
                }
                // P is symmetric, so Pᵀg = Pg
                Op::Spmm(p, a) => accum(&mut adj, *a, p.spmm_unchecked(&g)),
                Op::Add(a, b) => {
                    accum(&mut adj, *b, g.clone());
                    accum(&mut adj, *a, g);
                }
                Op::Sub(a, b) => {
                    accum(&mut adj, *b, g.scale(-1.0));
                    accum(&mut adj, *a, g);
                }
                Op::ScaleConst(a, s) => accum(&mut adj, *a, g.scale(*s)),
                Op::ScaleBy(a, s) => {
                    let av = self.value(*a);
                    let gs: f64 = g.as_slice().iter().zip(av.as_slice()).map(|(x, y)| x * y).sum();
                    accum(&mut adj, *s, Matrix::scalar(gs));
                    accum(&mut adj, *a, g.scale(self.value(*s).item()));
                }
                Op::AddBias(a, b) => {
                    let mut gb = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (acc, v) in gb.as_mut_slice().iter_mut().zip(g.row(r)) {
                            *acc += v;
                        }
                    }
                    accum(&mut adj, *b, gb);
                    accum(&mut adj, *a, g);
                }
                Op::Relu(a) => {
                    // subgradient 1 at exactly 0: the all-pass initialization
                    // parks every layer below K there, and 0 would freeze them
                    let ga = g.zip_map(self.value(*a), |gv, x| if x >= 0.0 { gv } else { 0.0 });
                    accum(&mut adj, *a, ga);
                }
                Op::Mask(a, mask) => accum(&mut adj, *a, g.zip_map(mask, |gv, m| gv * m)),
                Op::LogSoftmaxRows(a) => {
                    let y = &node.value;
                    let mut ga = g.clone();
                    for r in 0..g.rows() {
                        let gsum: f64 = g.row(r).iter().sum();
                        for (out, &yv) in ga.row_mut(r).iter_mut().zip(y.row(r)) {
                            *out -= yv.exp() * gsum;
                        }
                    }
                    accum(&mut adj, *a, ga);
                }
                Op::NllLoss(logp, targets) => {
                    let (rows, cols) = self.value(*logp).shape();
                    let mut ga = Matrix::zeros(rows, cols);
                    let w = -g.item() / targets.len() as f64;
                    for &(r, c) in targets {
                        ga.set(r, c, ga.get(r, c) + w);
                    }
                    accum(&mut adj, *logp, ga);
                }
                Op::Sum(a) => {
                    let (rows, cols) = self.value(*a).shape();
                    accum(&mut adj, *a, Matrix::filled(rows, cols, g.item()));
                }
            }
        }
        Ok(())
    }
}

/// Keep-mask scaled by `1/(1−rate)`, drawn from a ChaCha stream selected by
/// `(layer, epoch)` under `seed`.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, key: DropoutKey) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(key.seed);
    rng.set_stream((u64::from(key.layer) << 32) | u64::from(key.epoch));
    let keep = 1.0 / (1.0 - rate);
    let data = (0..rows * cols).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect();
    Matrix::from_vec(rows, cols, data).expect("mask has rows*cols entries")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::Group;

    #[test]
    fn relu_blocks_negative_inputs() {
        let mut store = ParamStore::new();
        let id = store.add("a", Matrix::from_vec(1, 2, vec![-2.0, 3.0]).unwrap(), Group::Weight);
        let mut tape = Tape::new();
        let a = tape.param(&store, id);
        let r = tape.relu(a);
        let loss = tape.sum(r);
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.grad(id).as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn log_softmax_uniform_row() {
        let mut tape = Tape::new();
        let a = tape.constant(Matrix::zeros(1, 2));
        let l = tape.log_softmax_rows(a);
        let ln2 = 2f64.ln();
        assert!(tape.value(l).as_slice().iter().all(|v| (v + ln2).abs() < 1e-15));
    }

    #[test]
    fn nll_of_confident_correct_logits_is_tiny() {
        let mut tape = Tape::new();
        let logits = Matrix::from_rows(&[vec![30.0, -30.0], vec![-30.0, 30.0], vec![30.0, -30.0]]).unwrap();
        let a = tape.constant(logits);
        let lp = tape.log_softmax_rows(a);
        let loss = tape.nll_loss(lp, &[0, 1, 0], &[0, 1, 2]).unwrap();
        // closed form: ln(1 + e^{-60})
        assert!(tape.value(loss).item() <= 1e-6);
        assert!(matches!(tape.nll_loss(lp, &[0, 1, 0], &[]), Err(Error::EmptyMask)));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut store = ParamStore::new();
        let mut tape = Tape::new();
        let a = tape.constant(Matrix::zeros(2, 2));
        assert!(matches!(tape.backward(a, &mut store), Err(Error::NonScalarLoss { .. })));
    }

    #[test]
    fn unrelated_parameter_gets_zero_gradient() {
        let mut store = ParamStore::new();
        let used = store.add("used", Matrix::filled(2, 2, 0.5), Group::Weight);
        let unused = store.add("unused", Matrix::filled(2, 2, 0.5), Group::Weight);
        let mut tape = Tape::new();
        let u = tape.param(&store, used);
        let _ = tape.param(&store, unused);
        let loss = tape.sum(u);
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.grad(unused), &Matrix::zeros(2, 2));
        assert_eq!(store.grad(used), &Matrix::filled(2, 2, 1.0));
    }

    #[test]
    fn shared_subexpressions_accumulate() {
        // loss = sum(a + a) ⇒ grad 2
        let mut store = ParamStore::new();
        let id = store.add("a", Matrix::filled(1, 3, 1.0), Group::Weight);
        let mut tape = Tape::new();
        let a = tape.param(&store, id);
        let s = tape.add(a, a).unwrap();
        let loss = tape.sum(s);
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.grad(id), &Matrix::filled(1, 3, 2.0));
    }

    #[test]
    fn dropout_modes() {
        let key = DropoutKey { seed: 3, layer: 1, epoch: 7 };
        let mut tape = Tape::new();
        let a = tape.constant(Matrix::filled(200, 50, 1.0));
        let e = tape.dropout(a, 0.5, key, Mode::Eval).unwrap();
        assert_eq!(e, a);
        let t = tape.dropout(a, 0.5, key, Mode::Train).unwrap();
        let v = tape.value(t);
        assert!(v.as_slice().iter().all(|&x| x == 0.0 || x == 2.0));
        let mean = v.sum() / 10_000.0;
        assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
        assert_eq!(dropout_mask(4, 4, 0.3, key), dropout_mask(4, 4, 0.3, key));
        let other = DropoutKey { epoch: 8, ..key };
        assert_ne!(dropout_mask(8, 8, 0.5, key), dropout_mask(8, 8, 0.5, other));
        assert!(tape.dropout(a, 1.0, key, Mode::Train).is_err());
    }

    #[test]
    fn shape_mismatch_errors() {
        let mut tape = Tape::new();
        let a = tape.constant(Matrix::zeros(2, 3));
        let b = tape.constant(Matrix::zeros(2, 3));
        assert!(tape.matmul(a, b).is_err());
        let bias = tape.constant(Matrix::zeros(1, 2));
        assert!(tape.add_bias(a, bias).is_err());
        assert!(tape.scale(a, b).is_err());
    }
}
