//! Reverse-mode differentiation over tensor operations.
//!
//! A [`Graph`] is a tape: every operation appends a node holding its output
//! value, a zero-initialized gradient buffer, and a record of its inputs.
//! [`Graph::backward`] walks the tape in reverse and accumulates gradients
//! into every reachable node. The graph is rebuilt for each forward pass.
//!
//! Calling `backward` a second time without [`Graph::zero_grads`] is a
//! detected contract error rather than silent double accumulation.
//!
//! A graph is single-threaded; independent graphs share no state and may live
//! on different threads.

use crate::error::{Error, Result};
use crate::tensor::{self, Shape, Tensor, LOG_EPS, NORM_EPS};

/// Handle to a node in one specific [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatVec { m: NodeId, v: NodeId },
    Conv1d { x: NodeId, kernels: NodeId, bias: NodeId, k: usize },
    Relu { x: NodeId },
    Sigmoid { x: NodeId },
    Softmax { x: NodeId },
    CrossEntropy { p: NodeId, label: usize },
    Mul { a: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    Scale { x: NodeId, c: f64 },
    Reshape { x: NodeId },
    StackRows { rows: Vec<NodeId> },
    L1Sum { x: NodeId },
    GroupL2Sum { x: NodeId, groups: Vec<Vec<usize>>, gammas: Vec<f64> },
}

#[derive(Default)]
pub struct Graph {
    values: Vec<Tensor>,
    grads: Vec<Tensor>,
    ops: Vec<Op>,
    swept: bool,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn grad(&self, id: NodeId) -> &Tensor {
        &self.grads[id.0]
    }

    /// Scalar value of a one-element node.
    pub fn item(&self, id: NodeId) -> f64 {
        self.values[id.0].item()
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        let grad = value.zeros_like();
        self.values.push(value);
        self.grads.push(grad);
        self.ops.push(op);
        NodeId(self.values.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn scalar_leaf(&mut self, v: f64) -> Result<NodeId> {
        Ok(self.leaf(Tensor::scalar(v)?))
    }

    pub fn matvec(&mut self, m: NodeId, v: NodeId) -> Result<NodeId> {
        let out = tensor::matvec(self.value(m), self.value(v))?;
        Ok(self.push(out, Op::MatVec { m, v }))
    }

    pub fn conv1d(&mut self, x: NodeId, kernels: NodeId, bias: NodeId, k: usize) -> Result<NodeId> {
        let out = tensor::conv1d_same(self.value(x), self.value(kernels), self.value(bias), k)?;
        Ok(self.push(out, Op::Conv1d { x, kernels, bias, k }))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let out = tensor::relu(self.value(x));
        self.push(out, Op::Relu { x })
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let out = tensor::sigmoid(self.value(x));
        self.push(out, Op::Sigmoid { x })
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let out = tensor::softmax(self.value(x))?;
        Ok(self.push(out, Op::Softmax { x }))
    }

    pub fn cross_entropy(&mut self, p: NodeId, label: usize) -> Result<NodeId> {
        let ce = tensor::cross_entropy(self.value(p), label)?;
        let out = Tensor::scalar(ce)?;
        Ok(self.push(out, Op::CrossEntropy { p, label }))
    }

    /// Elementwise product of same-shape nodes.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::Dimension(format!(
                "mul shapes differ: {} vs {}",
                ta.shape(),
                tb.shape()
            )));
        }
        let data: Vec<f64> = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let out = match ta.shape() {
            Shape::Vector(_) => Tensor::vector(data)?,
            Shape::Matrix(r, c) => Tensor::matrix(r, c, data)?,
        };
        Ok(self.push(out, Op::Mul { a, b }))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = tensor::add(self.value(a), self.value(b))?;
        Ok(self.push(out, Op::Add { a, b }))
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let out = tensor::scale(self.value(x), c);
        self.push(out, Op::Scale { x, c })
    }

    /// Reinterprets a node's data under a new shape with the same element count.
    pub fn reshape(&mut self, x: NodeId, shape: Shape) -> Result<NodeId> {
        let out = self.value(x).reshaped(shape)?;
        Ok(self.push(out, Op::Reshape { x }))
    }

    /// Row vector of a (1 x n) matrix node as a length-n vector node.
    pub fn as_vector(&mut self, x: NodeId) -> Result<NodeId> {
        let n = self.value(x).numel();
        self.reshape(x, Shape::Vector(n))
    }

    pub fn stack_rows(&mut self, rows: &[NodeId]) -> Result<NodeId> {
        let tensors: Vec<&Tensor> = rows.iter().map(|&r| self.value(r)).collect();
        let out = tensor::stack_rows(&tensors)?;
        Ok(self.push(out, Op::StackRows { rows: rows.to_vec() }))
    }

    pub fn l1_sum(&mut self, x: NodeId) -> Result<NodeId> {
        let out = Tensor::scalar(tensor::l1_sum(self.value(x)))?;
        Ok(self.push(out, Op::L1Sum { x }))
    }

    pub fn group_l2_sum(
        &mut self,
        x: NodeId,
        groups: &[Vec<usize>],
        gammas: &[f64],
    ) -> Result<NodeId> {
        let out = Tensor::scalar(tensor::group_l2_sum(self.value(x), groups, gammas)?)?;
        Ok(self.push(
            out,
            Op::GroupL2Sum {
                x,
                groups: groups.to_vec(),
                gammas: gammas.to_vec(),
            },
        ))
    }

    /// Sums a non-empty list of scalar nodes.
    pub fn sum_scalars(&mut self, nodes: &[NodeId]) -> Result<NodeId> {
        let mut iter = nodes.iter();
        let first = *iter
            .next()
            .ok_or_else(|| Error::Contract("sum of zero scalars".into()))?;
        let mut acc = first;
        for &n in iter {
            acc = self.add(acc, n)?;
        }
        Ok(acc)
    }

    /// Resets every gradient buffer to zero and re-arms `backward`.
    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            g.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        self.swept = false;
    }

    /// Accumulates d root / d node into every node's gradient buffer.
    ///
    /// The root must be a scalar, and gradients must be zero (as they are at
    /// construction, or after [`Graph::zero_grads`]).
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        if !self.values[root.0].is_scalar() {
            return Err(Error::Contract(format!(
                "backward root must be scalar, got {}",
                self.values[root.0].shape()
            )));
        }
        if self.swept {
            return Err(Error::Contract(
                "backward called twice without zero_grads".into(),
            ));
        }
        self.swept = true;
        self.grads[root.0].data_mut()[0] += 1.0;

        for i in (0..=root.0).rev() {
            let out_grad = self.grads[i].clone();
            if out_grad.data().iter().all(|&v| v == 0.0) {
                continue;
            }
            let op = self.ops[i].clone();
            self.apply_backward(&op, i, &out_grad);
        }
        Ok(())
    }

    fn apply_backward(&mut self, op: &Op, out: usize, d_out: &Tensor) {
        match *op {
            Op::Leaf => {}
            Op::MatVec { m, v } => {
                let (rows, cols) = (self.values[m.0].rows(), self.values[m.0].cols());
                let m_val = self.values[m.0].clone();
                let v_val = self.values[v.0].clone();
                for i in 0..rows {
                    let di = d_out.data()[i];
                    for j in 0..cols {
                        self.grads[m.0].data_mut()[i * cols + j] += di * v_val.data()[j];
                        self.grads[v.0].data_mut()[j] += di * m_val.data()[i * cols + j];
                    }
                }
            }
            Op::Conv1d { x, kernels, bias, k } => {
                let (c_in, t) = (self.values[x.0].rows(), self.values[x.0].cols());
                let c_out = self.values[kernels.0].rows();
                let pad = (k - 1) / 2;
                let x_val = self.values[x.0].clone();
                let k_val = self.values[kernels.0].clone();
                for o in 0..c_out {
                    for tau in 0..t {
                        let g = d_out.data()[o * t + tau];
                        if g == 0.0 {
                            continue;
                        }
                        self.grads[bias.0].data_mut()[o] += g;
                        for i in 0..c_in {
                            for j in 0..k {
                                let src = tau as isize + j as isize - pad as isize;
                                if src >= 0 && (src as usize) < t {
                                    let s = src as usize;
                                    let kidx = o * c_in * k + i * k + j;
                                    self.grads[kernels.0].data_mut()[kidx] +=
                                        g * x_val.at(i, s);
                                    self.grads[x.0].data_mut()[i * t + s] +=
                                        g * k_val.data()[kidx];
                                }
                            }
                        }
                    }
                }
            }
            Op::Relu { x } => {
                let x_val = self.values[x.0].clone();
                for (gx, (&g, &xv)) in self.grads[x.0]
                    .data_mut()
                    .iter_mut()
                    .zip(d_out.data().iter().zip(x_val.data()))
                {
                    if xv > 0.0 {
                        *gx += g;
                    }
                }
            }
            Op::Sigmoid { x } => {
                let s_val = self.values[out].clone();
                for (gx, (&g, &s)) in self.grads[x.0]
                    .data_mut()
                    .iter_mut()
                    .zip(d_out.data().iter().zip(s_val.data()))
                {
                    *gx += g * s * (1.0 - s);
                }
            }
            Op::Softmax { x } => {
                let p = self.values[out].clone();
                let dot: f64 = d_out.data().iter().zip(p.data()).map(|(g, pv)| g * pv).sum();
                for (gx, (&g, &pv)) in self.grads[x.0]
                    .data_mut()
                    .iter_mut()
                    .zip(d_out.data().iter().zip(p.data()))
                {
                    *gx += pv * (g - dot);
                }
            }
            Op::CrossEntropy { p, label } => {
                let pv = self.values[p.0].data()[label];
                self.grads[p.0].data_mut()[label] += d_out.item() * (-1.0 / (pv + LOG_EPS));
            }
            Op::Mul { a, b } => {
                let a_val = self.values[a.0].clone();
                let b_val = self.values[b.0].clone();
                for (i, &g) in d_out.data().iter().enumerate() {
                    self.grads[a.0].data_mut()[i] += g * b_val.data()[i];
                    self.grads[b.0].data_mut()[i] += g * a_val.data()[i];
                }
            }
            Op::Add { a, b } => {
                for (i, &g) in d_out.data().iter().enumerate() {
                    self.grads[a.0].data_mut()[i] += g;
                    self.grads[b.0].data_mut()[i] += g;
                }
            }
            Op::Scale { x, c } => {
                for (gx, &g) in self.grads[x.0].data_mut().iter_mut().zip(d_out.data()) {
                    *gx += c * g;
                }
            }
            Op::Reshape { x } => {
                for (gx, &g) in self.grads[x.0].data_mut().iter_mut().zip(d_out.data()) {
                    *gx += g;
                }
            }
            Op::StackRows { ref rows } => {
                let len = self.values[rows[0].0].numel();
                for (r, row) in rows.iter().enumerate() {
                    for j in 0..len {
                        self.grads[row.0].data_mut()[j] += d_out.data()[r * len + j];
                    }
                }
            }
            Op::L1Sum { x } => {
                let g = d_out.item();
                let x_val = self.values[x.0].clone();
                for (gx, &xv) in self.grads[x.0].data_mut().iter_mut().zip(x_val.data()) {
                    // subgradient 0 at the kink
                    if xv > 0.0 {
                        *gx += g;
                    } else if xv < 0.0 {
                        *gx -= g;
                    }
                }
            }
            Op::GroupL2Sum {
                x,
                ref groups,
                ref gammas,
            } => {
                let g = d_out.item();
                let t = self.values[x.0].cols();
                let x_val = self.values[x.0].clone();
                for (group, &gamma) in groups.iter().zip(gammas) {
                    for tau in 0..t {
                        let sq: f64 = group.iter().map(|&row| x_val.at(row, tau).powi(2)).sum();
                        let norm = sq.sqrt();
                        if norm < NORM_EPS {
                            continue;
                        }
                        for &row in group {
                            self.grads[x.0].data_mut()[row * t + tau] +=
                                g * gamma * x_val.at(row, tau) / norm;
                        }
                    }
                }
            }
        }
    }
}
