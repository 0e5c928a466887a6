//! Dense f64 vectors and matrices plus the numeric kernels used by both the
//! differentiation graph and the plain (non-differentiable) loss functions.
//!
//! Storage is row-major. Everything is 64-bit; gradient verification against
//! finite differences is not meaningful at lower precision.

use crate::error::{Error, Result};

/// Additive offset inside `log` so that cross-entropy never sees log(0).
pub const LOG_EPS: f64 = 1e-12;

/// Below this, the gradient of an L2 group norm is defined as 0 (a valid
/// subgradient) instead of dividing by the norm.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Vector(usize),
    Matrix(usize, usize),
}

impl Shape {
    pub fn numel(&self) -> usize {
        match *self {
            Shape::Vector(n) => n,
            Shape::Matrix(r, c) => r * c,
        }
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Shape::Vector(n) => write!(f, "({n})"),
            Shape::Matrix(r, c) => write!(f, "({r}x{c})"),
        }
    }
}

/// Dense tensor of finite 64-bit reals. Shape is fixed at creation.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    pub fn vector(data: Vec<f64>) -> Result<Self> {
        let t = Tensor {
            shape: Shape::Vector(data.len()),
            data,
        };
        t.check_finite()?;
        Ok(t)
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        let t = Tensor {
            shape: Shape::Matrix(rows, cols),
            data,
        };
        t.check_finite()?;
        Ok(t)
    }

    pub fn scalar(v: f64) -> Result<Self> {
        Self::vector(vec![v])
    }

    pub fn zeros(shape: Shape) -> Self {
        Tensor {
            shape,
            data: vec![0.0; shape.numel()],
        }
    }

    /// Same-shape zero tensor, used for gradient buffers.
    pub fn zeros_like(&self) -> Self {
        Tensor::zeros(self.shape)
    }

    fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config("tensor contains NaN or infinity".into()))
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self.shape, Shape::Vector(1))
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> f64 {
        debug_assert!(self.numel() == 1);
        self.data[0]
    }

    pub fn rows(&self) -> usize {
        match self.shape {
            Shape::Matrix(r, _) => r,
            Shape::Vector(_) => 1,
        }
    }

    pub fn cols(&self) -> usize {
        match self.shape {
            Shape::Matrix(_, c) => c,
            Shape::Vector(n) => n,
        }
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows() && c < self.cols());
        self.data[r * self.cols() + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        let cols = self.cols();
        self.data[r * cols + c] = v;
    }

    /// Reinterprets the data under a new shape with the same element count.
    pub fn reshaped(&self, shape: Shape) -> Result<Tensor> {
        if shape.numel() != self.numel() {
            return Err(Error::Dimension(format!(
                "cannot reshape {} into {shape}",
                self.shape
            )));
        }
        Ok(Tensor {
            shape,
            data: self.data.clone(),
        })
    }
}

// ── kernels ──────────────────────────────────────────────────────────
//
// Shared by the graph (which adds backward rules) and by the plain loss
// functions, so both routes compute the identical forward value.

/// y = M v for M: (m x n), v: (n).
pub fn matvec(m: &Tensor, v: &Tensor) -> Result<Tensor> {
    let (rows, cols) = match m.shape() {
        Shape::Matrix(r, c) => (r, c),
        s => return Err(Error::Dimension(format!("matvec needs a matrix, got {s}"))),
    };
    match v.shape() {
        Shape::Vector(n) if n == cols => {}
        s => {
            return Err(Error::Dimension(format!(
                "matvec {rows}x{cols} against vector {s}"
            )))
        }
    }
    let mut out = vec![0.0; rows];
    for i in 0..rows {
        let row = &m.data()[i * cols..(i + 1) * cols];
        out[i] = row.iter().zip(v.data()).map(|(a, b)| a * b).sum();
    }
    Ok(Tensor {
        shape: Shape::Vector(rows),
        data: out,
    })
}

/// Temporal 1-D convolution with zero "same" padding.
///
/// `x` is (c_in x t); `kernels` is stored as a (c_out x c_in*k) matrix with
/// layout kernel[o][i][j] = data[o*(c_in*k) + i*k + j]; `bias` has length
/// c_out. Output is (c_out x t) for every t, which is what lets the attention
/// modules emit exactly one weight per frame.
pub fn conv1d_same(x: &Tensor, kernels: &Tensor, bias: &Tensor, k: usize) -> Result<Tensor> {
    if k % 2 == 0 {
        return Err(Error::Config(format!("conv kernel size must be odd, got {k}")));
    }
    let (c_in, t) = match x.shape() {
        Shape::Matrix(r, c) => (r, c),
        s => return Err(Error::Dimension(format!("conv input must be a matrix, got {s}"))),
    };
    let c_out = kernels.rows();
    if kernels.cols() != c_in * k {
        return Err(Error::Dimension(format!(
            "conv kernels {}x{} incompatible with c_in={c_in}, k={k}",
            kernels.rows(),
            kernels.cols()
        )));
    }
    match bias.shape() {
        Shape::Vector(n) if n == c_out => {}
        s => return Err(Error::Dimension(format!("conv bias {s} but c_out={c_out}"))),
    }
    let pad = (k - 1) / 2;
    let mut out = vec![0.0; c_out * t];
    for o in 0..c_out {
        let kern = &kernels.data()[o * c_in * k..(o + 1) * c_in * k];
        for tau in 0..t {
            let mut acc = bias.data()[o];
            for i in 0..c_in {
                for j in 0..k {
                    let src = tau as isize + j as isize - pad as isize;
                    if src >= 0 && (src as usize) < t {
                        acc += kern[i * k + j] * x.at(i, src as usize);
                    }
                }
            }
            out[o * t + tau] = acc;
        }
    }
    Ok(Tensor {
        shape: Shape::Matrix(c_out, t),
        data: out,
    })
}

pub fn relu(x: &Tensor) -> Tensor {
    Tensor {
        shape: x.shape(),
        data: x.data().iter().map(|&v| v.max(0.0)).collect(),
    }
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    Tensor {
        shape: x.shape(),
        data: x.data().iter().map(|&v| sigmoid_scalar(v)).collect(),
    }
}

pub fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Softmax over a vector, stabilized by max subtraction. Output is on the
/// simplex: nonnegative entries summing to 1 up to rounding.
pub fn softmax(x: &Tensor) -> Result<Tensor> {
    let n = match x.shape() {
        Shape::Vector(n) if n >= 1 => n,
        s => return Err(Error::Dimension(format!("softmax needs a nonempty vector, got {s}"))),
    };
    let max = x.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = vec![0.0; n];
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(x.data()) {
        *o = (v - max).exp();
        sum += *o;
    }
    for o in &mut out {
        *o /= sum;
    }
    Ok(Tensor {
        shape: Shape::Vector(n),
        data: out,
    })
}

/// -log(p[y] + eps) for a probability vector p.
pub fn cross_entropy(p: &Tensor, y: usize) -> Result<f64> {
    let n = match p.shape() {
        Shape::Vector(n) => n,
        s => return Err(Error::Dimension(format!("cross entropy needs a vector, got {s}"))),
    };
    if y >= n {
        return Err(Error::Label(format!("class {y} out of range for {n} classes")));
    }
    Ok(-(p.data()[y] + LOG_EPS).ln())
}

/// Sum of absolute values over all entries.
pub fn l1_sum(x: &Tensor) -> f64 {
    x.data().iter().map(|v| v.abs()).sum()
}

/// Sum over columns and groups of gamma_k * ||rows(G_k) at column t||_2.
///
/// `x` is (b x t); each group lists row indices. This is the structured norm
/// that couples rows within a group, column by column.
pub fn group_l2_sum(x: &Tensor, groups: &[Vec<usize>], gammas: &[f64]) -> Result<f64> {
    let (b, t) = match x.shape() {
        Shape::Matrix(r, c) => (r, c),
        s => return Err(Error::Dimension(format!("group norm needs a matrix, got {s}"))),
    };
    if groups.len() != gammas.len() {
        return Err(Error::Config(format!(
            "{} groups but {} group weights",
            groups.len(),
            gammas.len()
        )));
    }
    let mut total = 0.0;
    for (group, &gamma) in groups.iter().zip(gammas) {
        for &row in group {
            if row >= b {
                return Err(Error::Config(format!("group row {row} out of range for {b} rows")));
            }
        }
        for tau in 0..t {
            let sq: f64 = group.iter().map(|&row| x.at(row, tau).powi(2)).sum();
            total += gamma * sq.sqrt();
        }
    }
    Ok(total)
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "add shapes differ: {} vs {}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(Tensor {
        shape: a.shape(),
        data: a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect(),
    })
}

pub fn scale(a: &Tensor, c: f64) -> Tensor {
    Tensor {
        shape: a.shape(),
        data: a.data().iter().map(|v| v * c).collect(),
    }
}

/// Stacks equal-length vectors as the rows of a matrix.
pub fn stack_rows(rows: &[&Tensor]) -> Result<Tensor> {
    if rows.is_empty() {
        return Err(Error::Dimension("cannot stack zero rows".into()));
    }
    let len = match rows[0].shape() {
        Shape::Vector(n) => n,
        s => return Err(Error::Dimension(format!("stack needs vectors, got {s}"))),
    };
    let mut data = Vec::with_capacity(rows.len() * len);
    for r in rows {
        match r.shape() {
            Shape::Vector(n) if n == len => data.extend_from_slice(r.data()),
            s => {
                return Err(Error::Dimension(format!(
                    "stack row has shape {s}, expected ({len})"
                )))
            }
        }
    }
    Ok(Tensor {
        shape: Shape::Matrix(rows.len(), len),
        data,
    })
}
