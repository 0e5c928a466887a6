//! Temporal attention modules and feature aggregation.
//!
//! Both modules map a feature matrix (one column per frame) to one attention
//! weight per frame through two temporal convolutions:
//!
//! - STAM: Conv - ReLU - Conv - Sigmoid. Every frame gets an independent
//!   weight in (0,1); weights are free to all be small or all be large.
//! - PTAM: Conv - ReLU - Conv - ReLU - Softmax. Weights live on the simplex,
//!   so suppressing one frame necessarily boosts the others.
//!
//! The aggregated feature is the attention-weighted sum of frame features.

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::tensor::{self, Shape, Tensor};
use rand::Rng;

/// Per-video feature matrix, one d-dimensional column per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(Tensor);

impl FeatureMatrix {
    pub fn new(t: Tensor) -> Result<Self> {
        match t.shape() {
            Shape::Matrix(_, cols) if cols >= 1 => Ok(FeatureMatrix(t)),
            s => Err(Error::Dimension(format!(
                "feature matrix must be (d x T) with T >= 1, got {s}"
            ))),
        }
    }

    /// Feature dimension d.
    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    /// Number of frames T.
    pub fn len(&self) -> usize {
        self.0.cols()
    }

    pub fn is_empty(&self) -> bool {
        false // T >= 1 by construction
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    /// Contiguous frame window [start, start+len).
    pub fn window(&self, start: usize, len: usize) -> Result<FeatureMatrix> {
        if start + len > self.len() {
            return Err(Error::Dimension(format!(
                "window [{start}, {}) out of range for {} frames",
                start + len,
                self.len()
            )));
        }
        let d = self.dim();
        let mut data = Vec::with_capacity(d * len);
        for r in 0..d {
            for c in start..start + len {
                data.push(self.0.at(r, c));
            }
        }
        Ok(FeatureMatrix(Tensor::matrix(d, len, data)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionVariant {
    Ptam,
    Stam,
}

impl AttentionVariant {
    pub fn name(&self) -> &'static str {
        match self {
            AttentionVariant::Ptam => "ptam",
            AttentionVariant::Stam => "stam",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ptam" => Ok(AttentionVariant::Ptam),
            "stam" => Ok(AttentionVariant::Stam),
            other => Err(Error::Lookup(format!("unknown attention variant '{other}'"))),
        }
    }
}

/// Attention weights for one branch over one segment.
#[derive(Debug, Clone)]
pub struct AttentionWeights {
    values: Tensor,
    variant: AttentionVariant,
}

impl AttentionWeights {
    /// Wraps and validates: STAM weights strictly inside (0,1); PTAM weights
    /// nonnegative and summing to 1 within 1e-9.
    pub fn new(values: Tensor, variant: AttentionVariant) -> Result<Self> {
        match values.shape() {
            Shape::Vector(n) if n >= 1 => {}
            s => return Err(Error::Dimension(format!("attention weights must be a vector, got {s}"))),
        }
        match variant {
            AttentionVariant::Stam => {
                if !values.data().iter().all(|&v| v > 0.0 && v < 1.0) {
                    return Err(Error::Contract(
                        "sigmoid attention weights must lie strictly in (0,1)".into(),
                    ));
                }
            }
            AttentionVariant::Ptam => {
                let sum: f64 = values.data().iter().sum();
                if !values.data().iter().all(|&v| v >= 0.0) || (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Contract(
                        "softmax attention weights must be a simplex vector".into(),
                    ));
                }
            }
        }
        Ok(AttentionWeights { values, variant })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn variant(&self) -> AttentionVariant {
        self.variant
    }

    pub fn len(&self) -> usize {
        self.values.numel()
    }

    pub fn is_empty(&self) -> bool {
        self.values.numel() == 0
    }
}

/// Parameters of one temporal attention module.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub variant: AttentionVariant,
    pub feature_dim: usize,
    pub hidden: usize,
    pub k1: usize,
    pub k2: usize,
    /// (hidden x feature_dim*k1)
    pub conv1_kernels: Tensor,
    pub conv1_bias: Tensor,
    /// (1 x hidden*k2)
    pub conv2_kernels: Tensor,
    pub conv2_bias: Tensor,
}

/// Default hidden width: half the feature dimension, at least 4.
pub fn default_hidden(feature_dim: usize) -> usize {
    (feature_dim / 2).max(4)
}

impl AttentionParams {
    /// Seeded init: kernels uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)],
    /// biases zero.
    pub fn init(
        variant: AttentionVariant,
        feature_dim: usize,
        hidden: usize,
        k1: usize,
        k2: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if k1 % 2 == 0 || k2 % 2 == 0 {
            return Err(Error::Config(format!(
                "attention kernel sizes must be odd, got k1={k1}, k2={k2}"
            )));
        }
        if hidden < 1 || feature_dim < 1 {
            return Err(Error::Config("attention dims must be >= 1".into()));
        }
        Ok(AttentionParams {
            variant,
            feature_dim,
            hidden,
            k1,
            k2,
            conv1_kernels: uniform_init(hidden, feature_dim * k1, feature_dim * k1, rng)?,
            conv1_bias: Tensor::zeros(Shape::Vector(hidden)),
            conv2_kernels: uniform_init(1, hidden * k2, hidden * k2, rng)?,
            conv2_bias: Tensor::zeros(Shape::Vector(1)),
        })
    }

    /// Inserts this module's parameters as graph leaves.
    pub fn bind(&self, g: &mut Graph) -> BoundAttention {
        BoundAttention {
            conv1_kernels: g.leaf(self.conv1_kernels.clone()),
            conv1_bias: g.leaf(self.conv1_bias.clone()),
            conv2_kernels: g.leaf(self.conv2_kernels.clone()),
            conv2_bias: g.leaf(self.conv2_bias.clone()),
        }
    }

    /// Attention weights as a length-T vector node.
    pub fn forward_graph(&self, g: &mut Graph, p: &BoundAttention, f: NodeId) -> Result<NodeId> {
        if g.value(f).rows() != self.feature_dim {
            return Err(Error::Config(format!(
                "attention expects {} feature rows, got {}",
                self.feature_dim,
                g.value(f).rows()
            )));
        }
        let h1 = g.conv1d(f, p.conv1_kernels, p.conv1_bias, self.k1)?;
        let h1 = g.relu(h1);
        let scores = g.conv1d(h1, p.conv2_kernels, p.conv2_bias, self.k2)?;
        let scores = g.as_vector(scores)?;
        match self.variant {
            AttentionVariant::Stam => Ok(g.sigmoid(scores)),
            AttentionVariant::Ptam => {
                let scores = g.relu(scores);
                g.softmax(scores)
            }
        }
    }

    /// Plain forward pass producing validated weights.
    pub fn weights(&self, f: &FeatureMatrix) -> Result<AttentionWeights> {
        let mut g = Graph::new();
        let fid = g.leaf(f.tensor().clone());
        let bound = self.bind(&mut g);
        let out = self.forward_graph(&mut g, &bound, fid)?;
        AttentionWeights::new(g.value(out).clone(), self.variant)
    }

    pub fn param_refs(&self) -> [&Tensor; 4] {
        [
            &self.conv1_kernels,
            &self.conv1_bias,
            &self.conv2_kernels,
            &self.conv2_bias,
        ]
    }

    pub fn param_refs_mut(&mut self) -> [&mut Tensor; 4] {
        [
            &mut self.conv1_kernels,
            &mut self.conv1_bias,
            &mut self.conv2_kernels,
            &mut self.conv2_bias,
        ]
    }
}

/// Node handles for one bound attention module.
pub struct BoundAttention {
    pub conv1_kernels: NodeId,
    pub conv1_bias: NodeId,
    pub conv2_kernels: NodeId,
    pub conv2_bias: NodeId,
}

pub(crate) fn uniform_init(
    rows: usize,
    cols: usize,
    fan_in: usize,
    rng: &mut impl Rng,
) -> Result<Tensor> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Tensor::matrix(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect(),
    )
}

/// Sigmoid-based module; requires `params.variant == Stam`.
pub fn stam_forward(f: &FeatureMatrix, params: &AttentionParams) -> Result<AttentionWeights> {
    if params.variant != AttentionVariant::Stam {
        return Err(Error::Config("stam_forward called with non-STAM parameters".into()));
    }
    params.weights(f)
}

/// Softmax-based module; requires `params.variant == Ptam`.
pub fn ptam_forward(f: &FeatureMatrix, params: &AttentionParams) -> Result<AttentionWeights> {
    if params.variant != AttentionVariant::Ptam {
        return Err(Error::Config("ptam_forward called with non-PTAM parameters".into()));
    }
    params.weights(f)
}

/// Attention-weighted sum of frame features: F a.
pub fn aggregate(f: &FeatureMatrix, weights: &Tensor) -> Result<Tensor> {
    if weights.numel() != f.len() {
        return Err(Error::Dimension(format!(
            "{} attention weights for {} frames",
            weights.numel(),
            f.len()
        )));
    }
    tensor::matvec(f.tensor(), weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn feature(rows: usize, cols: usize, data: Vec<f64>) -> FeatureMatrix {
        FeatureMatrix::new(Tensor::matrix(rows, cols, data).unwrap()).unwrap()
    }

    fn random_feature(d: usize, t: usize, rng: &mut ChaCha8Rng) -> FeatureMatrix {
        let data = (0..d * t).map(|_| rng.gen_range(-2.0..2.0)).collect();
        feature(d, t, data)
    }

    /// d=1, h=1, k1=k2=1 module with hand-set weights (w1, b1, w2, b2).
    fn tiny(variant: AttentionVariant, w: (f64, f64, f64, f64)) -> AttentionParams {
        AttentionParams {
            variant,
            feature_dim: 1,
            hidden: 1,
            k1: 1,
            k2: 1,
            conv1_kernels: Tensor::matrix(1, 1, vec![w.0]).unwrap(),
            conv1_bias: Tensor::vector(vec![w.1]).unwrap(),
            conv2_kernels: Tensor::matrix(1, 1, vec![w.2]).unwrap(),
            conv2_bias: Tensor::vector(vec![w.3]).unwrap(),
        }
    }

    #[test]
    fn stam_zero_scores_give_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = AttentionParams::init(AttentionVariant::Stam, 4, 4, 3, 3, &mut rng).unwrap();
        p.conv2_kernels = Tensor::zeros(Shape::Matrix(1, 12));
        p.conv2_bias = Tensor::zeros(Shape::Vector(1));
        let f = random_feature(4, 5, &mut rng);
        let a = stam_forward(&f, &p).unwrap();
        for &v in a.values().data() {
            assert_eq!(v, 0.5);
        }
    }

    #[test]
    fn stam_hand_composed_sigmoid() {
        let p = tiny(AttentionVariant::Stam, (1.0, 0.0, 1.0, 0.0));
        let f = feature(1, 2, vec![0.0, 10.0]);
        let a = stam_forward(&f, &p).unwrap();
        assert_relative_eq!(a.values().data()[0], 0.5, epsilon = 1e-9);
        assert_relative_eq!(a.values().data()[1], 0.9999546, epsilon = 1e-7);
    }

    #[test]
    fn stam_range_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = AttentionParams::init(AttentionVariant::Stam, 6, 4, 3, 3, &mut rng).unwrap();
        for _ in 0..50 {
            let f = random_feature(6, 6, &mut rng);
            let a = stam_forward(&f, &p).unwrap();
            assert_eq!(a.len(), 6);
            assert!(a.values().data().iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn ptam_zero_scores_give_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = AttentionParams::init(AttentionVariant::Ptam, 4, 4, 3, 3, &mut rng).unwrap();
        p.conv2_kernels = Tensor::zeros(Shape::Matrix(1, 12));
        let f = random_feature(4, 6, &mut rng);
        let a = ptam_forward(&f, &p).unwrap();
        for &v in a.values().data() {
            assert_relative_eq!(v, 1.0 / 6.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ptam_forced_logits_match_softmax() {
        // identity-ish weights push F's row straight through to the logits
        let p = tiny(AttentionVariant::Ptam, (1.0, 0.0, 1.0, 0.0));
        let f = feature(1, 6, vec![1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let a = ptam_forward(&f, &p).unwrap();
        let expect =
            tensor::softmax(&Tensor::vector(vec![1.0, 2.0, 0.0, 0.0, 0.0, 0.0]).unwrap()).unwrap();
        for (got, want) in a.values().data().iter().zip(expect.data()) {
            assert_relative_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn ptam_simplex_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = AttentionParams::init(AttentionVariant::Ptam, 5, 4, 3, 3, &mut rng).unwrap();
        for _ in 0..50 {
            let f = random_feature(5, 7, &mut rng);
            let a = ptam_forward(&f, &p).unwrap();
            let sum: f64 = a.values().data().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(a.values().data().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn variant_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = AttentionParams::init(AttentionVariant::Stam, 4, 4, 3, 3, &mut rng).unwrap();
        let f = random_feature(4, 3, &mut rng);
        assert!(ptam_forward(&f, &p).is_err());
    }

    #[test]
    fn even_kernel_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert!(AttentionParams::init(AttentionVariant::Stam, 4, 4, 2, 3, &mut rng).is_err());
    }

    #[test]
    fn aggregate_hand_values() {
        let eye = feature(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let picked = aggregate(&eye, &Tensor::vector(vec![1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(picked.data(), &[1.0, 0.0]);

        let zero = aggregate(&eye, &Tensor::vector(vec![0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(zero.data(), &[0.0, 0.0]);

        let f = feature(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let mean = aggregate(&f, &Tensor::vector(vec![0.5, 0.5]).unwrap()).unwrap();
        assert_eq!(mean.data(), &[1.5, 3.5]);
    }

    #[test]
    fn aggregate_length_mismatch() {
        let f = feature(2, 3, vec![0.0; 6]);
        let a = Tensor::vector(vec![1.0, 0.0]).unwrap();
        assert!(aggregate(&f, &a).is_err());
    }

    #[test]
    fn permuting_frames_permutes_stam_weights_for_k1() {
        // with k1 = k2 = 1 each frame's weight depends only on its own column
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = AttentionParams::init(AttentionVariant::Stam, 3, 4, 1, 1, &mut rng).unwrap();
        let f = random_feature(3, 5, &mut rng);
        let perm = [3usize, 0, 4, 1, 2];
        let mut permuted = Vec::with_capacity(15);
        for r in 0..3 {
            for &c in &perm {
                permuted.push(f.tensor().at(r, c));
            }
        }
        let fp = feature(3, 5, permuted);
        let a = stam_forward(&f, &p).unwrap();
        let ap = stam_forward(&fp, &p).unwrap();
        for (i, &c) in perm.iter().enumerate() {
            assert_relative_eq!(
                ap.values().data()[i],
                a.values().data()[c],
                epsilon = 1e-12
            );
        }
    }

    proptest! {
        #[test]
        fn aggregate_is_linear_in_weights(
            cols in proptest::collection::vec(-2.0f64..2.0, 6),
            a in proptest::collection::vec(-1.0f64..1.0, 3),
            b in proptest::collection::vec(-1.0f64..1.0, 3),
            alpha in -2.0f64..2.0,
            beta in -2.0f64..2.0,
        ) {
            let f = feature(2, 3, cols);
            let av = Tensor::vector(a).unwrap();
            let bv = Tensor::vector(b).unwrap();
            let combo: Vec<f64> = av.data().iter().zip(bv.data())
                .map(|(x, y)| alpha * x + beta * y).collect();
            let lhs = aggregate(&f, &Tensor::vector(combo).unwrap()).unwrap();
            let fa = aggregate(&f, &av).unwrap();
            let fb = aggregate(&f, &bv).unwrap();
            for i in 0..2 {
                let rhs = alpha * fa.data()[i] + beta * fb.data()[i];
                prop_assert!((lhs.data()[i] - rhs).abs() < 1e-10);
            }
        }
    }
}
