//! Multi-branch attribute model: per-branch temporal attention plus a
//! bias-free linear head over the aggregated feature, on top of a shared
//! trunk (identity by default, optionally one conv+relu layer).
//!
//! Branches are independent given the trunk output: each one owns its
//! attention module and head, so perturbing one branch never changes
//! another's prediction.

use crate::attention::{
    default_hidden, uniform_init, AttentionParams, AttentionVariant, BoundAttention, FeatureMatrix,
};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::losses::GroupPartition;
use crate::tensor::{self, Shape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

/// Static description of one attribute branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSpec {
    pub name: String,
    pub classes: usize,
    /// Loss balance weight, fixed at 1/classes.
    pub balance: f64,
    pub group_id: usize,
}

impl BranchSpec {
    pub fn new(name: &str, classes: usize, group_id: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::Config(format!(
                "branch '{name}' needs at least 2 classes, got {classes}"
            )));
        }
        Ok(BranchSpec {
            name: name.to_string(),
            classes,
            balance: 1.0 / classes as f64,
            group_id,
        })
    }
}

/// Bias-free linear classifier (classes x feature_dim).
#[derive(Debug, Clone, PartialEq)]
pub struct BranchHead {
    pub weight: Tensor,
}

impl BranchHead {
    pub fn init(classes: usize, dim: usize, rng: &mut impl rand::Rng) -> Result<Self> {
        Ok(BranchHead {
            weight: uniform_init(classes, dim, dim, rng)?,
        })
    }
}

/// softmax(W f) for an aggregated feature.
pub fn branch_predict(feature: &Tensor, head: &BranchHead) -> Result<Tensor> {
    tensor::softmax(&tensor::matvec(&head.weight, feature)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub spec: BranchSpec,
    pub attention: AttentionParams,
    pub head: BranchHead,
}

/// Shared feature trunk applied before the branches.
#[derive(Debug, Clone, PartialEq)]
pub enum Trunk {
    Identity,
    /// One temporal conv (same padding) followed by ReLU, keeping the
    /// feature dimension.
    Conv { kernels: Tensor, bias: Tensor, k: usize },
}

/// Architecture knobs shared by every branch.
#[derive(Debug, Clone)]
pub struct ModelLayout {
    pub feature_dim: usize,
    pub variant: AttentionVariant,
    /// Attention hidden width; `None` picks max(4, feature_dim/2).
    pub hidden: Option<usize>,
    pub k1: usize,
    pub k2: usize,
    pub conv_trunk: bool,
}

impl ModelLayout {
    pub fn new(feature_dim: usize, variant: AttentionVariant) -> Self {
        ModelLayout {
            feature_dim,
            variant,
            hidden: None,
            k1: 3,
            k2: 3,
            conv_trunk: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiBranchModel {
    pub feature_dim: usize,
    pub trunk: Trunk,
    pub branches: Vec<Branch>,
}

/// Graph handles for every parameter of a bound model, in the same order as
/// [`MultiBranchModel::params`].
pub struct BoundModel {
    trunk: Option<(NodeId, NodeId, usize)>,
    branches: Vec<(BoundAttention, NodeId)>,
}

/// Forward-pass node handles for one segment.
pub struct ForwardNodes {
    /// One simplex vector node per branch.
    pub predictions: Vec<NodeId>,
    /// One length-T attention vector node per branch.
    pub attention_rows: Vec<NodeId>,
    /// The rows stacked into a (B x T) matrix node.
    pub attention_matrix: NodeId,
}

/// Plain forward-pass output.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub probabilities: Vec<Tensor>,
    /// (B x T) attention matrix.
    pub attention: Tensor,
}

impl MultiBranchModel {
    /// Seeded initialization of every branch (and the trunk if configured).
    pub fn init(specs: Vec<BranchSpec>, layout: &ModelLayout, seed: u64) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Config("model needs at least one branch".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = layout.feature_dim;
        let hidden = layout.hidden.unwrap_or_else(|| default_hidden(d));
        let trunk = if layout.conv_trunk {
            let k = 3;
            Trunk::Conv {
                kernels: uniform_init(d, d * k, d * k, &mut rng)?,
                bias: Tensor::zeros(Shape::Vector(d)),
                k,
            }
        } else {
            Trunk::Identity
        };
        let mut branches = Vec::with_capacity(specs.len());
        for spec in specs {
            let attention =
                AttentionParams::init(layout.variant, d, hidden, layout.k1, layout.k2, &mut rng)?;
            let head = BranchHead::init(spec.classes, d, &mut rng)?;
            branches.push(Branch {
                spec,
                attention,
                head,
            });
        }
        Ok(MultiBranchModel {
            feature_dim: d,
            trunk,
            branches,
        })
    }

    pub fn num_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn specs(&self) -> Vec<BranchSpec> {
        self.branches.iter().map(|b| b.spec.clone()).collect()
    }

    pub fn branch_names(&self) -> Vec<String> {
        self.branches.iter().map(|b| b.spec.name.clone()).collect()
    }

    /// Attribute grouping derived from the branch specs.
    pub fn partition(&self) -> Result<GroupPartition> {
        GroupPartition::from_specs(&self.specs())
    }

    /// All parameter tensors in a stable order.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        if let Trunk::Conv { kernels, bias, .. } = &self.trunk {
            out.push(kernels);
            out.push(bias);
        }
        for b in &self.branches {
            out.extend(b.attention.param_refs());
            out.push(&b.head.weight);
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        if let Trunk::Conv { kernels, bias, .. } = &mut self.trunk {
            out.push(kernels);
            out.push(bias);
        }
        for b in &mut self.branches {
            out.extend(b.attention.param_refs_mut());
            out.push(&mut b.head.weight);
        }
        out
    }

    /// Inserts every parameter as a graph leaf, in [`Self::params`] order.
    pub fn bind(&self, g: &mut Graph) -> BoundModel {
        let trunk = match &self.trunk {
            Trunk::Identity => None,
            Trunk::Conv { kernels, bias, k } => {
                Some((g.leaf(kernels.clone()), g.leaf(bias.clone()), *k))
            }
        };
        let branches = self
            .branches
            .iter()
            .map(|b| (b.attention.bind(g), g.leaf(b.head.weight.clone())))
            .collect();
        BoundModel { trunk, branches }
    }

    /// Leaf node ids of a bound model in [`Self::params`] order, for reading
    /// gradients back out after a backward pass.
    pub fn param_nodes(&self, bound: &BoundModel) -> Vec<NodeId> {
        let mut out = Vec::new();
        if let Some((k, b, _)) = bound.trunk {
            out.push(k);
            out.push(b);
        }
        for (attn, head) in &bound.branches {
            out.push(attn.conv1_kernels);
            out.push(attn.conv1_bias);
            out.push(attn.conv2_kernels);
            out.push(attn.conv2_bias);
            out.push(*head);
        }
        out
    }

    /// Builds the forward graph for one segment node.
    pub fn forward_graph(
        &self,
        g: &mut Graph,
        bound: &BoundModel,
        features: NodeId,
    ) -> Result<ForwardNodes> {
        if g.value(features).rows() != self.feature_dim {
            return Err(Error::Dimension(format!(
                "model expects {} feature rows, got {}",
                self.feature_dim,
                g.value(features).rows()
            )));
        }
        let trunk_out = match bound.trunk {
            None => features,
            Some((kernels, bias, k)) => {
                let c = g.conv1d(features, kernels, bias, k)?;
                g.relu(c)
            }
        };
        let mut predictions = Vec::with_capacity(self.branches.len());
        let mut attention_rows = Vec::with_capacity(self.branches.len());
        for (branch, (attn_nodes, head)) in self.branches.iter().zip(&bound.branches) {
            let weights = branch.attention.forward_graph(g, attn_nodes, trunk_out)?;
            let pooled = g.matvec(trunk_out, weights)?;
            let logits = g.matvec(*head, pooled)?;
            predictions.push(g.softmax(logits)?);
            attention_rows.push(weights);
        }
        let attention_matrix = g.stack_rows(&attention_rows)?;
        Ok(ForwardNodes {
            predictions,
            attention_rows,
            attention_matrix,
        })
    }

    /// Plain forward pass: per-branch class probabilities and the (B x T)
    /// attention matrix.
    pub fn predict(&self, features: &FeatureMatrix) -> Result<Prediction> {
        let mut g = Graph::new();
        let f = g.leaf(features.tensor().clone());
        let bound = self.bind(&mut g);
        let fwd = self.forward_graph(&mut g, &bound, f)?;
        Ok(Prediction {
            probabilities: fwd
                .predictions
                .iter()
                .map(|&p| g.value(p).clone())
                .collect(),
            attention: g.value(fwd.attention_matrix).clone(),
        })
    }
}

// ── checkpoints ──────────────────────────────────────────────────────
//
// Single self-describing binary file. All integers are u64 little-endian,
// floats are f64 bit patterns, strings are length-prefixed UTF-8. Round-trips
// are bit-exact.

const CKPT_MAGIC: &[u8] = b"GSTAMCKPT1\n";

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        for v in vs {
            self.buf.extend_from_slice(&v.to_bits().to_le_bytes());
        }
    }
    fn string(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }
    fn tensor(&mut self, t: &Tensor) {
        match t.shape() {
            Shape::Vector(n) => {
                self.u64(0);
                self.u64(n as u64);
            }
            Shape::Matrix(r, c) => {
                self.u64(1);
                self.u64(r as u64);
                self.u64(c as u64);
            }
        }
        self.f64s(t.data());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn fail(&self, msg: &str) -> Error {
        Error::Config(format!(
            "corrupt checkpoint {} at byte {}: {msg}",
            self.path.display(),
            self.pos
        ))
    }
    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(self.fail("unexpected end of file"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u64(&mut self) -> Result<u64> {
        let b = self.bytes(8)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        Ok(self.u64()? as usize)
    }
    fn string(&mut self) -> Result<String> {
        let n = self.usize()?;
        let b = self.bytes(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| self.fail("invalid utf-8"))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let b = self.bytes(n * 8)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
            .collect())
    }
    fn tensor(&mut self) -> Result<Tensor> {
        match self.u64()? {
            0 => {
                let n = self.usize()?;
                Tensor::vector(self.f64s(n)?)
            }
            1 => {
                let r = self.usize()?;
                let c = self.usize()?;
                Tensor::matrix(r, c, self.f64s(r * c)?)
            }
            tag => Err(self.fail(&format!("unknown tensor tag {tag}"))),
        }
    }
}

impl MultiBranchModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = Writer {
            buf: CKPT_MAGIC.to_vec(),
        };
        w.u64(self.feature_dim as u64);
        match &self.trunk {
            Trunk::Identity => w.u64(0),
            Trunk::Conv { kernels, bias, k } => {
                w.u64(1);
                w.u64(*k as u64);
                w.tensor(kernels);
                w.tensor(bias);
            }
        }
        w.u64(self.branches.len() as u64);
        for b in &self.branches {
            w.string(&b.spec.name);
            w.u64(b.spec.classes as u64);
            w.u64(b.spec.group_id as u64);
            w.u64(match b.attention.variant {
                AttentionVariant::Ptam => 0,
                AttentionVariant::Stam => 1,
            });
            w.u64(b.attention.hidden as u64);
            w.u64(b.attention.k1 as u64);
            w.u64(b.attention.k2 as u64);
            w.tensor(&b.attention.conv1_kernels);
            w.tensor(&b.attention.conv1_bias);
            w.tensor(&b.attention.conv2_kernels);
            w.tensor(&b.attention.conv2_bias);
            w.tensor(&b.head.weight);
        }
        std::fs::write(path, &w.buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if !buf.starts_with(CKPT_MAGIC) {
            return Err(Error::Config(format!(
                "{} is not a model checkpoint (bad magic)",
                path.display()
            )));
        }
        let mut r = Reader {
            buf: &buf,
            pos: CKPT_MAGIC.len(),
            path,
        };
        let feature_dim = r.usize()?;
        let trunk = match r.u64()? {
            0 => Trunk::Identity,
            1 => {
                let k = r.usize()?;
                let kernels = r.tensor()?;
                let bias = r.tensor()?;
                Trunk::Conv { kernels, bias, k }
            }
            tag => return Err(r.fail(&format!("unknown trunk tag {tag}"))),
        };
        let n = r.usize()?;
        let mut branches = Vec::with_capacity(n);
        for _ in 0..n {
            let name = r.string()?;
            let classes = r.usize()?;
            let group_id = r.usize()?;
            let spec = BranchSpec::new(&name, classes, group_id)?;
            let variant = match r.u64()? {
                0 => AttentionVariant::Ptam,
                1 => AttentionVariant::Stam,
                tag => return Err(r.fail(&format!("unknown attention tag {tag}"))),
            };
            let hidden = r.usize()?;
            let k1 = r.usize()?;
            let k2 = r.usize()?;
            let attention = AttentionParams {
                variant,
                feature_dim,
                hidden,
                k1,
                k2,
                conv1_kernels: r.tensor()?,
                conv1_bias: r.tensor()?,
                conv2_kernels: r.tensor()?,
                conv2_bias: r.tensor()?,
            };
            let head = BranchHead {
                weight: r.tensor()?,
            };
            branches.push(Branch {
                spec,
                attention,
                head,
            });
        }
        if r.pos != buf.len() {
            return Err(r.fail("trailing bytes"));
        }
        Ok(MultiBranchModel {
            feature_dim,
            trunk,
            branches,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::aggregate;
    use approx::assert_relative_eq;

    fn small_model(variant: AttentionVariant, seed: u64) -> MultiBranchModel {
        let specs = vec![
            BranchSpec::new("a", 2, 0).unwrap(),
            BranchSpec::new("b", 3, 0).unwrap(),
            BranchSpec::new("c", 2, 1).unwrap(),
        ];
        MultiBranchModel::init(specs, &ModelLayout::new(4, variant), seed).unwrap()
    }

    fn feature(d: usize, t: usize, seed: u64) -> FeatureMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..d * t).map(|_| rng.gen_range(-1.5..1.5)).collect();
        FeatureMatrix::new(Tensor::matrix(d, t, data).unwrap()).unwrap()
    }

    #[test]
    fn branch_predict_uniform_for_zero_head() {
        let head = BranchHead {
            weight: Tensor::zeros(Shape::Matrix(4, 3)),
        };
        let f = Tensor::vector(vec![1.0, -2.0, 0.5]).unwrap();
        let p = branch_predict(&f, &head).unwrap();
        for &v in p.data() {
            assert_relative_eq!(v, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn branch_predict_matches_softmax_oracle() {
        let head = BranchHead {
            weight: Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
        };
        let f = Tensor::vector(vec![1.0, 2.0]).unwrap();
        let p = branch_predict(&f, &head).unwrap();
        assert_relative_eq!(p.data()[0], 0.26894, epsilon = 1e-5);
        assert_relative_eq!(p.data()[1], 0.73106, epsilon = 1e-5);
        let sum: f64 = p.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forward_shapes() {
        let model = small_model(AttentionVariant::Stam, 3);
        let f = feature(4, 6, 9);
        let out = model.predict(&f).unwrap();
        assert_eq!(out.attention.shape(), Shape::Matrix(3, 6));
        assert_eq!(out.probabilities.len(), 3);
        assert_eq!(out.probabilities[1].numel(), 3);
    }

    #[test]
    fn zero_heads_predict_uniform() {
        let mut model = small_model(AttentionVariant::Stam, 4);
        for b in &mut model.branches {
            b.head.weight = Tensor::zeros(b.head.weight.shape());
        }
        let out = model.predict(&feature(4, 5, 1)).unwrap();
        for (p, b) in out.probabilities.iter().zip(&model.branches) {
            for &v in p.data() {
                assert_relative_eq!(v, 1.0 / b.spec.classes as f64, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn branches_are_independent() {
        let model = small_model(AttentionVariant::Stam, 5);
        let f = feature(4, 6, 2);
        let before = model.predict(&f).unwrap();

        let mut perturbed = model.clone();
        perturbed.branches[2].head.weight.data_mut()[0] += 0.7;
        perturbed.branches[2].attention.conv1_kernels.data_mut()[1] -= 0.3;
        let after = perturbed.predict(&f).unwrap();

        for i in 0..2 {
            assert_eq!(
                before.probabilities[i].data(),
                after.probabilities[i].data(),
                "branch {i} changed when branch 2 was perturbed"
            );
        }
        assert_ne!(before.probabilities[2].data(), after.probabilities[2].data());
    }

    #[test]
    fn one_hot_attention_equals_single_frame() {
        let model = small_model(AttentionVariant::Stam, 6);
        let f = feature(4, 5, 3);
        let t = 3;
        let mut one_hot = vec![0.0; 5];
        one_hot[t] = 1.0;
        let e_t = Tensor::vector(one_hot).unwrap();
        let column = f.window(t, 1).unwrap();
        for b in &model.branches {
            let pooled = aggregate(&f, &e_t).unwrap();
            let via_one_hot = branch_predict(&pooled, &b.head).unwrap();
            let frame: Vec<f64> = (0..4).map(|r| column.tensor().at(r, 0)).collect();
            let direct = branch_predict(&Tensor::vector(frame).unwrap(), &b.head).unwrap();
            for (a, d) in via_one_hot.data().iter().zip(direct.data()) {
                assert!((a - d).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let layout = ModelLayout {
            conv_trunk: true,
            ..ModelLayout::new(4, AttentionVariant::Ptam)
        };
        let specs = vec![
            BranchSpec::new("x", 2, 0).unwrap(),
            BranchSpec::new("y", 5, 1).unwrap(),
        ];
        let model = MultiBranchModel::init(specs, &layout, 11).unwrap();
        model.save(&path).unwrap();
        let loaded = MultiBranchModel::load(&path).unwrap();
        assert_eq!(model, loaded);
        // second save produces identical bytes
        let path2 = dir.path().join("model2.ckpt");
        loaded.save(&path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(MultiBranchModel::load(&path).is_err());
    }
}
