//! Accuracy and macro-F1 evaluation over all, occluded, or visible subsets.
//!
//! Predictions are made per trajectory (segment-averaged), argmaxed per
//! branch, and scored per attribute; reported averages are unweighted means
//! over attributes. Attributes whose ground truth is constant across the
//! evaluated subset are flagged and left out of the averages.

use crate::error::{Error, Result};
use crate::model::MultiBranchModel;
use crate::synth::VideoSample;
use crate::tensor::Tensor;
use crate::train::{infer_trajectory, segment_windows};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subset {
    All,
    Occluded,
    Visible,
}

impl Subset {
    pub fn name(&self) -> &'static str {
        match self {
            Subset::All => "all",
            Subset::Occluded => "occluded",
            Subset::Visible => "visible",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Ok(Subset::All),
            "occluded" => Ok(Subset::Occluded),
            "visible" => Ok(Subset::Visible),
            other => Err(Error::Lookup(format!("unknown subset '{other}'"))),
        }
    }

    pub fn contains(&self, sample: &VideoSample) -> bool {
        match self {
            Subset::All => true,
            Subset::Occluded => sample.is_occluded(),
            Subset::Visible => !sample.is_occluded(),
        }
    }
}

/// Index of the largest entry, ties broken toward the lowest index.
pub fn argmax(p: &Tensor) -> usize {
    let mut best = 0;
    for (i, &v) in p.data().iter().enumerate() {
        if v > p.data()[best] {
            best = i;
        }
    }
    best
}

/// Fraction of matching predictions.
pub fn attribute_accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    if preds.is_empty() || preds.len() != labels.len() {
        return Err(Error::Evaluation(format!(
            "accuracy over {} predictions and {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Macro F1: unweighted mean over classes of 2PR/(P+R), with a per-class F1
/// of 0 when precision and recall are both 0.
pub fn attribute_f1(preds: &[usize], labels: &[usize], classes: usize) -> Result<f64> {
    if preds.is_empty() || preds.len() != labels.len() {
        return Err(Error::Evaluation(format!(
            "f1 over {} predictions and {} labels",
            preds.len(),
            labels.len()
        )));
    }
    for &v in preds.iter().chain(labels) {
        if v >= classes {
            return Err(Error::Label(format!("value {v} out of range for {classes} classes")));
        }
    }
    let mut f1_sum = 0.0;
    for class in 0..classes {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for (&p, &l) in preds.iter().zip(labels) {
            match (p == class, l == class) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
        let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
        if precision + recall > 0.0 {
            f1_sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    Ok(f1_sum / classes as f64)
}

/// Branch indices whose ground truth never varies across the subset.
pub fn constant_attribute_guard(samples: &[&VideoSample], n_branches: usize) -> Vec<usize> {
    (0..n_branches)
        .filter(|&b| {
            let mut values = samples.iter().map(|s| s.labels[b]);
            match values.next() {
                None => true,
                Some(first) => values.all(|v| v == first),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct AttributeMetrics {
    pub name: String,
    pub accuracy: f64,
    pub f1: f64,
    /// Flagged by the constant-label guard; not counted in the averages.
    pub excluded: bool,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub subset: Subset,
    pub attributes: Vec<AttributeMetrics>,
    pub avg_accuracy: f64,
    pub avg_f1: f64,
    /// Trajectories actually evaluated.
    pub samples: usize,
    /// Trajectories dropped for being shorter than the segment length.
    pub excluded_short: usize,
}

impl EvalReport {
    pub fn excluded_attributes(&self) -> Vec<&str> {
        self.attributes
            .iter()
            .filter(|a| a.excluded)
            .map(|a| a.name.as_str())
            .collect()
    }
}

/// Segment-averaged trajectory evaluation over one subset.
pub fn evaluate(
    model: &MultiBranchModel,
    samples: &[VideoSample],
    subset: Subset,
    segment_len: usize,
) -> Result<EvalReport> {
    let in_subset: Vec<&VideoSample> = samples.iter().filter(|s| subset.contains(s)).collect();
    if in_subset.is_empty() {
        return Err(Error::Evaluation(format!(
            "no samples in subset '{}'",
            subset.name()
        )));
    }
    let (usable, short): (Vec<&VideoSample>, Vec<&VideoSample>) = in_subset
        .into_iter()
        .partition(|s| s.len() >= segment_len);
    if usable.is_empty() {
        return Err(Error::Evaluation(format!(
            "every sample in subset '{}' is shorter than the segment length {segment_len}",
            subset.name()
        )));
    }

    let specs = model.specs();
    let n_branches = specs.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::with_capacity(usable.len()); n_branches];
    let mut labels: Vec<Vec<usize>> = vec![Vec::with_capacity(usable.len()); n_branches];
    for sample in &usable {
        let probs = infer_trajectory(model, &sample.frames, segment_len)?;
        for (b, p) in probs.iter().enumerate() {
            preds[b].push(argmax(p));
            labels[b].push(sample.labels[b]);
        }
    }

    let constant = constant_attribute_guard(&usable, n_branches);
    let mut attributes = Vec::with_capacity(n_branches);
    let mut acc_sum = 0.0;
    let mut f1_sum = 0.0;
    let mut included = 0usize;
    for (b, spec) in specs.iter().enumerate() {
        let accuracy = attribute_accuracy(&preds[b], &labels[b])?;
        let f1 = attribute_f1(&preds[b], &labels[b], spec.classes)?;
        let excluded = constant.contains(&b);
        if !excluded {
            acc_sum += accuracy;
            f1_sum += f1;
            included += 1;
        }
        attributes.push(AttributeMetrics {
            name: spec.name.clone(),
            accuracy,
            f1,
            excluded,
        });
    }
    if included == 0 {
        return Err(Error::Evaluation(format!(
            "every attribute has constant ground truth in subset '{}'",
            subset.name()
        )));
    }
    Ok(EvalReport {
        subset,
        attributes,
        avg_accuracy: acc_sum / included as f64,
        avg_f1: f1_sum / included as f64,
        samples: usable.len(),
        excluded_short: short.len(),
    })
}

/// Mean attention weight a group's branches put on occluded versus visible
/// frames, aggregated over every inference window of every usable sample.
#[derive(Debug, Clone)]
pub struct GroupAttentionStats {
    pub group: usize,
    pub mean_occluded: Option<f64>,
    pub mean_visible: Option<f64>,
    pub occluded_frames: usize,
    pub visible_frames: usize,
}

pub fn attention_occlusion_stats(
    model: &MultiBranchModel,
    samples: &[VideoSample],
    segment_len: usize,
) -> Result<Vec<GroupAttentionStats>> {
    let specs = model.specs();
    let n_groups = specs.iter().map(|s| s.group_id + 1).max().unwrap_or(0);
    let mut sums = vec![(0.0f64, 0usize, 0.0f64, 0usize); n_groups];
    for sample in samples.iter().filter(|s| s.len() >= segment_len) {
        for (start, end) in segment_windows(sample.len(), segment_len) {
            let window = sample.frames.window(start, end - start)?;
            let out = model.predict(&window)?;
            for (b, spec) in specs.iter().enumerate() {
                let part = spec.group_id;
                for tau in 0..(end - start) {
                    let weight = out.attention.at(b, tau);
                    let slot = &mut sums[part];
                    if sample.occ_mask[part][start + tau] {
                        slot.0 += weight;
                        slot.1 += 1;
                    } else {
                        slot.2 += weight;
                        slot.3 += 1;
                    }
                }
            }
        }
    }
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(group, (occ, n_occ, vis, n_vis))| GroupAttentionStats {
            group,
            mean_occluded: (n_occ > 0).then(|| occ / n_occ as f64),
            mean_visible: (n_vis > 0).then(|| vis / n_vis as f64),
            occluded_frames: n_occ,
            visible_frames: n_vis,
        })
        .collect())
}

/// Mean group-sparsity value of the attention matrices over every inference
/// window, the quantity tracked by the lambda sweep.
pub fn mean_group_sparsity(
    model: &MultiBranchModel,
    samples: &[VideoSample],
    segment_len: usize,
) -> Result<f64> {
    let part = model.partition()?;
    let mut total = 0.0;
    let mut count = 0usize;
    for sample in samples.iter().filter(|s| s.len() >= segment_len) {
        for (start, end) in segment_windows(sample.len(), segment_len) {
            let window = sample.frames.window(start, end - start)?;
            let out = model.predict(&window)?;
            total += crate::losses::group_sparsity_loss(&out.attention, &part)?;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Evaluation("no segments to measure".into()));
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn f1_perfect_predictions() {
        let y = vec![0, 1, 2, 0, 1, 2];
        assert_relative_eq!(attribute_f1(&y, &y, 3).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(attribute_accuracy(&y, &y).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn f1_hand_confusion_matrix() {
        let labels = vec![1, 1, 0, 0];
        let preds = vec![1, 0, 0, 0];
        // class 1: P=1, R=0.5 -> 2/3; class 0: P=2/3, R=1 -> 0.8
        let f1 = attribute_f1(&preds, &labels, 2).unwrap();
        assert_relative_eq!(f1, (2.0 / 3.0 + 0.8) / 2.0, epsilon = 1e-12);
        assert_relative_eq!(f1, 0.73333, epsilon = 1e-5);
    }

    #[test]
    fn f1_degenerate_predictor() {
        let labels = vec![0, 0, 1, 1];
        let preds = vec![0, 0, 0, 0];
        let f1 = attribute_f1(&preds, &labels, 2).unwrap();
        assert_relative_eq!(f1, 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn f1_empty_is_error() {
        assert!(attribute_f1(&[], &[], 2).is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        let p = Tensor::vector(vec![0.4, 0.4, 0.2]).unwrap();
        assert_eq!(argmax(&p), 0);
        let p = Tensor::vector(vec![0.1, 0.5, 0.5]).unwrap();
        assert_eq!(argmax(&p), 1);
    }

    proptest! {
        #[test]
        fn f1_is_permutation_invariant(
            pairs in proptest::collection::vec((0usize..3, 0usize..3), 4..40),
            seed in 0u64..1000,
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let preds: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let labels: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let base = attribute_f1(&preds, &labels, 3).unwrap();

            let mut order: Vec<usize> = (0..pairs.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let p2: Vec<usize> = order.iter().map(|&i| preds[i]).collect();
            let l2: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
            prop_assert!((attribute_f1(&p2, &l2, 3).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn guard_flags_constants() {
        use crate::attention::FeatureMatrix;
        use crate::tensor::Tensor;
        let mk = |labels: Vec<usize>| VideoSample {
            id: 0,
            frames: FeatureMatrix::new(Tensor::matrix(1, 1, vec![0.0]).unwrap()).unwrap(),
            labels,
            occ_mask: vec![vec![false]],
        };
        let a = mk(vec![0, 1]);
        let b = mk(vec![0, 0]);
        let samples = vec![&a, &b];
        assert_eq!(constant_attribute_guard(&samples, 2), vec![0]);

        let varied = vec![&a];
        // single sample: everything is constant
        assert_eq!(constant_attribute_guard(&varied, 2), vec![0, 1]);

        let c = mk(vec![1, 0]);
        let both = vec![&a, &c];
        assert!(constant_attribute_guard(&both, 2).is_empty());
    }
}
