//! Adam training on random length-T segments and segment-averaged trajectory
//! inference.
//!
//! Each batch builds one differentiation graph over every sample's forward
//! pass; the objective is the batch-mean balanced cross-entropy plus
//! lambda times the batch-mean attention penalty. Everything is driven by a
//! single seeded generator, so a run is reproducible bit for bit.

use crate::attention::{AttentionVariant, FeatureMatrix};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::losses::{classification_loss_node, regularizer_node, Regularizer};
use crate::metrics::{evaluate, Subset};
use crate::model::{ModelLayout, MultiBranchModel};
use crate::synth::VideoSample;
use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub lr0: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_epoch: usize,
    pub weight_decay: f64,
    pub lambda: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Segment length T used both for training windows and inference.
    pub segment_len: usize,
    pub regularizer: Regularizer,
    pub variant: AttentionVariant,
    /// Validation cadence in epochs.
    pub eval_every: usize,
    pub seed: u64,
    /// Fraction of the training set held out for checkpoint selection.
    pub val_frac: f64,
    pub hidden: Option<usize>,
    pub k1: usize,
    pub k2: usize,
    pub conv_trunk: bool,
}

impl TrainConfig {
    /// Full-scale protocol: batch 64, 200 epochs, decay at 100.
    pub fn paper_scale() -> Self {
        TrainConfig {
            lr0: 3e-4,
            lr_decay_factor: 0.3,
            lr_decay_epoch: 100,
            weight_decay: 5e-4,
            lambda: 0.02,
            batch: 64,
            epochs: 200,
            segment_len: 6,
            regularizer: Regularizer::Group,
            variant: AttentionVariant::Stam,
            eval_every: 20,
            seed: 0,
            val_frac: 0.1,
            hidden: None,
            k1: 3,
            k2: 3,
            conv_trunk: false,
        }
    }

    /// Desk-scale defaults for experiments that must run in minutes:
    /// batch 16, 60 epochs, decay at 30.
    pub fn desk_scale() -> Self {
        TrainConfig {
            batch: 16,
            epochs: 60,
            lr_decay_epoch: 30,
            ..TrainConfig::paper_scale()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segment_len < 1 {
            return Err(Error::Config("segment_len must be >= 1".into()));
        }
        if self.batch < 1 {
            return Err(Error::Config("batch must be >= 1".into()));
        }
        if self.lambda < 0.0 {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.val_frac) {
            return Err(Error::Config(format!(
                "val_frac must be in [0,1), got {}",
                self.val_frac
            )));
        }
        Ok(())
    }

    /// Step schedule: lr0 before the decay epoch, lr0 * factor from it on.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if epoch < self.lr_decay_epoch {
            self.lr0
        } else {
            self.lr0 * self.lr_decay_factor
        }
    }

    pub fn layout(&self, feature_dim: usize) -> ModelLayout {
        ModelLayout {
            feature_dim,
            variant: self.variant,
            hidden: self.hidden,
            k1: self.k1,
            k2: self.k2,
            conv_trunk: self.conv_trunk,
        }
    }
}

// ── Adam ─────────────────────────────────────────────────────────────

/// First/second moment buffers, one pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &[&Tensor]) -> Self {
        AdamState {
            m: params.iter().map(|p| p.zeros_like()).collect(),
            v: params.iter().map(|p| p.zeros_like()).collect(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// One bias-corrected update. Weight decay couples into the gradient
    /// (grad += wd * param) before the moment updates.
    pub fn step(
        &mut self,
        params: &mut [&mut Tensor],
        grads: &[Tensor],
        lr: f64,
        weight_decay: f64,
    ) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension(format!(
                "adam state holds {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if param.shape() != grad.shape() {
                return Err(Error::Dimension(format!(
                    "parameter {} with gradient {}",
                    param.shape(),
                    grad.shape()
                )));
            }
            for i in 0..param.numel() {
                let g = grad.data()[i] + weight_decay * param.data()[i];
                let mi = self.beta1 * m.data()[i] + (1.0 - self.beta1) * g;
                let vi = self.beta2 * v.data()[i] + (1.0 - self.beta2) * g * g;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                let m_hat = mi / bc1;
                let v_hat = vi / bc2;
                param.data_mut()[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

// ── segments ─────────────────────────────────────────────────────────

/// Uniformly random contiguous window of `len` frames, or `None` when the
/// video is too short and must be skipped.
pub fn sample_segment<'a>(
    video: &'a VideoSample,
    len: usize,
    rng: &mut impl Rng,
) -> Option<(FeatureMatrix, &'a [usize])> {
    let frames = video.len();
    if frames < len {
        return None;
    }
    let start = rng.gen_range(0..=frames - len);
    let window = video
        .frames
        .window(start, len)
        .expect("window bounds checked");
    Some((window, &video.labels))
}

/// Inference windows for a length-`total` trajectory: consecutive disjoint
/// segments of `len` frames, plus one final overlapping window covering the
/// tail when `total` is not a multiple of `len`.
pub fn segment_windows(total: usize, len: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(total / len + 1);
    let full = total / len;
    for i in 0..full {
        out.push((i * len, (i + 1) * len));
    }
    if total % len != 0 && total >= len {
        out.push((total - len, total));
    }
    out
}

/// Segment-averaged trajectory prediction: one simplex vector per branch.
pub fn infer_trajectory(
    model: &MultiBranchModel,
    frames: &FeatureMatrix,
    segment_len: usize,
) -> Result<Vec<Tensor>> {
    if frames.len() < segment_len {
        return Err(Error::Evaluation(format!(
            "trajectory of {} frames is shorter than the segment length {segment_len}",
            frames.len()
        )));
    }
    let windows = segment_windows(frames.len(), segment_len);
    let mut sums: Vec<Tensor> = Vec::new();
    for &(start, end) in &windows {
        let window = frames.window(start, end - start)?;
        let out = model.predict(&window)?;
        if sums.is_empty() {
            sums = out.probabilities;
        } else {
            for (acc, p) in sums.iter_mut().zip(&out.probabilities) {
                *acc = crate::tensor::add(acc, p)?;
            }
        }
    }
    let n = windows.len() as f64;
    Ok(sums
        .into_iter()
        .map(|s| crate::tensor::scale(&s, 1.0 / n))
        .collect())
}

// ── training ─────────────────────────────────────────────────────────

/// One row of the training log.
#[derive(Debug, Clone)]
pub struct LogRecord {
    pub epoch: usize,
    pub lr: f64,
    pub loss_class: f64,
    /// Raw penalty value (before lambda); 0 when no penalty is active.
    pub loss_reg: f64,
    pub val_avg_acc: Option<f64>,
    pub val_avg_f1: Option<f64>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Selected model: the best validation checkpoint when a validation set
    /// was given, otherwise the final model.
    pub model: MultiBranchModel,
    pub final_model: MultiBranchModel,
    pub log: Vec<LogRecord>,
    pub best_epoch: Option<usize>,
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer over seed ^ salt
    let mut z = (seed ^ salt).wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Minimizes the batch-averaged total loss over random training segments.
///
/// Videos shorter than the segment length are excluded up front. When a
/// validation set is given it is scored every `eval_every` epochs (and at the
/// last epoch); the checkpoint with the best validation average F1 becomes
/// the outcome's selected model.
pub fn fit(
    mut model: MultiBranchModel,
    train: &[VideoSample],
    val: Option<&[VideoSample]>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let usable: Vec<&VideoSample> = train
        .iter()
        .filter(|v| v.len() >= cfg.segment_len)
        .collect();
    if usable.is_empty() {
        return Err(Error::Config(format!(
            "no training videos with at least {} frames",
            cfg.segment_len
        )));
    }
    let partition = model.partition()?;
    let specs = model.specs();
    let apply_reg = cfg.regularizer != Regularizer::None && cfg.lambda > 0.0;

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0x7261696e));
    let mut adam = AdamState::new(&model.params());
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, MultiBranchModel)> = None;

    let mut order: Vec<usize> = (0..usable.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate(epoch);
        // Fisher-Yates over the sample order, one draw stream for the epoch
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }

        let mut class_sum = 0.0;
        let mut reg_sum = 0.0;
        let mut seen = 0usize;
        for (batch_idx, chunk) in order.chunks(cfg.batch).enumerate() {
            let mut g = Graph::new();
            let bound = model.bind(&mut g);
            let mut class_terms = Vec::with_capacity(chunk.len());
            let mut reg_terms = Vec::with_capacity(chunk.len());
            for &vi in chunk {
                let (window, labels) = sample_segment(usable[vi], cfg.segment_len, &mut rng)
                    .expect("short videos excluded above");
                let f = g.leaf(window.into_tensor());
                let fwd = model.forward_graph(&mut g, &bound, f)?;
                class_terms.push(classification_loss_node(
                    &mut g,
                    &fwd.predictions,
                    labels,
                    &specs,
                )?);
                if apply_reg {
                    let reg =
                        regularizer_node(&mut g, fwd.attention_matrix, cfg.regularizer, &partition)?
                            .expect("regularizer configured");
                    reg_terms.push(reg);
                }
            }
            let inv_n = 1.0 / chunk.len() as f64;
            let class_total = g.sum_scalars(&class_terms)?;
            let class_mean = g.scale(class_total, inv_n);
            let total = if apply_reg {
                let reg_total = g.sum_scalars(&reg_terms)?;
                let reg_mean = g.scale(reg_total, inv_n);
                reg_sum += g.item(reg_mean) * chunk.len() as f64;
                let weighted = g.scale(reg_mean, cfg.lambda);
                g.add(class_mean, weighted)?
            } else {
                class_mean
            };
            let loss = g.item(total);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            class_sum += g.item(class_mean) * chunk.len() as f64;
            seen += chunk.len();

            g.backward(total)?;
            let grads: Vec<Tensor> = model
                .param_nodes(&bound)
                .iter()
                .map(|&id| g.grad(id).clone())
                .collect();
            adam.step(&mut model.params_mut(), &grads, lr, cfg.weight_decay)?;
        }

        let mut record = LogRecord {
            epoch,
            lr,
            loss_class: class_sum / seen as f64,
            loss_reg: reg_sum / seen as f64,
            val_avg_acc: None,
            val_avg_f1: None,
        };
        if let Some(val_set) = val {
            let due = (epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs;
            if due && !val_set.is_empty() {
                let report = evaluate(&model, val_set, Subset::All, cfg.segment_len)?;
                record.val_avg_acc = Some(report.avg_accuracy);
                record.val_avg_f1 = Some(report.avg_f1);
                let better = best
                    .as_ref()
                    .map(|(f1, _, _)| report.avg_f1 > *f1)
                    .unwrap_or(true);
                if better {
                    best = Some((report.avg_f1, epoch, model.clone()));
                }
            }
        }
        log.push(record);
    }

    let best_epoch = best.as_ref().map(|(_, e, _)| *e);
    let selected = best.map(|(_, _, m)| m).unwrap_or_else(|| model.clone());
    Ok(TrainOutcome {
        model: selected,
        final_model: model,
        log,
        best_epoch,
    })
}

/// Deterministic train/validation split by shuffled index.
pub fn split_train_val(
    samples: &[VideoSample],
    val_frac: f64,
    seed: u64,
) -> (Vec<VideoSample>, Vec<VideoSample>) {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x73706c69));
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let n_val = ((samples.len() as f64) * val_frac).round() as usize;
    let (val_idx, train_idx) = order.split_at(n_val.min(samples.len()));
    let mut train: Vec<usize> = train_idx.to_vec();
    let mut val: Vec<usize> = val_idx.to_vec();
    train.sort_unstable();
    val.sort_unstable();
    (
        train.into_iter().map(|i| samples[i].clone()).collect(),
        val.into_iter().map(|i| samples[i].clone()).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BranchSpec;
    use crate::synth::{generate_dataset, SynthConfig};
    use approx::assert_relative_eq;

    #[test]
    fn schedule_emits_exact_rates() {
        let cfg = TrainConfig::desk_scale();
        assert_eq!(cfg.learning_rate(0), 3e-4);
        assert_eq!(cfg.learning_rate(29), 3e-4);
        let decayed = cfg.learning_rate(30);
        assert!(
            (decayed - 9e-5).abs() < 1e-18,
            "decayed lr {decayed:e} not 9e-5"
        );
        assert_eq!(cfg.learning_rate(59), decayed);
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut p = Tensor::vector(vec![1.0, -2.0]).unwrap();
        let g = Tensor::vector(vec![0.0, 0.0]).unwrap();
        let mut state = AdamState::new(&[&p]);
        state.step(&mut [&mut p], &[g], 1e-3, 0.0).unwrap();
        assert_eq!(p.data(), &[1.0, -2.0]);
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let mut p = Tensor::vector(vec![0.0]).unwrap();
        let g = Tensor::vector(vec![1.0]).unwrap();
        let mut state = AdamState::new(&[&p]);
        state.step(&mut [&mut p], &[g], 1e-3, 0.0).unwrap();
        assert!(
            (p.data()[0] + 1e-3).abs() < 1e-9,
            "first step was {}",
            p.data()[0]
        );
    }

    #[test]
    fn adam_weight_decay_couples_into_gradient() {
        // zero gradient but nonzero parameter: decay alone moves it
        let mut p = Tensor::vector(vec![2.0]).unwrap();
        let g = Tensor::vector(vec![0.0]).unwrap();
        let mut state = AdamState::new(&[&p]);
        state.step(&mut [&mut p], &[g], 1e-3, 0.5).unwrap();
        // effective gradient 1.0: same step as the unit-gradient case
        assert!((p.data()[0] - (2.0 - 1e-3)).abs() < 1e-9);
    }

    #[test]
    fn adam_shape_mismatch_rejected() {
        let mut p = Tensor::vector(vec![0.0, 0.0]).unwrap();
        let g = Tensor::vector(vec![1.0]).unwrap();
        let mut state = AdamState::new(&[&p]);
        assert!(state.step(&mut [&mut p], &[g], 1e-3, 0.0).is_err());
    }

    fn toy_dataset(n: usize, t_total: usize, seed: u64) -> (Vec<VideoSample>, SynthConfig) {
        let cfg = SynthConfig {
            parts: 2,
            attrs_per_part: vec![1, 1],
            classes_per_branch: vec![2, 2],
            dim_per_part: 4,
            t_total,
            p_occ: 0.2,
            persistence: 0.5,
            noise_sigma: 0.2,
            occ_noise: 1.0,
            codebook_seed: 3,
            n_videos: n,
        };
        (generate_dataset(&cfg, seed).unwrap(), cfg)
    }

    fn toy_train_config() -> TrainConfig {
        TrainConfig {
            epochs: 5,
            batch: 4,
            eval_every: 5,
            seed: 13,
            ..TrainConfig::desk_scale()
        }
    }

    fn toy_model(cfg: &SynthConfig, train_cfg: &TrainConfig, seed: u64) -> MultiBranchModel {
        let specs: Vec<BranchSpec> = vec![
            BranchSpec::new("a", 2, 0).unwrap(),
            BranchSpec::new("b", 2, 1).unwrap(),
        ];
        MultiBranchModel::init(specs, &train_cfg.layout(cfg.feature_dim()), seed).unwrap()
    }

    #[test]
    fn segment_sampling_contracts() {
        let (data, _) = toy_dataset(1, 6, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // length exactly T: the whole video
        let (window, _) = sample_segment(&data[0], 6, &mut rng).unwrap();
        assert_eq!(window.tensor(), data[0].frames.tensor());
        // too short: skipped
        assert!(sample_segment(&data[0], 7, &mut rng).is_none());
        // reproducible window under a fixed seed
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        let (w1, _) = sample_segment(&data[0], 3, &mut r1).unwrap();
        let (w2, _) = sample_segment(&data[0], 3, &mut r2).unwrap();
        assert_eq!(w1.tensor(), w2.tensor());
    }

    #[test]
    fn inference_windows_cover_tails() {
        assert_eq!(segment_windows(12, 6), vec![(0, 6), (6, 12)]);
        assert_eq!(segment_windows(14, 6), vec![(0, 6), (6, 12), (8, 14)]);
        assert_eq!(segment_windows(6, 6), vec![(0, 6)]);
        assert_eq!(segment_windows(7, 6), vec![(0, 6), (1, 7)]);
    }

    #[test]
    fn trajectory_average_stays_on_simplex() {
        let (data, synth_cfg) = toy_dataset(3, 14, 2);
        let cfg = toy_train_config();
        let model = toy_model(&synth_cfg, &cfg, 21);
        for sample in &data {
            let preds = infer_trajectory(&model, &sample.frames, 6).unwrap();
            for p in preds {
                let sum: f64 = p.data().iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
                assert!(p.data().iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn identical_segments_average_to_one_segment() {
        let (data, synth_cfg) = toy_dataset(1, 6, 3);
        let cfg = toy_train_config();
        let model = toy_model(&synth_cfg, &cfg, 8);
        // tile the same 6 frames twice
        let base = &data[0].frames;
        let mut tiled = Vec::new();
        for r in 0..base.dim() {
            for rep in 0..2 {
                let _ = rep;
                for c in 0..6 {
                    tiled.push(base.tensor().at(r, c));
                }
            }
        }
        let frames =
            FeatureMatrix::new(Tensor::matrix(base.dim(), 12, tiled).unwrap()).unwrap();
        let avg = infer_trajectory(&model, &frames, 6).unwrap();
        let single = infer_trajectory(&model, base, 6).unwrap();
        for (a, s) in avg.iter().zip(&single) {
            for (x, y) in a.data().iter().zip(s.data()) {
                assert_relative_eq!(x, y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn short_trajectory_is_excluded() {
        let (data, synth_cfg) = toy_dataset(1, 4, 4);
        let cfg = toy_train_config();
        let model = toy_model(&synth_cfg, &cfg, 9);
        assert!(infer_trajectory(&model, &data[0].frames, 6).is_err());
    }

    #[test]
    fn loss_decreases_on_toy_set() {
        let (data, synth_cfg) = toy_dataset(10, 8, 5);
        let mut cfg = toy_train_config();
        cfg.epochs = 50;
        cfg.regularizer = Regularizer::Group;
        let model = toy_model(&synth_cfg, &cfg, 33);
        let out = fit(model, &data, None, &cfg).unwrap();
        let first = out.log[0].loss_class;
        let last = out.log.last().unwrap().loss_class;
        assert!(
            last < first,
            "classification loss did not decrease: {first} -> {last}"
        );
    }

    #[test]
    fn zero_lambda_matches_unregularized_run() {
        let (data, synth_cfg) = toy_dataset(8, 8, 6);
        let mut a = toy_train_config();
        a.regularizer = Regularizer::None;
        a.lambda = 0.0;
        let mut b = toy_train_config();
        b.regularizer = Regularizer::Group;
        b.lambda = 0.0;

        let model_a = toy_model(&synth_cfg, &a, 44);
        let model_b = toy_model(&synth_cfg, &b, 44);
        let out_a = fit(model_a, &data, None, &a).unwrap();
        let out_b = fit(model_b, &data, None, &b).unwrap();
        for (ra, rb) in out_a.log.iter().zip(&out_b.log) {
            assert_eq!(ra.loss_class, rb.loss_class);
        }
        assert_eq!(out_a.final_model, out_b.final_model);
    }

    #[test]
    fn training_is_deterministic() {
        let (data, synth_cfg) = toy_dataset(8, 8, 7);
        let cfg = toy_train_config();
        let out1 = fit(toy_model(&synth_cfg, &cfg, 50), &data, None, &cfg).unwrap();
        let out2 = fit(toy_model(&synth_cfg, &cfg, 50), &data, None, &cfg).unwrap();
        assert_eq!(out1.final_model, out2.final_model);
        for (a, b) in out1.log.iter().zip(&out2.log) {
            assert_eq!(a.loss_class, b.loss_class);
            assert_eq!(a.loss_reg, b.loss_reg);
        }
    }

    #[test]
    fn short_videos_are_skipped_not_fatal() {
        let (mut data, synth_cfg) = toy_dataset(6, 8, 8);
        // truncate one video below the segment length
        let short = {
            let s = &data[0];
            let d = s.frames.dim();
            let mut vals = Vec::new();
            for r in 0..d {
                for c in 0..3 {
                    vals.push(s.frames.tensor().at(r, c));
                }
            }
            VideoSample {
                id: 99,
                frames: FeatureMatrix::new(Tensor::matrix(d, 3, vals).unwrap()).unwrap(),
                labels: s.labels.clone(),
                occ_mask: s.occ_mask.iter().map(|m| m[..3].to_vec()).collect(),
            }
        };
        data.push(short);
        let cfg = toy_train_config();
        let model = toy_model(&synth_cfg, &cfg, 51);
        assert!(fit(model, &data, None, &cfg).is_ok());
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let (data, _) = toy_dataset(10, 6, 9);
        let (train1, val1) = split_train_val(&data, 0.3, 5);
        let (train2, val2) = split_train_val(&data, 0.3, 5);
        assert_eq!(train1, train2);
        assert_eq!(val1, val2);
        assert_eq!(train1.len(), 7);
        assert_eq!(val1.len(), 3);
        for v in &val1 {
            assert!(!train1.iter().any(|t| t.id == v.id));
        }
    }
}
