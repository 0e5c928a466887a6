//! Synthetic "crowded video" benchmark with controllable per-part occlusion.
//!
//! Each video is a sequence of feature columns split into part slots, one
//! slot per attribute group. A part's visible frames carry the superposition
//! of the part attributes' class codewords (drawn once from a seeded
//! codebook) plus Gaussian noise; occluded frames carry pure noise with no
//! label signal. Occlusion runs per part follow a two-state Markov chain
//! whose stationary occupied rate is the configured occlusion rate, so
//! obstructions persist over several consecutive frames.
//!
//! Datasets serialize to a line-oriented text format (one record per video)
//! that round-trips values bit-exactly.

use crate::attention::FeatureMatrix;
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::io::{BufRead, Write};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Part slots; parts correspond one-to-one with attribute groups.
    pub parts: usize,
    /// Attributes reading each part, in part order.
    pub attrs_per_part: Vec<usize>,
    /// Class count per branch, flattened in part order.
    pub classes_per_branch: Vec<usize>,
    /// Feature dimensions per part slot.
    pub dim_per_part: usize,
    /// Trajectory length in frames.
    pub t_total: usize,
    /// Stationary per-part occlusion rate.
    pub p_occ: f64,
    /// Probability of staying occluded frame-to-frame.
    pub persistence: f64,
    /// Noise added to visible codewords.
    pub noise_sigma: f64,
    /// Scale of the pure-noise content of occluded parts.
    pub occ_noise: f64,
    /// Seed of the label codebook (independent of the dataset seed).
    pub codebook_seed: u64,
    pub n_videos: usize,
}

impl SynthConfig {
    /// The occlusion benchmark layout: 5 parts, {2,2,4,2,2} attributes with
    /// a mix of binary and multi-class branches.
    pub fn default_benchmark() -> Self {
        SynthConfig {
            parts: 5,
            attrs_per_part: vec![2, 2, 4, 2, 2],
            classes_per_branch: vec![4, 3, 2, 2, 2, 4, 2, 2, 2, 4, 2, 2],
            dim_per_part: 8,
            t_total: 24,
            p_occ: 0.3,
            persistence: 0.7,
            noise_sigma: 0.3,
            occ_noise: 1.0,
            codebook_seed: 7,
            n_videos: 500,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.parts == 0 || self.dim_per_part == 0 || self.t_total == 0 {
            return Err(Error::Config("parts, dim_per_part, t_total must be >= 1".into()));
        }
        if self.attrs_per_part.len() != self.parts {
            return Err(Error::Config(format!(
                "{} attrs_per_part entries for {} parts",
                self.attrs_per_part.len(),
                self.parts
            )));
        }
        if self.attrs_per_part.iter().any(|&a| a == 0) {
            return Err(Error::Config("every part needs at least one attribute".into()));
        }
        let b: usize = self.attrs_per_part.iter().sum();
        if self.classes_per_branch.len() != b {
            return Err(Error::Config(format!(
                "{} class counts for {b} branches",
                self.classes_per_branch.len()
            )));
        }
        if self.classes_per_branch.iter().any(|&c| c < 2) {
            return Err(Error::Config("every branch needs at least 2 classes".into()));
        }
        if !(0.0..=1.0).contains(&self.p_occ) {
            return Err(Error::Config(format!("p_occ must be in [0,1], got {}", self.p_occ)));
        }
        if !(0.0..1.0).contains(&self.persistence) {
            return Err(Error::Config(format!(
                "persistence must be in [0,1), got {}",
                self.persistence
            )));
        }
        if self.noise_sigma < 0.0 || self.occ_noise < 0.0 {
            return Err(Error::Config("noise scales must be >= 0".into()));
        }
        // entry rate of the occlusion chain must be a probability
        if self.p_occ > 0.0 && self.p_occ < 1.0 {
            let enter = self.p_occ * (1.0 - self.persistence) / (1.0 - self.p_occ);
            if enter > 1.0 {
                return Err(Error::Config(format!(
                    "p_occ={} is unreachable with persistence={}; raise persistence",
                    self.p_occ, self.persistence
                )));
            }
        }
        Ok(())
    }

    pub fn num_branches(&self) -> usize {
        self.attrs_per_part.iter().sum()
    }

    pub fn feature_dim(&self) -> usize {
        self.parts * self.dim_per_part
    }

    /// Part slot that branch `b` reads.
    pub fn part_of_branch(&self, b: usize) -> usize {
        let mut idx = b;
        for (k, &count) in self.attrs_per_part.iter().enumerate() {
            if idx < count {
                return k;
            }
            idx -= count;
        }
        panic!("branch {b} out of range");
    }
}

/// One synthetic trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSample {
    pub id: usize,
    /// (feature_dim x frames); rows [k*dpp, (k+1)*dpp) belong to part k.
    pub frames: FeatureMatrix,
    /// Ground-truth class per branch.
    pub labels: Vec<usize>,
    /// occ_mask[part][frame]: true when the part is occluded in that frame.
    pub occ_mask: Vec<Vec<bool>>,
}

impl VideoSample {
    /// Number of frames.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// True iff any part is occluded in any frame.
    pub fn is_occluded(&self) -> bool {
        self.occ_mask.iter().any(|part| part.iter().any(|&m| m))
    }
}

/// Per-branch, per-class codewords in part-slot coordinates.
#[derive(Debug, Clone)]
pub struct Codebook {
    words: Vec<Vec<Vec<f64>>>,
}

impl Codebook {
    pub fn build(cfg: &SynthConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.codebook_seed);
        let words = cfg
            .classes_per_branch
            .iter()
            .map(|&classes| {
                (0..classes)
                    .map(|_| {
                        (0..cfg.dim_per_part)
                            .map(|_| rng.sample::<f64, _>(StandardNormal))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Codebook { words }
    }

    pub fn word(&self, branch: usize, class: usize) -> &[f64] {
        &self.words[branch][class]
    }

    /// Nearest-codeword decode of one part slot's content: enumerates every
    /// label combination of the part's branches and returns the combination
    /// whose codeword superposition is closest in L2.
    pub fn decode_part(&self, cfg: &SynthConfig, part: usize, content: &[f64]) -> Vec<usize> {
        let first: usize = cfg.attrs_per_part[..part].iter().sum();
        let branches: Vec<usize> = (first..first + cfg.attrs_per_part[part]).collect();
        let mut best: (f64, Vec<usize>) = (f64::INFINITY, vec![0; branches.len()]);
        let mut combo = vec![0usize; branches.len()];
        loop {
            let mut dist = 0.0;
            for (d, &x) in content.iter().enumerate() {
                let mut s = 0.0;
                for (j, &b) in branches.iter().enumerate() {
                    s += self.words[b][combo[j]][d];
                }
                dist += (x - s) * (x - s);
            }
            if dist < best.0 {
                best = (dist, combo.clone());
            }
            // advance mixed-radix counter
            let mut j = 0;
            loop {
                if j == branches.len() {
                    return best.1;
                }
                combo[j] += 1;
                if combo[j] < cfg.classes_per_branch[branches[j]] {
                    break;
                }
                combo[j] = 0;
                j += 1;
            }
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Per-video seed, splitting the master seed stream so videos can be
/// generated independently.
fn video_seed(seed: u64, index: usize) -> u64 {
    splitmix64(seed ^ splitmix64(index as u64))
}

fn occlusion_chain(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<bool> {
    if cfg.p_occ == 0.0 {
        return vec![false; cfg.t_total];
    }
    if cfg.p_occ == 1.0 {
        return vec![true; cfg.t_total];
    }
    let enter = cfg.p_occ * (1.0 - cfg.persistence) / (1.0 - cfg.p_occ);
    let mut out = Vec::with_capacity(cfg.t_total);
    // start from the stationary distribution so the empirical rate matches
    let mut occluded = rng.gen_bool(cfg.p_occ);
    out.push(occluded);
    for _ in 1..cfg.t_total {
        let p = if occluded { cfg.persistence } else { enter };
        occluded = rng.gen_bool(p);
        out.push(occluded);
    }
    out
}

/// Deterministic generation: the same (config, seed) produces identical
/// samples, and videos are seeded independently of each other.
pub fn generate_dataset(cfg: &SynthConfig, seed: u64) -> Result<Vec<VideoSample>> {
    cfg.validate()?;
    let codebook = Codebook::build(cfg);
    let d = cfg.feature_dim();
    let b = cfg.num_branches();
    let mut samples = Vec::with_capacity(cfg.n_videos);
    for id in 0..cfg.n_videos {
        let mut rng = ChaCha8Rng::seed_from_u64(video_seed(seed, id));
        let labels: Vec<usize> = cfg
            .classes_per_branch
            .iter()
            .map(|&c| rng.gen_range(0..c))
            .collect();
        let occ_mask: Vec<Vec<bool>> = (0..cfg.parts)
            .map(|_| occlusion_chain(cfg, &mut rng))
            .collect();

        // clean per-part signal: superposition of the part's label codewords
        let mut signal = vec![vec![0.0; cfg.dim_per_part]; cfg.parts];
        for branch in 0..b {
            let part = cfg.part_of_branch(branch);
            for (s, w) in signal[part]
                .iter_mut()
                .zip(codebook.word(branch, labels[branch]))
            {
                *s += w;
            }
        }

        let mut data = vec![0.0; d * cfg.t_total];
        for part in 0..cfg.parts {
            for t in 0..cfg.t_total {
                for dim in 0..cfg.dim_per_part {
                    let row = part * cfg.dim_per_part + dim;
                    let n: f64 = rng.sample(StandardNormal);
                    data[row * cfg.t_total + t] = if occ_mask[part][t] {
                        cfg.occ_noise * n
                    } else {
                        signal[part][dim] + cfg.noise_sigma * n
                    };
                }
            }
        }
        samples.push(VideoSample {
            id,
            frames: FeatureMatrix::new(Tensor::matrix(d, cfg.t_total, data)?)?,
            labels,
            occ_mask,
        });
    }
    Ok(samples)
}

// ── dataset files ────────────────────────────────────────────────────

/// Layout metadata stored in a dataset file header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetMeta {
    pub parts: usize,
    pub dim_per_part: usize,
    pub attrs_per_part: Vec<usize>,
    pub classes_per_branch: Vec<usize>,
}

impl DatasetMeta {
    pub fn from_config(cfg: &SynthConfig) -> Self {
        DatasetMeta {
            parts: cfg.parts,
            dim_per_part: cfg.dim_per_part,
            attrs_per_part: cfg.attrs_per_part.clone(),
            classes_per_branch: cfg.classes_per_branch.clone(),
        }
    }

    pub fn num_branches(&self) -> usize {
        self.attrs_per_part.iter().sum()
    }

    pub fn feature_dim(&self) -> usize {
        self.parts * self.dim_per_part
    }

    pub fn part_of_branch(&self, b: usize) -> usize {
        let mut idx = b;
        for (k, &count) in self.attrs_per_part.iter().enumerate() {
            if idx < count {
                return k;
            }
            idx -= count;
        }
        panic!("branch {b} out of range");
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub samples: Vec<VideoSample>,
}

const HEADER_TAG: &str = "gstam.dataset.v1";

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn mask_rle(mask: &[bool]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < mask.len() {
        let v = mask[i];
        let mut run = 1;
        while i + run < mask.len() && mask[i + run] == v {
            run += 1;
        }
        out.push(if v { 'o' } else { 'v' });
        out.push_str(&run.to_string());
        i += run;
    }
    out
}

fn parse_rle(s: &str, expect_len: usize) -> Option<Vec<bool>> {
    let mut out = Vec::with_capacity(expect_len);
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        let occluded = match c {
            'o' => true,
            'v' => false,
            _ => return None,
        };
        let mut digits = String::new();
        while let Some(d) = chars.peek().filter(|d| d.is_ascii_digit()) {
            digits.push(*d);
            chars.next();
        }
        let run: usize = digits.parse().ok()?;
        if run == 0 {
            return None;
        }
        out.extend(std::iter::repeat(occluded).take(run));
    }
    (out.len() == expect_len).then_some(out)
}

/// Writes one header line plus one record line per video. Feature values use
/// the shortest decimal form that parses back to the identical f64.
pub fn save_dataset(path: &Path, meta: &DatasetMeta, samples: &[VideoSample]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(
        w,
        "{HEADER_TAG} parts={} dim_per_part={} attrs_per_part={} classes={}",
        meta.parts,
        meta.dim_per_part,
        join(&meta.attrs_per_part),
        join(&meta.classes_per_branch),
    )
    .map_err(|e| Error::io(path, e))?;
    for s in samples {
        let t = s.frames.tensor();
        let values = join(t.data());
        let masks: Vec<String> = s.occ_mask.iter().map(|m| mask_rle(m)).collect();
        writeln!(
            w,
            "{}|{}x{}|{}|{}|{}",
            s.id,
            t.rows(),
            t.cols(),
            values,
            join(&s.labels),
            masks.join(";")
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn parse_usize_list(s: &str) -> Option<Vec<usize>> {
    if s.is_empty() {
        return Some(Vec::new());
    }
    s.split(',').map(|v| v.parse().ok()).collect()
}

/// Loads a dataset file. A file with no records (or no content at all) loads
/// as an empty sample list.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.into(),
        line,
        msg,
    };

    let mut meta: Option<DatasetMeta> = None;
    let mut samples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if meta.is_none() {
            let rest = trimmed
                .strip_prefix(HEADER_TAG)
                .ok_or_else(|| parse_err(lineno, format!("expected '{HEADER_TAG}' header")))?;
            let mut m = DatasetMeta::default();
            for field in rest.split_whitespace() {
                let (key, value) = field
                    .split_once('=')
                    .ok_or_else(|| parse_err(lineno, format!("bad header field '{field}'")))?;
                match key {
                    "parts" => {
                        m.parts = value
                            .parse()
                            .map_err(|_| parse_err(lineno, format!("bad parts '{value}'")))?
                    }
                    "dim_per_part" => {
                        m.dim_per_part = value.parse().map_err(|_| {
                            parse_err(lineno, format!("bad dim_per_part '{value}'"))
                        })?
                    }
                    "attrs_per_part" => {
                        m.attrs_per_part = parse_usize_list(value).ok_or_else(|| {
                            parse_err(lineno, format!("bad attrs_per_part '{value}'"))
                        })?
                    }
                    "classes" => {
                        m.classes_per_branch = parse_usize_list(value)
                            .ok_or_else(|| parse_err(lineno, format!("bad classes '{value}'")))?
                    }
                    other => {
                        return Err(parse_err(lineno, format!("unknown header field '{other}'")))
                    }
                }
            }
            meta = Some(m);
            continue;
        }

        let meta_ref = meta.as_ref().unwrap();
        let fields: Vec<&str> = trimmed.split('|').collect();
        let record = fields[0];
        if fields.len() != 5 {
            return Err(parse_err(
                lineno,
                format!("record {record}: expected 5 '|' fields, got {}", fields.len()),
            ));
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad record id '{}'", fields[0])))?;
        let (rows, cols) = fields[1]
            .split_once('x')
            .and_then(|(r, c)| Some((r.parse::<usize>().ok()?, c.parse::<usize>().ok()?)))
            .ok_or_else(|| parse_err(lineno, format!("record {id}: bad shape '{}'", fields[1])))?;
        if rows != meta_ref.feature_dim() {
            return Err(parse_err(
                lineno,
                format!(
                    "record {id}: {rows} feature rows but header implies {}",
                    meta_ref.feature_dim()
                ),
            ));
        }
        let values: Vec<f64> = fields[2]
            .split(',')
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(lineno, format!("record {id}: bad feature value")))?;
        if values.len() != rows * cols {
            return Err(parse_err(
                lineno,
                format!(
                    "record {id}: truncated values ({} of {})",
                    values.len(),
                    rows * cols
                ),
            ));
        }
        let labels = parse_usize_list(fields[3])
            .ok_or_else(|| parse_err(lineno, format!("record {id}: bad labels")))?;
        if labels.len() != meta_ref.num_branches() {
            return Err(parse_err(
                lineno,
                format!(
                    "record {id}: {} labels for {} branches",
                    labels.len(),
                    meta_ref.num_branches()
                ),
            ));
        }
        for (b, (&y, &c)) in labels.iter().zip(&meta_ref.classes_per_branch).enumerate() {
            if y >= c {
                return Err(parse_err(
                    lineno,
                    format!("record {id}: label {y} out of range for branch {b}"),
                ));
            }
        }
        let mask_fields: Vec<&str> = fields[4].split(';').collect();
        if mask_fields.len() != meta_ref.parts {
            return Err(parse_err(
                lineno,
                format!(
                    "record {id}: {} mask parts, expected {}",
                    mask_fields.len(),
                    meta_ref.parts
                ),
            ));
        }
        let occ_mask: Vec<Vec<bool>> = mask_fields
            .iter()
            .map(|m| parse_rle(m, cols))
            .collect::<Option<_>>()
            .ok_or_else(|| parse_err(lineno, format!("record {id}: bad occlusion mask")))?;

        samples.push(VideoSample {
            id,
            frames: FeatureMatrix::new(Tensor::matrix(rows, cols, values)?)?,
            labels,
            occ_mask,
        });
    }
    Ok(Dataset {
        meta: meta.unwrap_or_default(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> SynthConfig {
        SynthConfig {
            parts: 2,
            attrs_per_part: vec![1, 2],
            classes_per_branch: vec![2, 2, 3],
            dim_per_part: 4,
            t_total: 8,
            p_occ: 0.25,
            persistence: 0.6,
            noise_sigma: 0.2,
            occ_noise: 1.0,
            codebook_seed: 5,
            n_videos: 6,
        }
    }

    #[test]
    fn occlusion_rate_extremes() {
        let mut cfg = tiny_config();
        cfg.p_occ = 0.0;
        let clear = generate_dataset(&cfg, 1).unwrap();
        assert!(clear.iter().all(|s| !s.is_occluded()));

        cfg.p_occ = 1.0;
        cfg.persistence = 0.0;
        let blocked = generate_dataset(&cfg, 1).unwrap();
        assert!(blocked
            .iter()
            .all(|s| s.occ_mask.iter().all(|p| p.iter().all(|&m| m))));
    }

    #[test]
    fn markov_chain_hits_stationary_rate() {
        let mut cfg = SynthConfig::default_benchmark();
        cfg.n_videos = 1000;
        let samples = generate_dataset(&cfg, 42).unwrap();
        let mut occluded = 0usize;
        let mut total = 0usize;
        for s in &samples {
            for part in &s.occ_mask {
                occluded += part.iter().filter(|&&m| m).count();
                total += part.len();
            }
        }
        let rate = occluded as f64 / total as f64;
        assert!(
            (rate - 0.3).abs() < 0.02,
            "empirical occlusion rate {rate} too far from 0.3"
        );
    }

    #[test]
    fn unreachable_rate_rejected() {
        let mut cfg = tiny_config();
        cfg.p_occ = 0.9;
        cfg.persistence = 0.1;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = tiny_config();
        let a = generate_dataset(&cfg, 77).unwrap();
        let b = generate_dataset(&cfg, 77).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(&cfg, 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn save_load_roundtrip_bit_exact() {
        let cfg = tiny_config();
        let samples = generate_dataset(&cfg, 3).unwrap();
        let meta = DatasetMeta::from_config(&cfg);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.txt");
        save_dataset(&path, &meta, &samples).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded.meta, meta);
        assert_eq!(loaded.samples, samples);

        // identical bytes when saved twice
        let path2 = dir.path().join("data2.txt");
        save_dataset(&path2, &meta, &loaded.samples).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn empty_file_loads_as_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.txt");
        std::fs::write(&path, "").unwrap();
        let ds = load_dataset(&path).unwrap();
        assert!(ds.samples.is_empty());

        // header-only file as produced by saving zero samples
        let path2 = dir.path().join("header_only.txt");
        let meta = DatasetMeta::from_config(&tiny_config());
        save_dataset(&path2, &meta, &[]).unwrap();
        let ds = load_dataset(&path2).unwrap();
        assert_eq!(ds.meta, meta);
        assert!(ds.samples.is_empty());
    }

    #[test]
    fn truncated_record_names_the_line() {
        let cfg = tiny_config();
        let samples = generate_dataset(&cfg, 3).unwrap();
        let meta = DatasetMeta::from_config(&cfg);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.txt");
        save_dataset(&path, &meta, &samples[..2]).unwrap();

        let content = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<&str> = content.lines().collect();
        let cut = lines[2].len() / 2;
        let truncated = &lines[2][..cut];
        lines[2] = truncated;
        let bad_path = dir.path().join("bad.txt");
        std::fs::write(&bad_path, lines.join("\n")).unwrap();

        match load_dataset(&bad_path) {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("record 1"), "message was: {msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn visible_frames_decode_and_occluded_frames_do_not() {
        let mut cfg = SynthConfig::default_benchmark();
        cfg.n_videos = 300;
        cfg.noise_sigma = 0.3;
        let codebook = Codebook::build(&cfg);
        let samples = generate_dataset(&cfg, 9).unwrap();

        let b = cfg.num_branches();
        let mut correct_visible = vec![0usize; b];
        let mut n_visible = vec![0usize; b];
        let mut correct_occluded = vec![0usize; b];
        let mut n_occluded = vec![0usize; b];

        for s in &samples {
            for part in 0..cfg.parts {
                let first: usize = cfg.attrs_per_part[..part].iter().sum();
                for t in 0..cfg.t_total {
                    // decode one frame in isolation
                    let content: Vec<f64> = (0..cfg.dim_per_part)
                        .map(|dim| s.frames.tensor().at(part * cfg.dim_per_part + dim, t))
                        .collect();
                    let decoded = codebook.decode_part(&cfg, part, &content);
                    for (j, &label) in decoded.iter().enumerate() {
                        let branch = first + j;
                        if s.occ_mask[part][t] {
                            n_occluded[branch] += 1;
                            if label == s.labels[branch] {
                                correct_occluded[branch] += 1;
                            }
                        } else {
                            n_visible[branch] += 1;
                            if label == s.labels[branch] {
                                correct_visible[branch] += 1;
                            }
                        }
                    }
                }
            }
        }

        for branch in 0..b {
            let acc = correct_visible[branch] as f64 / n_visible[branch] as f64;
            assert!(
                acc > 0.95,
                "visible-frame decode accuracy {acc:.3} for branch {branch}"
            );
            let chance = 1.0 / cfg.classes_per_branch[branch] as f64;
            let occ_acc = correct_occluded[branch] as f64 / n_occluded[branch] as f64;
            assert!(
                (occ_acc - chance).abs() < 0.05,
                "occluded decode accuracy {occ_acc:.3} not at chance {chance:.3} for branch {branch}"
            );
        }
    }

    #[test]
    fn mask_rle_roundtrip() {
        let cases: Vec<Vec<bool>> = vec![
            vec![false; 5],
            vec![true; 3],
            vec![false, true, true, false, false, true],
        ];
        for mask in cases {
            let enc = mask_rle(&mask);
            assert_eq!(parse_rle(&enc, mask.len()).unwrap(), mask);
        }
        assert!(parse_rle("v3o2", 6).is_none()); // wrong total
        assert!(parse_rle("x5", 5).is_none()); // bad symbol
    }
}
