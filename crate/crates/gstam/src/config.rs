//! Flat key-value configuration files with dotted namespaces
//! (`synth.p_occ = 0.3`, `train.lambda = 0.02`). Command-line flags override
//! file values; unknown keys are rejected by name.

use crate::attention::AttentionVariant;
use crate::error::{Error, Result};
use crate::losses::Regularizer;
use crate::synth::SynthConfig;
use crate::train::TrainConfig;
use std::path::Path;

pub const KNOWN_KEYS: &[&str] = &[
    "synth.parts",
    "synth.attrs_per_part",
    "synth.classes_per_branch",
    "synth.dim_per_part",
    "synth.t_total",
    "synth.p_occ",
    "synth.persistence",
    "synth.noise_sigma",
    "synth.occ_noise",
    "synth.codebook_seed",
    "synth.n_videos",
    "train.lr0",
    "train.lr_decay_factor",
    "train.lr_decay_epoch",
    "train.weight_decay",
    "train.lambda",
    "train.batch",
    "train.epochs",
    "train.segment_len",
    "train.regularizer",
    "train.attention",
    "train.eval_every",
    "train.seed",
    "train.val_frac",
    "train.hidden",
    "train.k1",
    "train.k2",
    "train.trunk",
];

/// Ordered key-value store; later `set` calls replace earlier values.
#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: Vec<(String, String)>,
}

impl Config {
    pub fn empty() -> Self {
        Config::default()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Config::empty();
        for (idx, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::Parse {
                path: path.into(),
                line: idx + 1,
                msg: format!("expected 'key = value', got '{trimmed}'"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config(msg) => Error::Parse {
                    path: path.into(),
                    line: idx + 1,
                    msg,
                },
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown config key '{key}'")));
        }
        if let Some(entry) = self.entries.iter_mut().find(|(k, _)| k == key) {
            entry.1 = value.to_string();
        } else {
            self.entries.push((key.to_string(), value.to_string()));
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| {
                Error::Config(format!("bad value '{v}' for key '{key}'"))
            }),
        }
    }

    fn get_usize_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|p| p.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| Error::Config(format!("bad value '{v}' for key '{key}'"))),
        }
    }

    /// Synthetic-benchmark settings, starting from the default layout.
    pub fn synth_config(&self) -> Result<SynthConfig> {
        let mut cfg = SynthConfig::default_benchmark();
        if let Some(v) = self.get_parsed::<usize>("synth.parts")? {
            cfg.parts = v;
        }
        if let Some(v) = self.get_usize_list("synth.attrs_per_part")? {
            cfg.attrs_per_part = v;
        }
        if let Some(v) = self.get_usize_list("synth.classes_per_branch")? {
            // single value broadcasts over every branch
            cfg.classes_per_branch = if v.len() == 1 {
                vec![v[0]; cfg.attrs_per_part.iter().sum()]
            } else {
                v
            };
        } else if self.get("synth.attrs_per_part").is_some() {
            cfg.classes_per_branch = vec![2; cfg.attrs_per_part.iter().sum()];
        }
        if let Some(v) = self.get_parsed::<usize>("synth.dim_per_part")? {
            cfg.dim_per_part = v;
        }
        if let Some(v) = self.get_parsed::<usize>("synth.t_total")? {
            cfg.t_total = v;
        }
        if let Some(v) = self.get_parsed::<f64>("synth.p_occ")? {
            cfg.p_occ = v;
        }
        if let Some(v) = self.get_parsed::<f64>("synth.persistence")? {
            cfg.persistence = v;
        }
        if let Some(v) = self.get_parsed::<f64>("synth.noise_sigma")? {
            cfg.noise_sigma = v;
        }
        if let Some(v) = self.get_parsed::<f64>("synth.occ_noise")? {
            cfg.occ_noise = v;
        }
        if let Some(v) = self.get_parsed::<u64>("synth.codebook_seed")? {
            cfg.codebook_seed = v;
        }
        if let Some(v) = self.get_parsed::<usize>("synth.n_videos")? {
            cfg.n_videos = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Training settings on top of the desk- or paper-scale defaults.
    pub fn train_config(&self, paper_scale: bool) -> Result<TrainConfig> {
        let mut cfg = if paper_scale {
            TrainConfig::paper_scale()
        } else {
            TrainConfig::desk_scale()
        };
        if let Some(v) = self.get_parsed::<f64>("train.lr0")? {
            cfg.lr0 = v;
        }
        if let Some(v) = self.get_parsed::<f64>("train.lr_decay_factor")? {
            cfg.lr_decay_factor = v;
        }
        if let Some(v) = self.get_parsed::<usize>("train.lr_decay_epoch")? {
            cfg.lr_decay_epoch = v;
        }
        if let Some(v) = self.get_parsed::<f64>("train.weight_decay")? {
            cfg.weight_decay = v;
        }
        if let Some(v) = self.get_parsed::<f64>("train.lambda")? {
            cfg.lambda = v;
        }
        if let Some(v) = self.get_parsed::<usize>("train.batch")? {
            cfg.batch = v;
        }
        if let Some(v) = self.get_parsed::<usize>("train.epochs")? {
            cfg.epochs = v;
        }
        if let Some(v) = self.get_parsed::<usize>("train.segment_len")? {
            cfg.segment_len = v;
        }
        if let Some(v) = self.get("train.regularizer") {
            cfg.regularizer = Regularizer::parse(v)?;
        }
        if let Some(v) = self.get("train.attention") {
            cfg.variant = AttentionVariant::parse(v)?;
        }
        if let Some(v) = self.get_parsed::<usize>("train.eval_every")? {
            cfg.eval_every = v;
        }
        if let Some(v) = self.get_parsed::<u64>("train.seed")? {
            cfg.seed = v;
        }
        if let Some(v) = self.get_parsed::<f64>("train.val_frac")? {
            cfg.val_frac = v;
        }
        if let Some(v) = self.get_parsed::<usize>("train.hidden")? {
            cfg.hidden = if v == 0 { None } else { Some(v) };
        }
        if let Some(v) = self.get_parsed::<usize>("train.k1")? {
            cfg.k1 = v;
        }
        if let Some(v) = self.get_parsed::<usize>("train.k2")? {
            cfg.k2 = v;
        }
        if let Some(v) = self.get("train.trunk") {
            cfg.conv_trunk = match v {
                "identity" => false,
                "conv" => true,
                other => {
                    return Err(Error::Config(format!(
                        "train.trunk must be 'identity' or 'conv', got '{other}'"
                    )))
                }
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Snapshot lines for run manifests.
    pub fn to_lines(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k} = {v}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file_and_applies_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(
            &path,
            "# comment\nsynth.p_occ = 0.4\ntrain.lambda = 0.1\ntrain.attention = ptam\n",
        )
        .unwrap();
        let mut cfg = Config::load(&path).unwrap();
        assert_eq!(cfg.synth_config().unwrap().p_occ, 0.4);
        let t = cfg.train_config(false).unwrap();
        assert_eq!(t.lambda, 0.1);
        assert_eq!(t.variant, AttentionVariant::Ptam);

        cfg.set("train.lambda", "0.02").unwrap();
        assert_eq!(cfg.train_config(false).unwrap().lambda, 0.02);
    }

    #[test]
    fn unknown_key_is_named() {
        let mut cfg = Config::empty();
        match cfg.set("synth.bogus", "1") {
            Err(Error::Config(msg)) => assert!(msg.contains("synth.bogus")),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn bad_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        std::fs::write(&path, "synth.p_occ = 0.3\nnot a key value\n").unwrap();
        match Config::load(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn class_broadcast() {
        let mut cfg = Config::empty();
        cfg.set("synth.attrs_per_part", "2,2,4,2,2").unwrap();
        cfg.set("synth.classes_per_branch", "3").unwrap();
        let s = cfg.synth_config().unwrap();
        assert_eq!(s.classes_per_branch, vec![3; 12]);
    }

    #[test]
    fn scale_presets() {
        let cfg = Config::empty();
        assert_eq!(cfg.train_config(false).unwrap().epochs, 60);
        assert_eq!(cfg.train_config(true).unwrap().epochs, 200);
    }
}
