//! Command drivers behind the `gstam` binary: dataset generation, training,
//! evaluation, the ablation grid, and the lambda sweep.
//!
//! Every command is deterministic under a pinned seed; run manifests carry
//! the effective configuration, the seed, and every artifact path, so a run
//! can be reproduced bit-identically from its manifest. Wall-clock times live
//! only in manifests, never in CSV outputs.

use crate::attention::AttentionVariant;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::losses::{synthetic_partition, Regularizer};
use crate::metrics::{evaluate, mean_group_sparsity, EvalReport, Subset};
use crate::model::MultiBranchModel;
use crate::synth::{generate_dataset, load_dataset, save_dataset, Dataset, DatasetMeta, SynthConfig};
use crate::train::{fit, split_train_val, LogRecord, TrainConfig};
use clap::{Args, Parser, Subcommand};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Environment variable consulted when no seed is given on the command line
/// or in the config file.
pub const SEED_ENV: &str = "GSTAM_SEED";

#[derive(Parser, Debug)]
#[command(
    name = "gstam",
    version,
    about = "Group-sparse temporal attention for occlusion-robust attribute recognition"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic occlusion dataset
    Gen(GenArgs),
    /// Train a multi-branch model on a dataset file
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset subset
    Eval(EvalArgs),
    /// Run the {PTAM,STAM} x {none,sparsity,group} ablation grid
    Ablate(AblateArgs),
    /// Sweep the group-sparsity weight lambda
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Default)]
pub struct GenArgs {
    /// Config file (flat key = value)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output dataset path
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override a config entry (repeatable): --set synth.p_occ=0.4
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    /// Training dataset file
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory (checkpoint + log CSV + manifest)
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Attention variant: stam or ptam
    #[arg(long)]
    pub attention: Option<String>,
    /// Regularizer: none, sparsity, or group
    #[arg(long)]
    pub regularizer: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Use the full-scale protocol defaults (batch 64, 200 epochs, decay at 100)
    #[arg(long)]
    pub paper_scale: bool,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(Args, Debug, Default)]
pub struct EvalArgs {
    /// Model checkpoint
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset file
    #[arg(long)]
    pub data: PathBuf,
    /// Subset: all, occluded, or visible
    #[arg(long, default_value = "all")]
    pub subset: String,
    /// Segment length for trajectory inference
    #[arg(long, default_value_t = 6)]
    pub segment_len: usize,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct AblateArgs {
    /// Training dataset file
    #[arg(long)]
    pub data: PathBuf,
    /// Held-out dataset for evaluation; when omitted, a 75/25 split of
    /// --data is used
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base seed; run s uses seed base+s
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seeds per grid cell
    #[arg(long, default_value_t = 3)]
    pub seeds: usize,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(Args, Debug, Default)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 3)]
    pub seeds: usize,
    /// Comma-separated lambda values
    #[arg(long, default_value = "0,0.005,0.02,0.03,1.0")]
    pub lambdas: String,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

/// Parses argv and runs one command, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/version through this path
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(&args),
        Command::Train(args) => cmd_train(&args).map(|_| ()),
        Command::Eval(args) => cmd_eval(&args).map(|_| ()),
        Command::Ablate(args) => cmd_ablate(&args),
        Command::Sweep(args) => cmd_sweep(&args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

// ── shared plumbing ──────────────────────────────────────────────────

fn load_config_with_sets(path: Option<&PathBuf>, sets: &[String]) -> Result<Config> {
    let mut cfg = match path {
        Some(p) => Config::load(p)?,
        None => Config::empty(),
    };
    for s in sets {
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set needs KEY=VALUE, got '{s}'")))?;
        cfg.set(key.trim(), value.trim())?;
    }
    Ok(cfg)
}

/// Seed priority: command-line flag, then config `train.seed`, then the
/// GSTAM_SEED environment variable, then 0.
pub fn resolve_seed(flag: Option<u64>, cfg: &Config) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(v) = cfg.get("train.seed") {
        return v
            .parse()
            .map_err(|_| Error::Config(format!("bad train.seed '{v}'")));
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .parse()
            .map_err(|_| Error::Config(format!("bad {SEED_ENV} '{v}'"))),
        Err(_) => Ok(0),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Reproducibility record written next to every produced artifact set.
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config_lines: Vec<String>,
    pub artifacts: Vec<PathBuf>,
    pub start_unix: u64,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            seed,
            config_lines: Vec::new(),
            artifacts: Vec::new(),
            start_unix: unix_now(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        let _ = writeln!(text, "command = {}", self.command);
        let _ = writeln!(text, "version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(text, "seed = {}", self.seed);
        let _ = writeln!(text, "start_unix = {}", self.start_unix);
        for line in &self.config_lines {
            let _ = writeln!(text, "config.{line}");
        }
        for a in &self.artifacts {
            let _ = writeln!(text, "artifact = {}", a.display());
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn synth_lines(cfg: &SynthConfig) -> Vec<String> {
    let list = |v: &[usize]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    vec![
        format!("synth.parts = {}", cfg.parts),
        format!("synth.attrs_per_part = {}", list(&cfg.attrs_per_part)),
        format!("synth.classes_per_branch = {}", list(&cfg.classes_per_branch)),
        format!("synth.dim_per_part = {}", cfg.dim_per_part),
        format!("synth.t_total = {}", cfg.t_total),
        format!("synth.p_occ = {}", cfg.p_occ),
        format!("synth.persistence = {}", cfg.persistence),
        format!("synth.noise_sigma = {}", cfg.noise_sigma),
        format!("synth.occ_noise = {}", cfg.occ_noise),
        format!("synth.codebook_seed = {}", cfg.codebook_seed),
        format!("synth.n_videos = {}", cfg.n_videos),
    ]
}

fn train_lines(cfg: &TrainConfig) -> Vec<String> {
    vec![
        format!("train.lr0 = {}", cfg.lr0),
        format!("train.lr_decay_factor = {}", cfg.lr_decay_factor),
        format!("train.lr_decay_epoch = {}", cfg.lr_decay_epoch),
        format!("train.weight_decay = {}", cfg.weight_decay),
        format!("train.lambda = {}", cfg.lambda),
        format!("train.batch = {}", cfg.batch),
        format!("train.epochs = {}", cfg.epochs),
        format!("train.segment_len = {}", cfg.segment_len),
        format!("train.regularizer = {}", cfg.regularizer.name()),
        format!("train.attention = {}", cfg.variant.name()),
        format!("train.eval_every = {}", cfg.eval_every),
        format!("train.seed = {}", cfg.seed),
        format!("train.val_frac = {}", cfg.val_frac),
        format!("train.hidden = {}", cfg.hidden.unwrap_or(0)),
        format!("train.k1 = {}", cfg.k1),
        format!("train.k2 = {}", cfg.k2),
        format!(
            "train.trunk = {}",
            if cfg.conv_trunk { "conv" } else { "identity" }
        ),
    ]
}

/// Builds a model matching a dataset's layout.
pub fn model_for_dataset(meta: &DatasetMeta, cfg: &TrainConfig, seed: u64) -> Result<MultiBranchModel> {
    let (specs, _) = synthetic_partition(&meta.attrs_per_part, &meta.classes_per_branch)?;
    MultiBranchModel::init(specs, &cfg.layout(meta.feature_dim()), seed)
}

fn load_nonempty(path: &Path) -> Result<Dataset> {
    let ds = load_dataset(path)?;
    if ds.samples.is_empty() {
        return Err(Error::Evaluation(format!(
            "dataset {} holds no samples",
            path.display()
        )));
    }
    Ok(ds)
}

// ── gen ──────────────────────────────────────────────────────────────

pub fn cmd_gen(args: &GenArgs) -> Result<()> {
    let cfg = load_config_with_sets(args.config.as_ref(), &args.sets)?;
    let synth = cfg.synth_config()?;
    let seed = resolve_seed(args.seed, &cfg)?;
    let samples = generate_dataset(&synth, seed)?;
    let meta = DatasetMeta::from_config(&synth);
    save_dataset(&args.out, &meta, &samples)?;

    let mut manifest = RunManifest::new("gen", seed);
    manifest.config_lines = synth_lines(&synth);
    manifest.artifacts.push(args.out.clone());
    manifest.write(&manifest_path(&args.out))?;
    eprintln!(
        "wrote {} videos ({} occluded) to {}",
        samples.len(),
        samples.iter().filter(|s| s.is_occluded()).count(),
        args.out.display()
    );
    Ok(())
}

fn manifest_path(artifact: &Path) -> PathBuf {
    let mut os = artifact.as_os_str().to_os_string();
    os.push(".manifest");
    PathBuf::from(os)
}

// ── train ────────────────────────────────────────────────────────────

fn train_log_csv(log: &[LogRecord]) -> String {
    let mut out = String::from("epoch,lr,loss_class,loss_reg,val_avg_acc,val_avg_f1\n");
    for r in log {
        let acc = r.val_avg_acc.map(|v| v.to_string()).unwrap_or_default();
        let f1 = r.val_avg_f1.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.epoch, r.lr, r.loss_class, r.loss_reg, acc, f1
        );
    }
    out
}

/// Paths produced by a training run.
pub struct TrainArtifacts {
    pub checkpoint: PathBuf,
    pub log_csv: PathBuf,
    pub manifest: PathBuf,
    pub best_epoch: Option<usize>,
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainArtifacts> {
    let mut cfg = load_config_with_sets(args.config.as_ref(), &args.sets)?;
    if let Some(v) = &args.attention {
        cfg.set("train.attention", v)?;
    }
    if let Some(v) = &args.regularizer {
        cfg.set("train.regularizer", v)?;
    }
    if let Some(v) = args.lambda {
        cfg.set("train.lambda", &v.to_string())?;
    }
    if let Some(v) = args.epochs {
        cfg.set("train.epochs", &v.to_string())?;
    }
    if let Some(v) = args.batch {
        cfg.set("train.batch", &v.to_string())?;
    }
    let seed = resolve_seed(args.seed, &cfg)?;
    cfg.set("train.seed", &seed.to_string())?;
    let train_cfg = cfg.train_config(args.paper_scale)?;

    let dataset = load_nonempty(&args.data)?;
    ensure_dir(&args.out)?;

    let (train_set, val_set) = if train_cfg.val_frac > 0.0 {
        split_train_val(&dataset.samples, train_cfg.val_frac, seed)
    } else {
        (dataset.samples.clone(), Vec::new())
    };
    let model = model_for_dataset(&dataset.meta, &train_cfg, seed)?;
    let outcome = fit(
        model,
        &train_set,
        (!val_set.is_empty()).then_some(val_set.as_slice()),
        &train_cfg,
    )?;

    let checkpoint = args.out.join("checkpoint.gstam");
    outcome.model.save(&checkpoint)?;
    let log_csv = args.out.join("train_log.csv");
    std::fs::write(&log_csv, train_log_csv(&outcome.log)).map_err(|e| Error::io(&log_csv, e))?;

    let manifest_file = args.out.join("manifest.txt");
    let mut manifest = RunManifest::new("train", seed);
    manifest.config_lines = train_lines(&train_cfg);
    manifest
        .config_lines
        .push(format!("data = {}", args.data.display()));
    if let Some(e) = outcome.best_epoch {
        manifest.config_lines.push(format!("best_epoch = {e}"));
    }
    manifest.artifacts.push(checkpoint.clone());
    manifest.artifacts.push(log_csv.clone());
    manifest.write(&manifest_file)?;

    Ok(TrainArtifacts {
        checkpoint,
        log_csv,
        manifest: manifest_file,
        best_epoch: outcome.best_epoch,
    })
}

// ── eval ─────────────────────────────────────────────────────────────

/// One CSV row per evaluated attribute plus an AVG row; attributes flagged by
/// the constant-label guard are omitted from the rows and the averages.
pub fn eval_report_csv(report: &EvalReport) -> String {
    let mut out = String::from("attribute,accuracy,f1,n\n");
    for a in report.attributes.iter().filter(|a| !a.excluded) {
        let _ = writeln!(out, "{},{},{},{}", a.name, a.accuracy, a.f1, report.samples);
    }
    let _ = writeln!(
        out,
        "AVG,{},{},{}",
        report.avg_accuracy, report.avg_f1, report.samples
    );
    out
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    let model = MultiBranchModel::load(&args.checkpoint)?;
    let dataset = load_nonempty(&args.data)?;
    let subset = Subset::parse(&args.subset)?;
    let report = evaluate(&model, &dataset.samples, subset, args.segment_len)?;
    for name in report.excluded_attributes() {
        eprintln!("excluding '{name}': ground truth constant over subset '{}'", subset.name());
    }
    let csv = eval_report_csv(&report);
    match &args.out {
        None => print!("{csv}"),
        Some(path) => {
            if let Some(dir) = path.parent() {
                if !dir.as_os_str().is_empty() {
                    ensure_dir(dir)?;
                }
            }
            std::fs::write(path, &csv).map_err(|e| Error::io(path, e))?;
            let mut manifest = RunManifest::new("eval", 0);
            manifest.config_lines = vec![
                format!("checkpoint = {}", args.checkpoint.display()),
                format!("data = {}", args.data.display()),
                format!("subset = {}", subset.name()),
                format!("segment_len = {}", args.segment_len),
            ];
            for name in report.excluded_attributes() {
                manifest.config_lines.push(format!("excluded_attribute = {name}"));
            }
            manifest.artifacts.push(path.clone());
            manifest.write(&manifest_path(path))?;
        }
    }
    Ok(report)
}

// ── ablate ───────────────────────────────────────────────────────────

struct CellResult {
    variant: AttentionVariant,
    regularizer: Regularizer,
    seed: u64,
    occ_acc: f64,
    occ_f1: f64,
    all_acc: f64,
    all_f1: f64,
}

fn run_cell(
    train_set: &[crate::synth::VideoSample],
    test_set: &[crate::synth::VideoSample],
    meta: &DatasetMeta,
    base_cfg: &TrainConfig,
    variant: AttentionVariant,
    regularizer: Regularizer,
    seed: u64,
) -> Result<CellResult> {
    let mut cfg = base_cfg.clone();
    cfg.variant = variant;
    cfg.regularizer = regularizer;
    cfg.seed = seed;
    let (tr, val) = split_train_val(train_set, cfg.val_frac, seed);
    let model = model_for_dataset(meta, &cfg, seed)?;
    let outcome = fit(
        model,
        &tr,
        (!val.is_empty()).then_some(val.as_slice()),
        &cfg,
    )?;
    let occ = evaluate(&outcome.model, test_set, Subset::Occluded, cfg.segment_len)?;
    let all = evaluate(&outcome.model, test_set, Subset::All, cfg.segment_len)?;
    Ok(CellResult {
        variant,
        regularizer,
        seed,
        occ_acc: occ.avg_accuracy,
        occ_f1: occ.avg_f1,
        all_acc: all.avg_accuracy,
        all_f1: all.avg_f1,
    })
}

fn split_or_load_test(
    data: &Path,
    test: Option<&PathBuf>,
) -> Result<(DatasetMeta, Vec<crate::synth::VideoSample>, Vec<crate::synth::VideoSample>)> {
    let dataset = load_nonempty(data)?;
    match test {
        Some(path) => {
            let test_ds = load_nonempty(path)?;
            if test_ds.meta != dataset.meta {
                return Err(Error::Config(
                    "train and test dataset layouts differ".into(),
                ));
            }
            Ok((dataset.meta, dataset.samples, test_ds.samples))
        }
        None => {
            // deterministic 75/25 carve-out when no held-out file is given
            let (train, test) = split_train_val(&dataset.samples, 0.25, 0);
            Ok((dataset.meta, train, test))
        }
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<()> {
    if args.seeds == 0 {
        return Err(Error::Config("--seeds must be >= 1".into()));
    }
    let cfg = load_config_with_sets(args.config.as_ref(), &args.sets)?;
    let base_seed = resolve_seed(args.seed, &cfg)?;
    let base_cfg = cfg.train_config(false)?;
    let (meta, train_set, test_set) = split_or_load_test(&args.data, args.test.as_ref())?;
    ensure_dir(&args.out)?;

    let cells = [
        (AttentionVariant::Ptam, Regularizer::None),
        (AttentionVariant::Ptam, Regularizer::Sparsity),
        (AttentionVariant::Ptam, Regularizer::Group),
        (AttentionVariant::Stam, Regularizer::None),
        (AttentionVariant::Stam, Regularizer::Sparsity),
        (AttentionVariant::Stam, Regularizer::Group),
    ];

    let mut runs_csv =
        String::from("attention,regularizer,seed,occ_avg_acc,occ_avg_f1,all_avg_acc,all_avg_f1\n");
    let mut results: Vec<CellResult> = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    for s in 0..args.seeds {
        let seed = base_seed + s as u64;
        for &(variant, regularizer) in &cells {
            match run_cell(
                &train_set,
                &test_set,
                &meta,
                &base_cfg,
                variant,
                regularizer,
                seed,
            ) {
                Ok(r) => {
                    let _ = writeln!(
                        runs_csv,
                        "{},{},{},{},{},{},{}",
                        r.variant.name(),
                        r.regularizer.name(),
                        r.seed,
                        r.occ_acc,
                        r.occ_f1,
                        r.all_acc,
                        r.all_f1
                    );
                    eprintln!(
                        "cell {}/{} seed {}: occluded F1 {:.4}",
                        r.variant.name(),
                        r.regularizer.name(),
                        r.seed,
                        r.occ_f1
                    );
                    results.push(r);
                }
                Err(e) => {
                    eprintln!(
                        "cell {}/{} seed {seed} failed: {e}",
                        variant.name(),
                        regularizer.name()
                    );
                    failures.push(format!("{}/{} seed {seed}: {e}", variant.name(), regularizer.name()));
                }
            }
        }
    }

    let mut grid_csv = String::from(
        "attention,regularizer,n_seeds,occ_avg_acc_mean,occ_avg_acc_std,occ_avg_f1_mean,occ_avg_f1_std\n",
    );
    for &(variant, regularizer) in &cells {
        let cell: Vec<&CellResult> = results
            .iter()
            .filter(|r| r.variant == variant && r.regularizer == regularizer)
            .collect();
        if cell.is_empty() {
            continue;
        }
        let accs: Vec<f64> = cell.iter().map(|r| r.occ_acc).collect();
        let f1s: Vec<f64> = cell.iter().map(|r| r.occ_f1).collect();
        let (am, asd) = mean_std(&accs);
        let (fm, fsd) = mean_std(&f1s);
        let _ = writeln!(
            grid_csv,
            "{},{},{},{},{},{},{}",
            variant.name(),
            regularizer.name(),
            cell.len(),
            am,
            asd,
            fm,
            fsd
        );
    }

    let runs_path = args.out.join("ablate_runs.csv");
    let grid_path = args.out.join("ablate_grid.csv");
    std::fs::write(&runs_path, runs_csv).map_err(|e| Error::io(&runs_path, e))?;
    std::fs::write(&grid_path, grid_csv).map_err(|e| Error::io(&grid_path, e))?;

    let mut manifest = RunManifest::new("ablate", base_seed);
    manifest.config_lines = train_lines(&base_cfg);
    manifest.config_lines.push(format!("seeds = {}", args.seeds));
    manifest
        .config_lines
        .push(format!("data = {}", args.data.display()));
    manifest.artifacts.push(runs_path);
    manifest.artifacts.push(grid_path);
    manifest.write(&args.out.join("manifest.txt"))?;

    if !failures.is_empty() {
        return Err(Error::Evaluation(format!(
            "{} of {} grid cells failed: {}",
            failures.len(),
            cells.len() * args.seeds,
            failures.join("; ")
        )));
    }
    Ok(())
}

// ── sweep ────────────────────────────────────────────────────────────

pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    if args.seeds == 0 {
        return Err(Error::Config("--seeds must be >= 1".into()));
    }
    let lambdas: Vec<f64> = args
        .lambdas
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("bad --lambdas '{}'", args.lambdas)))?;
    if lambdas.iter().any(|&l| l < 0.0) {
        return Err(Error::Config("lambda values must be >= 0".into()));
    }
    let cfg = load_config_with_sets(args.config.as_ref(), &args.sets)?;
    let base_seed = resolve_seed(args.seed, &cfg)?;
    let mut base_cfg = cfg.train_config(false)?;
    base_cfg.variant = AttentionVariant::Stam;
    base_cfg.regularizer = Regularizer::Group;
    let (meta, train_set, test_set) = split_or_load_test(&args.data, args.test.as_ref())?;
    ensure_dir(&args.out)?;

    let mut csv = String::from("lambda,seed,held_out_group_sparsity,occ_avg_f1,all_avg_f1\n");
    for s in 0..args.seeds {
        let seed = base_seed + s as u64;
        for &lambda in &lambdas {
            let mut run_cfg = base_cfg.clone();
            run_cfg.lambda = lambda;
            run_cfg.seed = seed;
            let (tr, val) = split_train_val(&train_set, run_cfg.val_frac, seed);
            let model = model_for_dataset(&meta, &run_cfg, seed)?;
            let outcome = fit(
                model,
                &tr,
                (!val.is_empty()).then_some(val.as_slice()),
                &run_cfg,
            )?;
            let sparsity =
                mean_group_sparsity(&outcome.model, &test_set, run_cfg.segment_len)?;
            let occ = evaluate(&outcome.model, &test_set, Subset::Occluded, run_cfg.segment_len)?;
            let all = evaluate(&outcome.model, &test_set, Subset::All, run_cfg.segment_len)?;
            eprintln!(
                "lambda {lambda} seed {seed}: held-out group sparsity {sparsity:.4}, occluded F1 {:.4}",
                occ.avg_f1
            );
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                lambda, seed, sparsity, occ.avg_f1, all.avg_f1
            );
        }
    }

    let csv_path = args.out.join("sweep.csv");
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    let mut manifest = RunManifest::new("sweep", base_seed);
    manifest.config_lines = train_lines(&base_cfg);
    manifest
        .config_lines
        .push(format!("lambdas = {}", args.lambdas));
    manifest.config_lines.push(format!("seeds = {}", args.seeds));
    manifest.artifacts.push(csv_path);
    manifest.write(&args.out.join("manifest.txt"))?;
    Ok(())
}
