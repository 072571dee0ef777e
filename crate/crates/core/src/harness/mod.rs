//! Experiment runner: split protocol, baseline matrix, sweeps and CSV output.
//!
//! A run trains one model per train split and evaluates it on
//! `num_resplits` random calibration/test partitions, giving
//! `num_train_splits * num_resplits` records.

mod synthetic;

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use synthetic::{
    generate_synthetic, write_graph_files, SyntheticSpec, EDGE_FILE, FEATURE_FILE, LABEL_FILE,
};

use crate::conformal::{calibrate, coverage, efficiency, predict_sets};
use crate::error::{config, Error, Result};
use crate::graph::{
    core_membership, kcore_edge_subgraph, load_graph, resplit_calib_test, split_nodes,
    AttributedGraph, Fanouts, NodeSplit, SplitRatios,
};
use crate::nn::Backbone;
use crate::rng::{derive_seed, Stream};
use crate::sparsify::sparsified_edge_fraction;
use crate::train::{predict_probs, train, TrainConfig, TrainLog};

pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRAIN_LOG_DIR: &str = "train_logs";

pub const RECORDS_HEADER: &str =
    "config_hash,train_split,resplit,method,backbone,alpha,gamma,lambda,coverage,efficiency,edge_drop_frac,seconds";
pub const SUMMARY_HEADER: &str = "config_hash,method,backbone,alpha,alpha_train,gamma,lambda,k,p,\
num_records,coverage_mean,coverage_std,efficiency_mean,efficiency_std,edge_drop_frac_mean";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Vanilla,
    Kcore,
    Dropedge,
    Spargcp,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::Kcore => "kcore",
            Method::Dropedge => "dropedge",
            Method::Spargcp => "spargcp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDataset {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
    #[serde(default = "default_true")]
    pub undirected: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Dataset {
    Files(FileDataset),
    Synthetic(SyntheticSpec),
}

impl Default for Dataset {
    fn default() -> Self {
        Dataset::Synthetic(SyntheticSpec::default())
    }
}

impl Dataset {
    pub fn load(&self) -> Result<AttributedGraph> {
        match self {
            Dataset::Files(f) => load_graph(&f.edges, &f.features, &f.labels, f.undirected),
            Dataset::Synthetic(spec) => generate_synthetic(spec),
        }
    }
}

/// Full description of an experiment. Unknown JSON keys are rejected and
/// every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: Dataset,
    pub method: Method,
    pub backbone: Backbone,
    pub alpha: f64,
    pub alpha_train: f64,
    pub gamma: f64,
    pub lambda: f64,
    /// Attach edge scorers under `spargcp`; off reduces it to the backbone
    /// trained with the combined loss.
    pub scorers: bool,
    pub k: usize,
    pub p: f64,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub heads: usize,
    pub fanouts: Fanouts,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub split: SplitRatios,
    pub num_train_splits: usize,
    pub num_resplits: usize,
    pub base_seed: u64,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Fill the `seconds` column with wall-clock time. Off by default so
    /// repeated runs produce identical files.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: Dataset::default(),
            method: Method::Spargcp,
            backbone: Backbone::Gcn,
            alpha: 0.1,
            alpha_train: 0.1,
            gamma: 0.5,
            lambda: 1.0,
            scorers: true,
            k: 2,
            p: 0.5,
            hidden_dim: 16,
            num_layers: 2,
            heads: 2,
            fanouts: Fanouts::Full,
            epochs: 50,
            batch_size: 256,
            learning_rate: 0.01,
            split: SplitRatios::default(),
            num_train_splits: 20,
            num_resplits: 50,
            base_seed: 0,
            output: None,
            threads: None,
            record_timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a JSON config. Relative dataset paths are taken relative to
    /// the config file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let (Dataset::Files(f), Some(base)) = (&mut cfg.dataset, path.parent()) {
            for p in [&mut f.edges, &mut f.features, &mut f.labels] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("alpha", self.alpha), ("alpha_train", self.alpha_train)] {
            if !(a > 0.0 && a < 1.0) {
                return Err(config(format!("{name} {a} outside (0, 1)")));
            }
        }
        for (name, f) in [("gamma", self.gamma), ("p", self.p)] {
            if !(0.0..1.0).contains(&f) {
                return Err(config(format!("{name} {f} outside [0, 1)")));
            }
        }
        if self.num_train_splits == 0 || self.num_resplits == 0 {
            return Err(config("num_train_splits and num_resplits must be positive"));
        }
        if self.threads == Some(0) {
            return Err(config("threads must be positive"));
        }
        self.split.validate()?;
        self.train_config(0).validate()
    }

    /// Parameters after removing those the method ignores; these are what
    /// the records report.
    fn effective_gamma(&self) -> f64 {
        if self.method == Method::Spargcp { self.gamma } else { 0.0 }
    }

    fn effective_lambda(&self) -> f64 {
        if self.method == Method::Spargcp { self.lambda } else { 0.0 }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            backbone: self.backbone,
            hidden_dim: self.hidden_dim,
            num_layers: self.num_layers,
            heads: self.heads,
            fanouts: self.fanouts.clone(),
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            alpha_train: self.alpha_train,
            lambda: self.effective_lambda(),
            gamma: self.effective_gamma(),
            sparsifier: self.method == Method::Spargcp && self.scorers,
            drop_edge: (self.method == Method::Dropedge).then_some(self.p),
            seed,
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical (key-sorted)
    /// JSON of the config, without `output`, `threads` and `record_timing`,
    /// which do not affect results.
    pub fn fingerprint(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            for key in ["output", "threads", "record_timing"] {
                map.remove(key);
            }
        }
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub config_hash: String,
    pub train_split: usize,
    pub resplit: usize,
    pub method: Method,
    pub backbone: Backbone,
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub coverage: f64,
    pub efficiency: f64,
    pub edge_drop_frac: f64,
    pub seconds: f64,
}

impl ResultRecord {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.config_hash,
            self.train_split,
            self.resplit,
            self.method,
            self.backbone.as_str(),
            self.alpha,
            self.gamma,
            self.lambda,
            self.coverage,
            self.efficiency,
            self.edge_drop_frac,
            self.seconds
        )
    }
}

/// Mean and sample standard deviation over the records of one config.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub config_hash: String,
    pub method: Method,
    pub backbone: Backbone,
    pub alpha: f64,
    pub alpha_train: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub k: usize,
    pub p: f64,
    pub num_records: usize,
    pub coverage_mean: f64,
    pub coverage_std: f64,
    pub efficiency_mean: f64,
    pub efficiency_std: f64,
    pub edge_drop_frac_mean: f64,
}

impl Summary {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.config_hash,
            self.method,
            self.backbone.as_str(),
            self.alpha,
            self.alpha_train,
            self.gamma,
            self.lambda,
            self.k,
            self.p,
            self.num_records,
            self.coverage_mean,
            self.coverage_std,
            self.efficiency_mean,
            self.efficiency_std,
            self.edge_drop_frac_mean
        )
    }
}

/// `(mean, sample std)`; the std of fewer than two values is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

pub fn summarize(cfg: &ExperimentConfig, records: &[ResultRecord]) -> Summary {
    let col = |f: fn(&ResultRecord) -> f64| records.iter().map(f).collect::<Vec<_>>();
    let (coverage_mean, coverage_std) = mean_std(&col(|r| r.coverage));
    let (efficiency_mean, efficiency_std) = mean_std(&col(|r| r.efficiency));
    let (edge_drop_frac_mean, _) = mean_std(&col(|r| r.edge_drop_frac));
    Summary {
        config_hash: cfg.fingerprint(),
        method: cfg.method,
        backbone: cfg.backbone,
        alpha: cfg.alpha,
        alpha_train: cfg.alpha_train,
        gamma: cfg.effective_gamma(),
        lambda: cfg.effective_lambda(),
        k: cfg.k,
        p: cfg.p,
        num_records: records.len(),
        coverage_mean,
        coverage_std,
        efficiency_mean,
        efficiency_std,
        edge_drop_frac_mean,
    }
}

pub struct ExperimentResult {
    pub records: Vec<ResultRecord>,
    pub summary: Summary,
    /// One log per train split, in split order.
    pub train_logs: Vec<TrainLog>,
}

/// Loads the configured dataset and runs the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let graph = cfg.dataset.load()?;
    run_on_graph(cfg, &graph)
}

/// Runs the experiment on an already loaded graph, ignoring `cfg.dataset`.
pub fn run_on_graph(cfg: &ExperimentConfig, graph: &AttributedGraph) -> Result<ExperimentResult> {
    cfg.validate()?;
    let hash = cfg.fingerprint();
    let work = || -> Result<Vec<(Vec<ResultRecord>, TrainLog)>> {
        (0..cfg.num_train_splits)
            .into_par_iter()
            .map(|i| run_train_split(cfg, graph, &hash, i))
            .collect()
    };
    let per_split = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| config(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let (records, train_logs): (Vec<Vec<ResultRecord>>, Vec<TrainLog>) = per_split.into_iter().unzip();
    let records: Vec<ResultRecord> = records.into_iter().flatten().collect();
    let summary = summarize(cfg, &records);
    Ok(ExperimentResult {
        records,
        summary,
        train_logs,
    })
}

fn run_train_split(
    cfg: &ExperimentConfig,
    graph: &AttributedGraph,
    hash: &str,
    index: usize,
) -> Result<(Vec<ResultRecord>, TrainLog)> {
    let at = |resplit: Option<usize>| {
        move |e: Error| Error::Run {
            train_split: index,
            resplit,
            source: Box::new(e),
        }
    };
    let started = Instant::now();
    let split = split_nodes(graph, cfg.split, derive_seed(cfg.base_seed, Stream::Split, index as u64))
        .map_err(at(None))?;

    // k-core trains and predicts on the core's edges; peeled nodes keep
    // only their self-edges.
    let (model_graph, train_split, structural_drop) = match cfg.method {
        Method::Kcore => {
            let alive = core_membership(graph, cfg.k);
            let core = kcore_edge_subgraph(graph, cfg.k);
            let in_core: Vec<usize> = split.train.iter().copied().filter(|&u| alive[u]).collect();
            let train_nodes = if in_core.is_empty() { split.train.clone() } else { in_core };
            let dropped = if graph.num_edges() == 0 {
                0.0
            } else {
                1.0 - core.num_edges() as f64 / graph.num_edges() as f64
            };
            let s = NodeSplit {
                train: train_nodes,
                ..split.clone()
            };
            (std::borrow::Cow::Owned(core), s, dropped)
        }
        _ => (std::borrow::Cow::Borrowed(graph), split.clone(), 0.0),
    };

    let tcfg = cfg.train_config(derive_seed(cfg.base_seed, Stream::Init, index as u64));
    let outcome = train(&model_graph, &train_split, &tcfg).map_err(at(None))?;

    let mut pool: Vec<usize> = split.calib.iter().chain(&split.test).copied().collect();
    pool.sort_unstable();
    let (probs, stats) = predict_probs(&outcome.model, &model_graph, &pool, tcfg.gamma).map_err(at(None))?;
    let edge_drop_frac = match cfg.method {
        Method::Vanilla => 0.0,
        Method::Kcore => structural_drop,
        Method::Dropedge => outcome.log.train_edge_drop_fraction,
        Method::Spargcp => sparsified_edge_fraction(&stats),
    };
    let train_seconds = started.elapsed().as_secs_f64();
    let position = |u: usize| pool.binary_search(&u).expect("node in calib/test pool");

    let mut records = Vec::with_capacity(cfg.num_resplits);
    for r in 0..cfg.num_resplits {
        let cell_started = Instant::now();
        let seed = derive_seed(cfg.base_seed, Stream::Resplit, ((index as u64) << 32) | r as u64);
        let cell = (|| -> Result<(f64, f64)> {
            let rs = resplit_calib_test(&split, seed)?;
            let calib_rows: Vec<usize> = rs.calib.iter().map(|&u| position(u)).collect();
            let test_rows: Vec<usize> = rs.test.iter().map(|&u| position(u)).collect();
            let cal = calibrate(&probs.select(&calib_rows)?, &graph.labels_of(&rs.calib)?, cfg.alpha)?;
            let sets = predict_sets(&probs.select(&test_rows)?, cal.threshold);
            Ok((coverage(&sets, &graph.labels_of(&rs.test)?)?, efficiency(&sets)))
        })()
        .map_err(at(Some(r)))?;
        let seconds = if cfg.record_timing {
            train_seconds + cell_started.elapsed().as_secs_f64()
        } else {
            0.0
        };
        records.push(ResultRecord {
            config_hash: hash.to_string(),
            train_split: index,
            resplit: r,
            method: cfg.method,
            backbone: cfg.backbone,
            alpha: cfg.alpha,
            gamma: tcfg.gamma,
            lambda: tcfg.lambda,
            coverage: cell.0,
            efficiency: cell.1,
            edge_drop_frac,
            seconds,
        });
    }
    Ok((records, outcome.log))
}

/// Hyperparameters that can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Gamma,
    Lambda,
    K,
    P,
}

impl SweepParam {
    pub fn applies_to(self, method: Method) -> bool {
        matches!(
            (self, method),
            (SweepParam::Gamma | SweepParam::Lambda, Method::Spargcp)
                | (SweepParam::K, Method::Kcore)
                | (SweepParam::P, Method::Dropedge)
        )
    }

    /// Copy of `cfg` with this parameter set to `value`.
    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut out = cfg.clone();
        match self {
            SweepParam::Gamma => out.gamma = value,
            SweepParam::Lambda => out.lambda = value,
            SweepParam::P => out.p = value,
            SweepParam::K => {
                if !(value >= 0.0 && value.fract() == 0.0) {
                    return Err(config(format!("k must be a non-negative integer, got {value}")));
                }
                out.k = value as usize;
            }
        }
        out.validate()?;
        Ok(out)
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(SweepParam::Gamma),
            "lambda" => Ok(SweepParam::Lambda),
            "k" => Ok(SweepParam::K),
            "p" => Ok(SweepParam::P),
            other => Err(config(format!("unknown sweep parameter `{other}`"))),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Gamma => "gamma",
            SweepParam::Lambda => "lambda",
            SweepParam::K => "k",
            SweepParam::P => "p",
        })
    }
}

/// Parses `"0.1,0.5,1"` into values.
pub fn parse_values(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| config(format!("bad sweep value `{s}`"))))
        .collect()
}

/// One experiment per value, on a graph loaded once.
pub fn sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<Vec<ExperimentResult>> {
    if values.is_empty() {
        return Err(config("sweep needs at least one value"));
    }
    if !param.applies_to(cfg.method) {
        return Err(config(format!("{param} does not apply to method {}", cfg.method)));
    }
    let configs = values
        .iter()
        .map(|&v| param.apply(cfg, v))
        .collect::<Result<Vec<_>>>()?;
    let graph = cfg.dataset.load()?;
    configs.iter().map(|c| run_on_graph(c, &graph)).collect()
}

pub fn write_records_csv<'a, W: Write>(
    mut out: W,
    records: impl IntoIterator<Item = &'a ResultRecord>,
) -> Result<()> {
    writeln!(out, "{RECORDS_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_line())?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary_csv<'a, W: Write>(
    mut out: W,
    summaries: impl IntoIterator<Item = &'a Summary>,
) -> Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for s in summaries {
        writeln!(out, "{}", s.csv_line())?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `records.csv`, `summary.csv` and per-split training logs into
/// `dir`. Sweeps put every value's records and summary in the same files.
pub fn write_results(dir: impl AsRef<Path>, results: &[ExperimentResult]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join(TRAIN_LOG_DIR))?;
    write_records_csv(
        BufWriter::new(File::create(dir.join(RECORDS_FILE))?),
        results.iter().flat_map(|r| &r.records),
    )?;
    write_summary_csv(
        BufWriter::new(File::create(dir.join(SUMMARY_FILE))?),
        results.iter().map(|r| &r.summary),
    )?;
    for result in results {
        for (i, log) in result.train_logs.iter().enumerate() {
            let name = format!("{}_split{i}.csv", result.summary.config_hash);
            log.write_csv(BufWriter::new(File::create(dir.join(TRAIN_LOG_DIR).join(name))?))?;
        }
    }
    Ok(())
}
