//! Joint mini-batch training of the GNN and its edge scorers.
//!
//! Every batch minimizes `L = L_ce + lambda * L_cp`, where `L_cp` is the
//! `(1 - alpha_train)` order statistic of the batch's APS scores. The
//! parameters with the lowest validation cross-entropy are kept.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::autodiff::{Matrix, Tensor};
use crate::conformal::{aps_ranking, ProbMatrix};
use crate::error::{config, validation, Error, Result};
use crate::graph::{build_mfgs, drop_edges, AttributedGraph, Fanouts, NodeSplit};
use crate::nn::{Backbone, GnnModel, ModelSpec, ParamStore};
use crate::rng::{derive_seed, rng_from_seed, Stream};
use crate::sparsify::{sparsified_edge_fraction, SparsifyStats};

/// Seeds per forward pass during inference.
const INFERENCE_BATCH: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub backbone: Backbone,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub heads: usize,
    pub fanouts: Fanouts,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub alpha_train: f64,
    pub lambda: f64,
    /// Drop fraction for the sparsifier; ignored without scorers.
    pub gamma: f64,
    pub sparsifier: bool,
    /// DropEdge probability applied to training MFGs only.
    pub drop_edge: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            backbone: Backbone::Gcn,
            hidden_dim: 16,
            num_layers: 2,
            heads: 2,
            fanouts: Fanouts::Full,
            epochs: 50,
            batch_size: 256,
            learning_rate: 0.01,
            alpha_train: 0.1,
            lambda: 0.0,
            gamma: 0.0,
            sparsifier: false,
            drop_edge: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.hidden_dim == 0 || self.batch_size == 0 {
            return Err(config("layers, hidden_dim and batch_size must be positive"));
        }
        if !(self.alpha_train > 0.0 && self.alpha_train < 1.0) {
            return Err(config(format!("alpha_train {} outside (0, 1)", self.alpha_train)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(config(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        if !self.lambda.is_finite() {
            return Err(config("lambda must be finite"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(config("learning rate must be positive"));
        }
        if let Some(p) = self.drop_edge {
            if !(0.0..1.0).contains(&p) {
                return Err(config(format!("drop_edge {p} outside [0, 1)")));
            }
        }
        self.fanouts.validate(self.num_layers)
    }

    pub fn model_spec(&self, graph: &AttributedGraph) -> ModelSpec {
        ModelSpec {
            backbone: self.backbone,
            in_dim: graph.feature_dim(),
            hidden_dim: self.hidden_dim,
            num_classes: graph.num_classes(),
            num_layers: self.num_layers,
            heads: self.heads,
            sparsifier: self.sparsifier,
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Adam {
    pub fn new(params: &ParamStore, learning_rate: f64) -> Self {
        let zeros: Vec<Matrix> = params
            .entries()
            .iter()
            .map(|(_, m)| Matrix::zeros(m.rows(), m.cols()))
            .collect();
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &[Matrix]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (((value, g), m), v) in params
            .values_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for i in 0..g.len() {
                let gi = g.data()[i];
                let mi = self.beta1 * m.data()[i] + (1.0 - self.beta1) * gi;
                let vi = self.beta2 * v.data()[i] + (1.0 - self.beta2) * gi * gi;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                value.data_mut()[i] -=
                    self.learning_rate * (mi / c1) / ((vi / c2).sqrt() + self.epsilon);
            }
        }
    }
}

/// Differentiable APS scores of the true labels: softmax probabilities
/// summed over every label ranked at or above the true one. The ranking is
/// read off the forward values and held fixed.
pub fn aps_scores<'t>(logits: Tensor<'t>, labels: &[usize]) -> Result<Tensor<'t>> {
    let (rows, classes) = logits.shape();
    if labels.len() != rows {
        return Err(validation(format!("{} labels for {rows} rows", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(validation(format!("label {bad} out of range for {classes} classes")));
    }
    let probs = logits.softmax_rows()?;
    let mut mask = Matrix::zeros(rows, classes);
    probs.with_value(|p| {
        for (r, &y) in labels.iter().enumerate() {
            for k in aps_ranking(p.row(r)) {
                mask.set(r, k, 1.0);
                if k == y {
                    break;
                }
            }
        }
    });
    probs.mul(logits.tape().constant(mask))?.sum_rows()
}

/// Conformal training loss: the `(1 - alpha_train)` quantile of the
/// batch's true-label APS scores.
pub fn cp_loss<'t>(logits: Tensor<'t>, labels: &[usize], alpha_train: f64) -> Result<Tensor<'t>> {
    if logits.shape().0 == 0 {
        return Err(validation("cp_loss on an empty batch"));
    }
    aps_scores(logits, labels)?.quantile_value(1.0 - alpha_train)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub l_ce: f64,
    pub l_cp: f64,
    pub loss: f64,
    pub valid_ce: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    /// Validation cross-entropy of the initial parameters.
    pub initial_valid_ce: f64,
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were kept; 0 means the initial ones.
    pub best_epoch: usize,
    pub best_valid_ce: f64,
    /// Fraction of non-self training edges removed by DropEdge or the
    /// sparsifier, pooled over all batches.
    pub train_edge_drop_fraction: f64,
}

impl TrainLog {
    /// CSV with header `epoch,L_ce,L_cp,L,valid_ce,seconds`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "epoch,L_ce,L_cp,L,valid_ce,seconds")?;
        for e in &self.epochs {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                e.epoch, e.l_ce, e.l_cp, e.loss, e.valid_ce, e.seconds
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

pub struct TrainOutcome {
    pub model: GnnModel,
    pub log: TrainLog,
}

fn numeric_to_loss_error(epoch: usize, batch: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Numeric(_) => Error::NonFiniteLoss {
            epoch,
            batch,
            l_ce: f64::NAN,
            l_cp: f64::NAN,
            loss: f64::NAN,
        },
        other => other,
    }
}

/// Mean cross-entropy of `nodes` under full-neighbourhood inference.
pub fn evaluate_cross_entropy(
    model: &GnnModel,
    graph: &AttributedGraph,
    nodes: &[usize],
    gamma: f64,
) -> Result<f64> {
    if nodes.is_empty() {
        return Ok(f64::NAN);
    }
    let (probs, _) = predict_probs(model, graph, nodes, gamma)?;
    let labels = graph.labels_of(nodes)?;
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(r, &y)| -probs.row(r)[y].max(f64::MIN_POSITIVE).ln())
        .sum();
    Ok(total / nodes.len() as f64)
}

/// Class probabilities for `nodes` (in order) using every in-neighbour.
pub fn predict_probs(
    model: &GnnModel,
    graph: &AttributedGraph,
    nodes: &[usize],
    gamma: f64,
) -> Result<(ProbMatrix, Vec<SparsifyStats>)> {
    let layers = model.spec().num_layers;
    let mut rows: Vec<f64> = Vec::with_capacity(nodes.len() * graph.num_classes());
    let mut stats = Vec::new();
    for chunk in nodes.chunks(INFERENCE_BATCH) {
        let mfgs = build_mfgs(graph, chunk, layers, &Fanouts::Full, 0)?;
        let (logits, s) = model.predict(&mfgs, graph.features(), gamma)?;
        rows.extend_from_slice(ProbMatrix::from_logits(&logits).matrix().data());
        stats.extend(s);
    }
    let probs = ProbMatrix::new(Matrix::from_vec(nodes.len(), graph.num_classes(), rows)?)?;
    Ok((probs, stats))
}

/// Trains a model on `split.train`, selecting by validation cross-entropy.
pub fn train(graph: &AttributedGraph, split: &NodeSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(validation("empty training set"));
    }
    graph.labels_of(&split.train)?;

    let mut model = GnnModel::new(cfg.model_spec(graph), derive_seed(cfg.seed, Stream::Init, 0))?;
    let mut optimizer = Adam::new(model.params(), cfg.learning_rate);
    let initial_valid_ce = evaluate_cross_entropy(&model, graph, &split.valid, cfg.gamma)?;
    let mut best_params = model.params().clone();
    let mut best_valid_ce = initial_valid_ce;
    let mut best_epoch = 0;
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut drop_stats = Vec::new();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let mut order = split.train.clone();
        order.shuffle(&mut rng_from_seed(derive_seed(cfg.seed, Stream::Batching, epoch as u64)));
        let (mut sum_ce, mut sum_cp, mut sum_loss) = (0.0, 0.0, 0.0);
        let batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        for (b, batch) in batches.iter().enumerate() {
            let stream_index = ((epoch as u64) << 32) | b as u64;
            let mut mfgs = build_mfgs(
                graph,
                batch,
                cfg.num_layers,
                &cfg.fanouts,
                derive_seed(cfg.seed, Stream::Sampling, stream_index),
            )?;
            if let Some(p) = cfg.drop_edge {
                for (i, mfg) in mfgs.iter_mut().enumerate() {
                    let before = mfg.num_non_self_edges();
                    let seed = derive_seed(cfg.seed, Stream::DropEdge, stream_index * 8 + i as u64);
                    *mfg = drop_edges(mfg, p, seed)?;
                    drop_stats.push(SparsifyStats {
                        non_self_edges: before,
                        dropped: before - mfg.num_non_self_edges(),
                    });
                }
            }
            let labels = graph.labels_of(batch)?;
            let tape = crate::autodiff::Tape::new();
            let bound = model.params().bind(&tape);
            let to_loss_err = numeric_to_loss_error(epoch, b);
            let out = model
                .forward(&tape, &bound, &mfgs, graph.features(), cfg.gamma)
                .map_err(&to_loss_err)?;
            drop_stats.extend(out.sparsify.iter().copied());
            let l_ce = out.logits.cross_entropy(&labels).map_err(&to_loss_err)?;
            let l_cp = cp_loss(out.logits, &labels, cfg.alpha_train).map_err(&to_loss_err)?;
            let loss = if cfg.lambda != 0.0 {
                l_ce.add(l_cp.scale(cfg.lambda).map_err(&to_loss_err)?)
                    .map_err(&to_loss_err)?
            } else {
                l_ce
            };
            let (ce_v, cp_v, loss_v) = (l_ce.scalar(), l_cp.scalar(), loss.scalar());
            if !loss_v.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    l_ce: ce_v,
                    l_cp: cp_v,
                    loss: loss_v,
                });
            }
            let grads = loss.backward()?;
            let grad_values: Vec<Matrix> = bound.tensors().iter().map(|&t| grads.wrt(t)).collect();
            optimizer.step(model.params_mut(), &grad_values);
            sum_ce += ce_v;
            sum_cp += cp_v;
            sum_loss += loss_v;
        }
        let n = batches.len() as f64;
        let valid_ce = evaluate_cross_entropy(&model, graph, &split.valid, cfg.gamma)?;
        if valid_ce < best_valid_ce || best_valid_ce.is_nan() {
            best_valid_ce = valid_ce;
            best_epoch = epoch;
            best_params = model.params().clone();
        }
        epochs.push(EpochStats {
            epoch,
            l_ce: sum_ce / n,
            l_cp: sum_cp / n,
            loss: sum_loss / n,
            valid_ce,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    *model.params_mut() = best_params;
    Ok(TrainOutcome {
        model,
        log: TrainLog {
            initial_valid_ce,
            epochs,
            best_epoch,
            best_valid_ce,
            train_edge_drop_fraction: sparsified_edge_fraction(&drop_stats),
        },
    })
}
