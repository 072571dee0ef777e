use std::path::Path;

use serde::{Deserialize, Serialize};

use super::gat::GatLayer;
use super::gcn::GcnLayer;
use super::params::{Bound, ParamStore};
use super::scorer::EdgeScorer;
use super::Activation;
use crate::autodiff::{load_checkpoint, save_checkpoint, Matrix, Tape, Tensor};
use crate::error::{config, validation, Result};
use crate::graph::MessageFlowGraph;
use crate::rng::rng_from_seed;
use crate::sparsify::{sparsify_mfg, SparsifyStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backbone {
    Gcn,
    Gat,
}

impl Backbone {
    pub fn as_str(self) -> &'static str {
        match self {
            Backbone::Gcn => "gcn",
            Backbone::Gat => "gat",
        }
    }
}

/// Architecture of a [`GnnModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub backbone: Backbone,
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub num_layers: usize,
    pub heads: usize,
    /// Adds one edge scorer in front of every layer.
    pub sparsifier: bool,
}

#[derive(Debug, Clone)]
pub enum Layer {
    Gcn(GcnLayer),
    Gat(GatLayer),
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        match self {
            Layer::Gcn(l) => l.in_dim,
            Layer::Gat(l) => l.in_dim,
        }
    }

    pub fn forward<'t>(
        &self,
        bound: &Bound<'t>,
        mfg: &MessageFlowGraph,
        h_prev: Tensor<'t>,
        edge_weights: Option<Tensor<'t>>,
    ) -> Result<Tensor<'t>> {
        match self {
            Layer::Gcn(l) => l.forward(bound, mfg, h_prev, edge_weights),
            Layer::Gat(l) => l.forward(bound, mfg, h_prev, edge_weights),
        }
    }
}

pub struct ModelOutput<'t> {
    /// `|seeds| x |Y|` raw class scores.
    pub logits: Tensor<'t>,
    /// One entry per sparsified layer; empty without scorers.
    pub sparsify: Vec<SparsifyStats>,
}

/// Runs the layer stack over `mfgs`, sparsifying each MFG first when
/// scorers are given.
///
/// `features` is the whole-graph feature matrix; the rows of the first
/// MFG's left nodes are gathered from it.
pub fn model_forward<'t>(
    tape: &'t Tape,
    bound: &Bound<'t>,
    layers: &[Layer],
    scorers: Option<&[EdgeScorer]>,
    mfgs: &[MessageFlowGraph],
    features: &Matrix,
    gamma: f64,
) -> Result<ModelOutput<'t>> {
    if mfgs.len() != layers.len() {
        return Err(validation(format!(
            "{} MFGs for {} layers",
            mfgs.len(),
            layers.len()
        )));
    }
    if let Some(s) = scorers {
        if s.len() != layers.len() {
            return Err(config(format!("{} scorers for {} layers", s.len(), layers.len())));
        }
    }
    for pair in mfgs.windows(2) {
        if pair[1].left_nodes() != pair[0].right_nodes() {
            return Err(validation(format!(
                "MFG {} left nodes do not match MFG {} right nodes",
                pair[1].layer_index(),
                pair[0].layer_index()
            )));
        }
    }
    let mut h = tape.constant(features.gather_rows(mfgs[0].left_nodes())?);
    let mut stats = Vec::new();
    for (i, (layer, mfg)) in layers.iter().zip(mfgs).enumerate() {
        h = match scorers {
            Some(scorers) => {
                let scores = scorers[i].score_edges(bound, mfg, h)?;
                let (result, sparse) = sparsify_mfg(mfg, scores, gamma)?;
                stats.push(result.stats);
                layer.forward(bound, &sparse, h, Some(result.edge_weights()?))?
            }
            None => layer.forward(bound, mfg, h, None)?,
        };
    }
    Ok(ModelOutput { logits: h, sparsify: stats })
}

const SCORER_SEED_MASK: u64 = 0x5c0e_5c0e_5c0e_5c0e;

/// GNN node classifier with optional per-layer edge scorers.
#[derive(Debug, Clone)]
pub struct GnnModel {
    spec: ModelSpec,
    params: ParamStore,
    layers: Vec<Layer>,
    scorers: Option<Vec<EdgeScorer>>,
}

impl GnnModel {
    /// Glorot-uniform weights and zero biases drawn from `seed`. Scorer
    /// weights come from a separate stream so the GNN initialisation does
    /// not depend on whether scorers are present.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        if spec.num_layers == 0 {
            return Err(config("model needs at least one layer"));
        }
        if spec.in_dim == 0 || spec.hidden_dim == 0 || spec.num_classes == 0 {
            return Err(config(format!("degenerate model dimensions: {spec:?}")));
        }
        let mut rng = rng_from_seed(seed);
        let mut scorer_rng = rng_from_seed(seed ^ SCORER_SEED_MASK);
        let mut params = ParamStore::new();
        let mut layers = Vec::with_capacity(spec.num_layers);
        let mut scorers = spec.sparsifier.then(Vec::new);
        for i in 0..spec.num_layers {
            let last = i + 1 == spec.num_layers;
            let d_in = if i == 0 { spec.in_dim } else { spec.hidden_dim };
            let d_out = if last { spec.num_classes } else { spec.hidden_dim };
            if let Some(s) = scorers.as_mut() {
                s.push(EdgeScorer::new(&mut params, &format!("scorer{i}"), d_in, spec.hidden_dim, &mut scorer_rng));
            }
            let prefix = format!("layer{i}");
            let layer = match spec.backbone {
                Backbone::Gcn => {
                    let act = if last { Activation::Identity } else { Activation::Relu };
                    Layer::Gcn(GcnLayer::new(&mut params, &prefix, d_in, d_out, act, &mut rng))
                }
                Backbone::Gat => {
                    let act = if last { Activation::Identity } else { Activation::Elu };
                    Layer::Gat(GatLayer::new(&mut params, &prefix, d_in, d_out, spec.heads, act, &mut rng)?)
                }
            };
            layers.push(layer);
        }
        Ok(Self {
            spec,
            params,
            layers,
            scorers,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn scorers(&self) -> Option<&[EdgeScorer]> {
        self.scorers.as_deref()
    }

    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        bound: &Bound<'t>,
        mfgs: &[MessageFlowGraph],
        features: &Matrix,
        gamma: f64,
    ) -> Result<ModelOutput<'t>> {
        model_forward(tape, bound, &self.layers, self.scorers(), mfgs, features, gamma)
    }

    /// Logits on a fresh tape, detached from any gradient computation.
    pub fn predict(
        &self,
        mfgs: &[MessageFlowGraph],
        features: &Matrix,
        gamma: f64,
    ) -> Result<(Matrix, Vec<SparsifyStats>)> {
        let tape = Tape::new();
        let bound = self.params.bind(&tape);
        let out = self.forward(&tape, &bound, mfgs, features, gamma)?;
        Ok((out.logits.value(), out.sparsify))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_checkpoint(path, self.params.entries())
    }

    /// Loads weights saved by [`GnnModel::save`] into a model of the same spec.
    pub fn load_weights(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.params.load_from(load_checkpoint(path)?)
    }
}
