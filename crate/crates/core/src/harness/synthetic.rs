//! Stochastic block model graphs with Gaussian class features.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::error::{config, Result};
use crate::graph::{floor_fraction, write_edges, write_features_csv, write_labels, AttributedGraph};
use crate::rng::{derive_seed, rng_from_seed, Stream};

pub const EDGE_FILE: &str = "edges.txt";
pub const FEATURE_FILE: &str = "features.csv";
pub const LABEL_FILE: &str = "labels.txt";

/// Parameters of the generator. Block `c` holds nodes
/// `c * nodes_per_block .. (c + 1) * nodes_per_block` and every node is
/// labelled with its block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub blocks: usize,
    pub nodes_per_block: usize,
    pub intra_prob: f64,
    pub inter_prob: f64,
    pub feature_dim: usize,
    /// Standard deviation of the isotropic feature noise.
    pub feature_noise: f64,
    /// Length of each class mean; means are scaled unit basis vectors.
    pub mean_scale: f64,
    /// Extra uniformly random edges, as a fraction of the planted ones.
    pub noise_edge_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            blocks: 4,
            nodes_per_block: 250,
            intra_prob: 0.02,
            inter_prob: 0.002,
            feature_dim: 8,
            feature_noise: 1.0,
            mean_scale: 1.0,
            noise_edge_fraction: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn num_nodes(&self) -> usize {
        self.blocks * self.nodes_per_block
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.nodes_per_block == 0 {
            return Err(config("synthetic graph needs at least one block and node"));
        }
        for (name, p) in [("intra_prob", self.intra_prob), ("inter_prob", self.inter_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(config(format!("{name} {p} outside [0, 1]")));
            }
        }
        if self.feature_dim < self.blocks {
            return Err(config(format!(
                "feature_dim {} cannot hold {} orthogonal class means",
                self.feature_dim, self.blocks
            )));
        }
        if !(self.feature_noise >= 0.0 && self.feature_noise.is_finite()) {
            return Err(config("feature_noise must be finite and non-negative"));
        }
        if !self.mean_scale.is_finite() {
            return Err(config("mean_scale must be finite"));
        }
        if !(self.noise_edge_fraction >= 0.0 && self.noise_edge_fraction.is_finite()) {
            return Err(config("noise_edge_fraction must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Undirected SBM plus random noise edges. Edge counts in the spec refer
/// to unordered pairs; the returned graph stores both directions.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<AttributedGraph> {
    spec.validate()?;
    let n = spec.num_nodes();
    let block = |u: usize| u / spec.nodes_per_block;

    let mut rng = rng_from_seed(derive_seed(spec.seed, Stream::Synthetic, 0));
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if block(u) == block(v) { spec.intra_prob } else { spec.inter_prob };
            if rng.random_bool(p) {
                pairs.push((u, v));
            }
        }
    }

    let num_noise = floor_fraction(spec.noise_edge_fraction, pairs.len());
    let available = n * n.saturating_sub(1) / 2 - pairs.len();
    if num_noise > available {
        return Err(config(format!(
            "{num_noise} noise edges requested but only {available} free pairs"
        )));
    }
    let mut present: HashSet<(usize, usize)> = pairs.iter().copied().collect();
    let mut rng = rng_from_seed(derive_seed(spec.seed, Stream::Synthetic, 1));
    let mut added = 0;
    while added < num_noise {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        let pair = (u.min(v), u.max(v));
        if u != v && present.insert(pair) {
            pairs.push(pair);
            added += 1;
        }
    }

    let mut rng = rng_from_seed(derive_seed(spec.seed, Stream::Synthetic, 2));
    let mut features = Matrix::zeros(n, spec.feature_dim);
    for u in 0..n {
        let row = features.row_mut(u);
        for x in row.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x = spec.feature_noise * z;
        }
        row[block(u)] += spec.mean_scale;
    }

    let labels = (0..n).map(|u| Some(block(u))).collect();
    let edges = pairs.iter().flat_map(|&(u, v)| [(u, v), (v, u)]).collect();
    AttributedGraph::new(n, edges, features, labels, spec.blocks)
}

/// Writes `edges.txt` (one line per undirected pair), `features.csv` and
/// `labels.txt` into `dir`, readable with `load_graph(.., undirected = true)`.
pub fn write_graph_files(graph: &AttributedGraph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_edges(
        BufWriter::new(File::create(dir.join(EDGE_FILE))?),
        graph.edges().filter(|&(u, v)| u < v),
    )?;
    write_features_csv(BufWriter::new(File::create(dir.join(FEATURE_FILE))?), graph.features())?;
    write_labels(BufWriter::new(File::create(dir.join(LABEL_FILE))?), graph.labels())?;
    Ok(())
}
