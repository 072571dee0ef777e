//! Attributed graphs, node splits, k-core peeling and message flow graphs.

mod io;
mod kcore;
mod mfg;
mod split;

pub use io::{
    load_graph, read_edges, read_features, read_labels, write_edges, write_features_binary,
    write_features_csv, write_labels,
};
pub use kcore::{core_membership, kcore_edge_subgraph, kcore_subgraph, undirected_degree, KCore};
pub use mfg::{build_mfgs, drop_edges, Fanouts, MessageFlowGraph};
pub use split::{floor_fraction, resplit_calib_test, split_nodes, NodeSplit, SplitRatios};

use crate::autodiff::Matrix;
use crate::error::{validation, Result};

/// Compressed adjacency: `targets[offsets[i]..offsets[i + 1]]` are the
/// neighbours of `i`, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Csr {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Csr {
    fn from_sorted_pairs(num_nodes: usize, pairs: impl Iterator<Item = (usize, usize)>) -> Self {
        let mut offsets = vec![0usize; num_nodes + 1];
        let mut targets = Vec::new();
        for (a, b) in pairs {
            offsets[a + 1] += 1;
            targets.push(b);
        }
        for i in 0..num_nodes {
            offsets[i + 1] += offsets[i];
        }
        Self { offsets, targets }
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.targets[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn num_entries(&self) -> usize {
        self.targets.len()
    }
}

/// Directed graph with node features and optional integer labels.
///
/// Edges are stored twice, once grouped by source and once grouped by
/// destination. Both views index the same deduplicated edge set.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    num_nodes: usize,
    by_source: Csr,
    by_destination: Csr,
    features: Matrix,
    labels: Vec<Option<usize>>,
    num_classes: usize,
}

impl AttributedGraph {
    /// Builds a graph, deduplicating `edges` and validating ids, feature
    /// rows and labels.
    pub fn new(
        num_nodes: usize,
        mut edges: Vec<(usize, usize)>,
        features: Matrix,
        labels: Vec<Option<usize>>,
        num_classes: usize,
    ) -> Result<Self> {
        if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u >= num_nodes || v >= num_nodes) {
            return Err(validation(format!(
                "edge ({u}, {v}) references a node outside [0, {num_nodes})"
            )));
        }
        if features.rows() != num_nodes {
            return Err(validation(format!(
                "{} feature rows for {num_nodes} nodes",
                features.rows()
            )));
        }
        if labels.len() != num_nodes {
            return Err(validation(format!(
                "{} labels for {num_nodes} nodes",
                labels.len()
            )));
        }
        if let Some((node, y)) = labels
            .iter()
            .enumerate()
            .find_map(|(i, y)| y.filter(|&y| y >= num_classes).map(|y| (i, y)))
        {
            return Err(validation(format!(
                "node {node} has label {y} but there are {num_classes} classes"
            )));
        }
        edges.sort_unstable();
        edges.dedup();
        let by_source = Csr::from_sorted_pairs(num_nodes, edges.iter().copied());
        let mut reversed: Vec<(usize, usize)> = edges.iter().map(|&(u, v)| (v, u)).collect();
        reversed.sort_unstable();
        let by_destination = Csr::from_sorted_pairs(num_nodes, reversed.into_iter());
        Ok(Self {
            num_nodes,
            by_source,
            by_destination,
            features,
            labels,
            num_classes,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.by_source.num_entries()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> Option<usize> {
        self.labels[node]
    }

    /// Labels for `nodes`; fails if any of them is unlabeled.
    pub fn labels_of(&self, nodes: &[usize]) -> Result<Vec<usize>> {
        nodes
            .iter()
            .map(|&u| {
                self.labels[u].ok_or_else(|| validation(format!("node {u} has no label")))
            })
            .collect()
    }

    pub fn labeled_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes).filter(|&u| self.labels[u].is_some()).collect()
    }

    /// Edges sorted by (source, destination).
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes).flat_map(move |u| self.by_source.neighbors(u).iter().map(move |&v| (u, v)))
    }

    pub fn out_neighbors(&self, node: usize) -> &[usize] {
        self.by_source.neighbors(node)
    }

    pub fn in_neighbors(&self, node: usize) -> &[usize] {
        self.by_destination.neighbors(node)
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.by_source.degree(node)
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.by_destination.degree(node)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.out_neighbors(u).binary_search(&v).is_ok()
    }

    /// Same graph with every edge's reverse added.
    pub fn symmetrized(&self) -> Self {
        let edges: Vec<_> = self.edges().flat_map(|(u, v)| [(u, v), (v, u)]).collect();
        self.with_edges(edges).expect("reversing valid edges keeps them valid")
    }

    /// Same nodes, features and labels with a different edge set.
    pub fn with_edges(&self, edges: Vec<(usize, usize)>) -> Result<Self> {
        Self::new(
            self.num_nodes,
            edges,
            self.features.clone(),
            self.labels.clone(),
            self.num_classes,
        )
    }
}
