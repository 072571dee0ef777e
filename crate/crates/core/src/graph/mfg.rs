//! Message flow graphs (MFGs).
//!
//! An MFG is the bipartite graph consumed by one message-passing layer:
//! left nodes hold the previous layer's states, right nodes receive the new
//! ones. The right nodes always form a prefix of the left nodes, so right
//! position `r` and left position `r` name the same global node, and every
//! right node carries an explicit self-edge `(r, r)`.

use std::collections::HashMap;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::AttributedGraph;
use crate::error::{config, validation, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageFlowGraph {
    layer_index: usize,
    left_nodes: Vec<usize>,
    right_nodes: Vec<usize>,
    edges: Vec<(usize, usize)>,
    source_degrees: Vec<usize>,
}

impl MessageFlowGraph {
    /// Validates and assembles an MFG. Source degrees default to the
    /// out-degree of each left node over the non-self edges given here.
    pub fn new(
        layer_index: usize,
        left_nodes: Vec<usize>,
        right_nodes: Vec<usize>,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let mut source_degrees = vec![0; left_nodes.len()];
        for &(s, d) in &edges {
            if s != d && s < source_degrees.len() {
                source_degrees[s] += 1;
            }
        }
        let mfg = Self {
            layer_index,
            left_nodes,
            right_nodes,
            edges,
            source_degrees,
        };
        mfg.validate()?;
        Ok(mfg)
    }

    /// Replaces the per-left-node source degrees used for normalization.
    pub fn with_source_degrees(mut self, degrees: Vec<usize>) -> Result<Self> {
        if degrees.len() != self.left_nodes.len() {
            return Err(validation(format!(
                "{} source degrees for {} left nodes",
                degrees.len(),
                self.left_nodes.len()
            )));
        }
        self.source_degrees = degrees;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let (nl, nr) = (self.left_nodes.len(), self.right_nodes.len());
        if nr > nl || self.left_nodes[..nr] != self.right_nodes[..] {
            return Err(validation("right nodes must be a prefix of the left nodes"));
        }
        let mut seen_nodes = self.left_nodes.clone();
        seen_nodes.sort_unstable();
        if seen_nodes.windows(2).any(|w| w[0] == w[1]) {
            return Err(validation("duplicate left node"));
        }
        let mut has_self = vec![false; nr];
        let mut sorted = self.edges.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(validation("duplicate MFG edge"));
        }
        for &(s, d) in &self.edges {
            if s >= nl || d >= nr {
                return Err(validation(format!(
                    "edge ({s}, {d}) out of range for {nl} left / {nr} right nodes"
                )));
            }
            if s == d {
                has_self[d] = true;
            }
        }
        if let Some(r) = has_self.iter().position(|&h| !h) {
            return Err(validation(format!("right node {r} lacks its self-edge")));
        }
        Ok(())
    }

    /// 1-based layer this MFG feeds.
    pub fn layer_index(&self) -> usize {
        self.layer_index
    }

    pub fn left_nodes(&self) -> &[usize] {
        &self.left_nodes
    }

    pub fn right_nodes(&self) -> &[usize] {
        &self.right_nodes
    }

    /// `(left position, right position)` pairs.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_left(&self) -> usize {
        self.left_nodes.len()
    }

    pub fn num_right(&self) -> usize {
        self.right_nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_self_edge(&self, e: usize) -> bool {
        let (s, d) = self.edges[e];
        s == d
    }

    /// Indices of the non-self edges, in edge order.
    pub fn non_self_edges(&self) -> Vec<usize> {
        (0..self.edges.len()).filter(|&e| !self.is_self_edge(e)).collect()
    }

    pub fn num_non_self_edges(&self) -> usize {
        self.edges.iter().filter(|(s, d)| s != d).count()
    }

    pub fn sources(&self) -> Vec<usize> {
        self.edges.iter().map(|&(s, _)| s).collect()
    }

    pub fn destinations(&self) -> Vec<usize> {
        self.edges.iter().map(|&(_, d)| d).collect()
    }

    /// Non-self in-edges per right node under the current edge set.
    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.right_nodes.len()];
        for &(s, d) in &self.edges {
            if s != d {
                deg[d] += 1;
            }
        }
        deg
    }

    /// Non-self out-degree of each left node in the graph the MFG was drawn
    /// from.
    pub fn source_degrees(&self) -> &[usize] {
        &self.source_degrees
    }

    /// Keeps self-edges plus the non-self edges for which `keep` is true,
    /// preserving order.
    pub fn retain_edges(&self, mut keep: impl FnMut(usize) -> bool) -> Self {
        let edges = (0..self.edges.len())
            .filter(|&e| self.is_self_edge(e) || keep(e))
            .map(|e| self.edges[e])
            .collect();
        Self {
            edges,
            ..self.clone()
        }
    }
}

/// Per-layer neighbour budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FanoutsRepr", into = "FanoutsRepr")]
pub enum Fanouts {
    /// Every in-neighbour.
    Full,
    /// Sample at most `n` in-neighbours per node; first entry is layer 1.
    PerLayer(Vec<usize>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FanoutsRepr {
    Keyword(String),
    PerLayer(Vec<usize>),
}

impl TryFrom<FanoutsRepr> for Fanouts {
    type Error = String;

    fn try_from(r: FanoutsRepr) -> Result<Self, String> {
        match r {
            FanoutsRepr::Keyword(k) if k == "full" => Ok(Fanouts::Full),
            FanoutsRepr::Keyword(k) => Err(format!("unknown fanout keyword `{k}`")),
            FanoutsRepr::PerLayer(v) => Ok(Fanouts::PerLayer(v)),
        }
    }
}

impl From<Fanouts> for FanoutsRepr {
    fn from(f: Fanouts) -> Self {
        match f {
            Fanouts::Full => FanoutsRepr::Keyword("full".into()),
            Fanouts::PerLayer(v) => FanoutsRepr::PerLayer(v),
        }
    }
}

impl Fanouts {
    pub fn validate(&self, num_layers: usize) -> Result<()> {
        match self {
            Fanouts::Full => Ok(()),
            Fanouts::PerLayer(v) if v.len() == num_layers => Ok(()),
            Fanouts::PerLayer(v) => Err(config(format!(
                "{} fanouts for {num_layers} layers",
                v.len()
            ))),
        }
    }
}

/// Builds the MFG stack for `seeds`, from the last layer back to the first.
///
/// Returns MFGs ordered layer 1 to `num_layers`; the last one has `seeds` as
/// its right nodes and each MFG's left nodes are the next one's right nodes.
/// In-neighbours are taken whole or sampled uniformly without replacement.
pub fn build_mfgs(
    graph: &AttributedGraph,
    seeds: &[usize],
    num_layers: usize,
    fanouts: &Fanouts,
    rng_seed: u64,
) -> Result<Vec<MessageFlowGraph>> {
    if seeds.is_empty() {
        return Err(validation("no seed nodes"));
    }
    if num_layers == 0 {
        return Err(config("at least one layer is required"));
    }
    fanouts.validate(num_layers)?;
    if let Some(&bad) = seeds.iter().find(|&&s| s >= graph.num_nodes()) {
        return Err(validation(format!(
            "seed {bad} out of range for {} nodes",
            graph.num_nodes()
        )));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(validation("duplicate seed node"));
    }

    let mut rng = rng_from_seed(rng_seed);
    let mut stack = Vec::with_capacity(num_layers);
    let mut right: Vec<usize> = seeds.to_vec();
    for layer in (1..=num_layers).rev() {
        let budget = match fanouts {
            Fanouts::Full => None,
            Fanouts::PerLayer(v) => Some(v[layer - 1]),
        };
        let mut left = right.clone();
        let mut position: HashMap<usize, usize> =
            right.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        let mut edges = Vec::new();
        for (r, &v) in right.iter().enumerate() {
            edges.push((r, r));
            let candidates: Vec<usize> =
                graph.in_neighbors(v).iter().copied().filter(|&u| u != v).collect();
            let chosen: Vec<usize> = match budget {
                Some(k) if k < candidates.len() => {
                    let mut picks = index::sample(&mut rng, candidates.len(), k).into_vec();
                    picks.sort_unstable();
                    picks.into_iter().map(|i| candidates[i]).collect()
                }
                _ => candidates,
            };
            for u in chosen {
                let pos = *position.entry(u).or_insert_with(|| {
                    left.push(u);
                    left.len() - 1
                });
                edges.push((pos, r));
            }
        }
        let degrees = left
            .iter()
            .map(|&u| graph.out_neighbors(u).iter().filter(|&&w| w != u).count())
            .collect();
        let mfg = MessageFlowGraph::new(layer, left.clone(), right, edges)?
            .with_source_degrees(degrees)?;
        stack.push(mfg);
        right = left;
    }
    stack.reverse();
    Ok(stack)
}

/// Removes each non-self edge independently with probability `p`.
pub fn drop_edges(mfg: &MessageFlowGraph, p: f64, rng_seed: u64) -> Result<MessageFlowGraph> {
    if !(0.0..1.0).contains(&p) {
        return Err(config(format!("drop probability {p} outside [0, 1)")));
    }
    if p == 0.0 {
        return Ok(mfg.clone());
    }
    let mut rng = rng_from_seed(rng_seed);
    Ok(mfg.retain_edges(|_| rng.random::<f64>() >= p))
}
