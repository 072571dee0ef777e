//! k-core peeling.
//!
//! Degree here is the number of distinct neighbours ignoring edge direction
//! and self-loops, so a symmetrized graph peels exactly like its undirected
//! counterpart.

use std::collections::VecDeque;

use super::AttributedGraph;

/// Distinct undirected neighbours of every node.
fn undirected_adjacency(graph: &AttributedGraph) -> Vec<Vec<usize>> {
    (0..graph.num_nodes())
        .map(|u| {
            let mut nbrs: Vec<usize> = graph
                .out_neighbors(u)
                .iter()
                .chain(graph.in_neighbors(u))
                .copied()
                .filter(|&v| v != u)
                .collect();
            nbrs.sort_unstable();
            nbrs.dedup();
            nbrs
        })
        .collect()
}

pub fn undirected_degree(graph: &AttributedGraph, node: usize) -> usize {
    let mut nbrs: Vec<usize> = graph
        .out_neighbors(node)
        .iter()
        .chain(graph.in_neighbors(node))
        .copied()
        .filter(|&v| v != node)
        .collect();
    nbrs.sort_unstable();
    nbrs.dedup();
    nbrs.len()
}

/// `true` for every node that survives peeling at `k`.
pub fn core_membership(graph: &AttributedGraph, k: usize) -> Vec<bool> {
    let adj = undirected_adjacency(graph);
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut alive = vec![true; graph.num_nodes()];
    let mut queue: VecDeque<usize> = (0..graph.num_nodes()).filter(|&u| degree[u] < k).collect();
    for &u in &queue {
        alive[u] = false;
    }
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if alive[v] {
                degree[v] -= 1;
                if degree[v] < k {
                    alive[v] = false;
                    queue.push_back(v);
                }
            }
        }
    }
    alive
}

/// A k-core with the mapping from its node ids back to the original graph.
#[derive(Debug, Clone)]
pub struct KCore {
    pub graph: AttributedGraph,
    /// `original_ids[i]` is the id in the input graph of core node `i`.
    pub original_ids: Vec<usize>,
}

/// Induced subgraph on the nodes of the k-core, renumbered densely in
/// ascending original-id order. Features and labels follow their nodes.
pub fn kcore_subgraph(graph: &AttributedGraph, k: usize) -> KCore {
    let alive = core_membership(graph, k);
    let original_ids: Vec<usize> = (0..graph.num_nodes()).filter(|&u| alive[u]).collect();
    let mut new_id = vec![usize::MAX; graph.num_nodes()];
    for (i, &u) in original_ids.iter().enumerate() {
        new_id[u] = i;
    }
    let edges = graph
        .edges()
        .filter(|&(u, v)| alive[u] && alive[v])
        .map(|(u, v)| (new_id[u], new_id[v]))
        .collect();
    let features = graph
        .features()
        .gather_rows(&original_ids)
        .expect("core ids are in range");
    let labels = original_ids.iter().map(|&u| graph.label(u)).collect();
    let sub = AttributedGraph::new(original_ids.len(), edges, features, labels, graph.num_classes())
        .expect("induced subgraph of a valid graph is valid");
    KCore {
        graph: sub,
        original_ids,
    }
}

/// Keeps every node but only the edges inside the k-core. Peeled nodes end
/// up isolated.
pub fn kcore_edge_subgraph(graph: &AttributedGraph, k: usize) -> AttributedGraph {
    let alive = core_membership(graph, k);
    let edges = graph.edges().filter(|&(u, v)| alive[u] && alive[v]).collect();
    graph.with_edges(edges).expect("edge subset of a valid graph is valid")
}
