//! k-core peeling and the edge-level k-core used by the baseline.

use spargcp::autodiff::Matrix;
use spargcp::graph::{core_membership, kcore_edge_subgraph, kcore_subgraph, AttributedGraph};

pub fn run_example() -> spargcp::Result<()> {
    // Triangle 0-1-2 with a pendant node 3 and a tail 3-4.
    let pairs = [(0, 1), (1, 2), (2, 0), (0, 3), (3, 4)];
    let n = 5;
    let graph = AttributedGraph::new(
        n,
        pairs.to_vec(),
        Matrix::zeros(n, 1),
        vec![Some(0); n],
        1,
    )?
    .symmetrized();

    for k in 0..=3 {
        let alive = core_membership(&graph, k);
        let kept: Vec<usize> = (0..n).filter(|&u| alive[u]).collect();
        println!("{k}-core nodes: {kept:?}");
    }

    let core = kcore_subgraph(&graph, 2);
    println!(
        "2-core subgraph: {} nodes (original ids {:?}), {} edges",
        core.graph.num_nodes(),
        core.original_ids,
        core.graph.num_edges()
    );
    assert_eq!(core.original_ids, vec![0, 1, 2]);

    // The baseline keeps every node so peeled ones can still be classified.
    let sparse = kcore_edge_subgraph(&graph, 2);
    println!(
        "edge-level 2-core keeps {} of {} edges over all {} nodes",
        sparse.num_edges(),
        graph.num_edges(),
        sparse.num_nodes()
    );
    Ok(())
}

fn main() -> spargcp::Result<()> {
    run_example()
}
