//! Message flow graphs: full neighbourhoods, sampled fanouts and DropEdge.

use spargcp::graph::{build_mfgs, drop_edges, Fanouts};
use spargcp::harness::{generate_synthetic, SyntheticSpec};

pub fn run_example() -> spargcp::Result<()> {
    let graph = generate_synthetic(&SyntheticSpec {
        blocks: 2,
        nodes_per_block: 100,
        intra_prob: 0.1,
        inter_prob: 0.01,
        feature_dim: 4,
        ..SyntheticSpec::default()
    })?;
    let seeds = [0, 1, 150];

    let full = build_mfgs(&graph, &seeds, 2, &Fanouts::Full, 0)?;
    let sampled = build_mfgs(&graph, &seeds, 2, &Fanouts::PerLayer(vec![10, 3]), 0)?;
    for (name, stack) in [("full", &full), ("fanout [10, 3]", &sampled)] {
        println!("{name}:");
        for mfg in stack {
            println!(
                "  layer {}: {} left, {} right, {} edges ({} self)",
                mfg.layer_index(),
                mfg.num_left(),
                mfg.num_right(),
                mfg.num_edges(),
                mfg.num_edges() - mfg.num_non_self_edges()
            );
        }
    }
    // Each layer's right nodes are the next layer's left nodes.
    assert_eq!(full[0].right_nodes(), full[1].left_nodes());
    assert_eq!(full[1].right_nodes(), &seeds);

    let dropped = drop_edges(&full[0], 0.5, 3)?;
    println!(
        "DropEdge p=0.5 keeps {} of {} non-self edges",
        dropped.num_non_self_edges(),
        full[0].num_non_self_edges()
    );
    Ok(())
}

fn main() -> spargcp::Result<()> {
    run_example()
}
