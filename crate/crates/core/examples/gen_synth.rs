//! Generate a stochastic block model graph and write it to disk.

use spargcp::graph::load_graph;
use spargcp::harness::{
    generate_synthetic, write_graph_files, SyntheticSpec, EDGE_FILE, FEATURE_FILE, LABEL_FILE,
};

pub fn run_example() -> spargcp::Result<()> {
    let spec: SyntheticSpec = serde_json::from_str(
        r#"{"blocks": 4, "nodes_per_block": 50, "intra_prob": 0.1,
            "inter_prob": 0.0, "feature_dim": 4, "noise_edge_fraction": 0.5, "seed": 9}"#,
    )?;
    let graph = generate_synthetic(&spec)?;
    let cross = graph
        .edges()
        .filter(|&(u, v)| graph.label(u) != graph.label(v))
        .count();
    println!(
        "{} nodes, {} undirected edges, {} across blocks",
        graph.num_nodes(),
        graph.num_edges() / 2,
        cross / 2
    );

    let dir = std::env::temp_dir().join(format!("spargcp-synth-{}", std::process::id()));
    write_graph_files(&graph, &dir)?;
    let back = load_graph(dir.join(EDGE_FILE), dir.join(FEATURE_FILE), dir.join(LABEL_FILE), true)?;
    assert_eq!(back.num_edges(), graph.num_edges());
    println!("wrote {}", dir.display());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn main() -> spargcp::Result<()> {
    run_example()
}
