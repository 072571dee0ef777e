//! Load a graph from edge, feature and label files, then split its nodes.
//!
//! ```text
//! cargo run --example load_and_split
//! ```

use std::fs;

use spargcp::graph::{load_graph, resplit_calib_test, split_nodes, SplitRatios};

pub fn run_example() -> spargcp::Result<()> {
    let dir = std::env::temp_dir().join(format!("spargcp-load-{}", std::process::id()));
    fs::create_dir_all(&dir)?;

    // A 10-node ring, two features per node, alternating labels.
    let edges: String = (0..10).map(|u| format!("{u}\t{}\n", (u + 1) % 10)).collect();
    let features: String = (0..10).map(|u| format!("{u},{}\n", u % 2)).collect();
    let labels: String = (0..10).map(|u| format!("{u} {}\n", u % 2)).collect();
    fs::write(dir.join("edges.txt"), edges)?;
    fs::write(dir.join("features.csv"), features)?;
    fs::write(dir.join("labels.txt"), format!("# node label\n{labels}"))?;

    let graph = load_graph(
        dir.join("edges.txt"),
        dir.join("features.csv"),
        dir.join("labels.txt"),
        true,
    )?;
    println!(
        "{} nodes, {} directed edges, {} classes, {} features",
        graph.num_nodes(),
        graph.num_edges(),
        graph.num_classes(),
        graph.feature_dim()
    );
    assert_eq!(graph.num_edges(), 20);

    let split = split_nodes(&graph, SplitRatios::default(), 42)?;
    println!(
        "train {:?}\nvalid {:?}\ncalib {:?}\ntest  {:?}",
        split.train, split.valid, split.calib, split.test
    );

    // Calibration and test sets are reshuffled; their sizes stay fixed.
    let again = resplit_calib_test(&split, 7)?;
    println!("resplit calib {:?} test {:?}", again.calib, again.test);
    assert_eq!(again.calib.len(), split.calib.len());

    fs::remove_dir_all(&dir)?;
    Ok(())
}

fn main() -> spargcp::Result<()> {
    run_example()
}
