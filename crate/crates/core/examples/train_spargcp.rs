//! Train a GCN with edge scorers and the conformal loss, then save it.

use spargcp::graph::{split_nodes, SplitRatios};
use spargcp::harness::{generate_synthetic, SyntheticSpec};
use spargcp::nn::GnnModel;
use spargcp::train::{evaluate_cross_entropy, train, TrainConfig};

pub fn run_example() -> spargcp::Result<()> {
    let graph = generate_synthetic(&SyntheticSpec {
        blocks: 3,
        nodes_per_block: 60,
        intra_prob: 0.08,
        inter_prob: 0.0,
        feature_dim: 6,
        noise_edge_fraction: 0.5,
        ..SyntheticSpec::default()
    })?;
    let split = split_nodes(&graph, SplitRatios::default(), 0)?;
    let cfg = TrainConfig {
        epochs: 15,
        batch_size: 32,
        lambda: 1.0,
        gamma: 0.3,
        sparsifier: true,
        seed: 11,
        ..TrainConfig::default()
    };
    let outcome = train(&graph, &split, &cfg)?;
    let log = &outcome.log;
    log.write_csv(std::io::stdout().lock())?;
    println!(
        "best epoch {} (valid CE {:.4}, initial {:.4}), {:.1}% of training edges sparsified",
        log.best_epoch,
        log.best_valid_ce,
        log.initial_valid_ce,
        100.0 * log.train_edge_drop_fraction
    );

    let path = std::env::temp_dir().join(format!("spargcp-model-{}.bin", std::process::id()));
    outcome.model.save(&path)?;
    let mut restored = GnnModel::new(outcome.model.spec().clone(), 0)?;
    restored.load_weights(&path)?;
    std::fs::remove_file(&path)?;
    let ce = evaluate_cross_entropy(&restored, &graph, &split.valid, cfg.gamma)?;
    assert_eq!(ce, log.best_valid_ce);
    println!("restored model reproduces valid CE {ce:.4}");
    Ok(())
}

fn main() -> spargcp::Result<()> {
    run_example()
}
