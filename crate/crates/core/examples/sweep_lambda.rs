//! Sweep the conformal loss weight and write the CSV outputs.

use spargcp::harness::{
    sweep, write_results, Dataset, ExperimentConfig, Method, SweepParam, SyntheticSpec,
    RECORDS_FILE, SUMMARY_FILE,
};

pub fn run_example() -> spargcp::Result<()> {
    let cfg = ExperimentConfig {
        dataset: Dataset::Synthetic(SyntheticSpec {
            blocks: 3,
            nodes_per_block: 50,
            intra_prob: 0.1,
            inter_prob: 0.0,
            feature_dim: 6,
            noise_edge_fraction: 0.5,
            ..SyntheticSpec::default()
        }),
        method: Method::Spargcp,
        gamma: 0.3,
        epochs: 30,
        batch_size: 16,
        num_train_splits: 1,
        num_resplits: 10,
        ..ExperimentConfig::default()
    };
    let lambdas = [0.0, 1.0, 10.0];
    let results = sweep(&cfg, SweepParam::Lambda, &lambdas)?;
    for (lambda, r) in lambdas.iter().zip(&results) {
        println!(
            "lambda {lambda:>4}: efficiency {:.3} ± {:.3}, coverage {:.3}",
            r.summary.efficiency_mean, r.summary.efficiency_std, r.summary.coverage_mean
        );
    }

    let dir = std::env::temp_dir().join(format!("spargcp-sweep-{}", std::process::id()));
    write_results(&dir, &results)?;
    let summary = std::fs::read_to_string(dir.join(SUMMARY_FILE))?;
    let records = std::fs::read_to_string(dir.join(RECORDS_FILE))?;
    println!("{summary}");
    assert_eq!(records.lines().count(), 1 + lambdas.len() * cfg.num_resplits);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn main() -> spargcp::Result<()> {
    run_example()
}
