//! Scoring MFG edges with an MLP and dropping the lowest-scored fraction.

use spargcp::autodiff::{Matrix, Tape};
use spargcp::graph::{build_mfgs, Fanouts};
use spargcp::harness::{generate_synthetic, SyntheticSpec};
use spargcp::nn::{EdgeScorer, ParamStore};
use spargcp::rng::rng_from_seed;
use spargcp::sparsify::sparsify_mfg;

pub fn run_example() -> spargcp::Result<()> {
    let graph = generate_synthetic(&SyntheticSpec {
        blocks: 2,
        nodes_per_block: 15,
        intra_prob: 0.4,
        inter_prob: 0.05,
        feature_dim: 3,
        ..SyntheticSpec::default()
    })?;
    let mfg = build_mfgs(&graph, &[0, 20], 1, &Fanouts::Full, 0)?.remove(0);

    let mut params = ParamStore::new();
    let scorer = EdgeScorer::new(&mut params, "scorer", graph.feature_dim(), 8, &mut rng_from_seed(5));
    let tape = Tape::new();
    let bound = params.bind(&tape);
    let h = tape.constant(graph.features().gather_rows(mfg.left_nodes())?);
    let scores = scorer.score_edges(&bound, &mfg, h)?;

    for gamma in [0.0, 0.3, 0.6] {
        let (result, sparse) = sparsify_mfg(&mfg, scores, gamma)?;
        println!(
            "gamma {gamma}: dropped {} of {} scored edges, threshold {:.4}, {} edges left",
            result.stats.dropped,
            result.stats.non_self_edges,
            result.threshold,
            sparse.num_edges()
        );
    }

    // Gradients reach only the scores of edges that survive.
    let tape = Tape::new();
    let leaf = tape.param(scores.value());
    let (result, _) = sparsify_mfg(&mfg, leaf, 0.5)?;
    let g: Matrix = result.retained_scores.sum()?.backward()?.wrt(leaf);
    let touched = g.data().iter().filter(|&&v| v != 0.0).count();
    println!("{touched} of {} scores receive gradient", g.len());
    assert_eq!(touched, result.stats.non_self_edges - result.stats.dropped);
    Ok(())
}

fn main() -> spargcp::Result<()> {
    run_example()
}
