//! Split conformal prediction with APS scores.

use spargcp::autodiff::Matrix;
use spargcp::conformal::{aps_score, calibrate, coverage, efficiency, predict_sets, ProbMatrix};
use spargcp::rng::rng_from_seed;
use rand::Rng;

/// Random softmax rows with a label drawn from each row.
fn sample(n: usize, classes: usize, seed: u64) -> spargcp::Result<(ProbMatrix, Vec<usize>)> {
    let mut rng = rng_from_seed(seed);
    let logits: Vec<f64> = (0..n * classes).map(|_| 3.0 * rng.random::<f64>()).collect();
    let probs = ProbMatrix::from_logits(&Matrix::from_vec(n, classes, logits)?);
    let labels = (0..n)
        .map(|r| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            probs.row(r).iter().position(|p| {
                acc += p;
                u < acc
            })
            .unwrap_or(classes - 1)
        })
        .collect();
    Ok((probs, labels))
}

pub fn run_example() -> spargcp::Result<()> {
    let row = [0.5, 0.3, 0.2];
    println!("APS scores of {row:?}: {:?}", (0..3).map(|y| aps_score(&row, y)).collect::<Result<Vec<_>, _>>()?);

    let alpha = 0.1;
    let (calib_probs, calib_labels) = sample(500, 5, 1)?;
    let (test_probs, test_labels) = sample(2000, 5, 2)?;
    let cal = calibrate(&calib_probs, &calib_labels, alpha)?;
    let sets = predict_sets(&test_probs, cal.threshold);
    println!("threshold {:.4}", cal.threshold);
    println!("first sets: {:?}", sets.iter().take(5).map(|s| s.labels()).collect::<Vec<_>>());
    let cov = coverage(&sets, &test_labels)?;
    println!("coverage {cov:.3} (target {}), efficiency {:.3}", 1.0 - alpha, efficiency(&sets));
    Ok(())
}

fn main() -> spargcp::Result<()> {
    run_example()
}
