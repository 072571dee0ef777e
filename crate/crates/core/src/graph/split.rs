use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::AttributedGraph;
use crate::error::{config, validation, Result};
use crate::rng::rng_from_seed;

/// Fractions of labeled nodes assigned to train, valid and calib. The
/// remainder goes to test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub calib: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.3,
            valid: 0.1,
            calib: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.valid, self.calib];
        if parts.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(config(format!("split ratios must be positive: {parts:?}")));
        }
        if parts.iter().sum::<f64>() >= 1.0 {
            return Err(config(format!("split ratios sum to >= 1: {parts:?}")));
        }
        Ok(())
    }
}

/// `floor(fraction * n)`, tolerant of products like `0.29 * 100` landing a
/// hair below an integer.
pub fn floor_fraction(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 1e-9).floor() as usize
}

/// Four disjoint node sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSplit {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub calib: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles the labeled nodes with `seed` and cuts them into
/// `floor(ratio * #labeled)` sized sets, the remainder going to test.
pub fn split_nodes(graph: &AttributedGraph, ratios: SplitRatios, seed: u64) -> Result<NodeSplit> {
    ratios.validate()?;
    let mut nodes = graph.labeled_nodes();
    if nodes.is_empty() {
        return Err(validation("graph has no labeled nodes"));
    }
    nodes.shuffle(&mut rng_from_seed(seed));
    let n = nodes.len();
    let n_train = floor_fraction(ratios.train, n);
    let n_valid = floor_fraction(ratios.valid, n);
    let n_calib = floor_fraction(ratios.calib, n);
    let mut rest = nodes.into_iter();
    let mut take = |k: usize| rest.by_ref().take(k).collect::<Vec<_>>();
    let train = take(n_train);
    let valid = take(n_valid);
    let calib = take(n_calib);
    let test = take(usize::MAX);
    Ok(NodeSplit {
        train,
        valid,
        calib,
        test,
    })
}

/// Re-partitions `calib ∪ test` into sets of the same sizes. Train and
/// valid are left untouched.
pub fn resplit_calib_test(split: &NodeSplit, seed: u64) -> Result<NodeSplit> {
    if split.calib.is_empty() || split.test.is_empty() {
        return Err(validation("resplit needs nonempty calib and test sets"));
    }
    let mut pool: Vec<usize> = split.calib.iter().chain(&split.test).copied().collect();
    pool.sort_unstable();
    pool.shuffle(&mut rng_from_seed(seed));
    let test = pool.split_off(split.calib.len());
    Ok(NodeSplit {
        train: split.train.clone(),
        valid: split.valid.clone(),
        calib: pool,
        test,
    })
}
