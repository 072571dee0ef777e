//! Learned per-layer edge sparsification.
//!
//! Given one score per non-self MFG edge and a drop fraction `gamma`, the
//! `floor(gamma * m)` lowest-scored non-self edges are removed, ordering by
//! (score ascending, edge index ascending). The surviving scores become
//! message weights, so the scorer is trained through the edges it keeps.
//! Self-edges are never scored or dropped.

use crate::autodiff::{argsort_ascending, Matrix, Tensor};
use crate::error::{config, validation, Result};
use crate::graph::{floor_fraction, MessageFlowGraph};

/// Edge counts of one sparsification call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SparsifyStats {
    pub non_self_edges: usize,
    pub dropped: usize,
}

pub struct SparsifyResult<'t> {
    /// Indices into the input MFG's edge list of every kept edge
    /// (self-edges included), in original order.
    pub retained_edge_indices: Vec<usize>,
    /// Smallest retained non-self score; `-inf` when nothing was dropped.
    pub threshold: f64,
    /// Scores of the retained non-self edges, aligned with them.
    pub retained_scores: Tensor<'t>,
    pub stats: SparsifyStats,
    /// Per output edge: `None` for self-edges, else the index of its score
    /// in the input score column.
    score_slots: Vec<Option<usize>>,
    all_scores: Tensor<'t>,
}

impl<'t> SparsifyResult<'t> {
    /// Message weights for the sparsified MFG: 1 on self-edges, the edge
    /// score elsewhere.
    pub fn edge_weights(&self) -> Result<Tensor<'t>> {
        let tape = self.all_scores.tape();
        let padded = tape.constant(Matrix::filled(1, 1, 1.0)).concat_rows(self.all_scores)?;
        let index: Vec<usize> = self
            .score_slots
            .iter()
            .map(|slot| slot.map_or(0, |k| k + 1))
            .collect();
        padded.row_gather(&index)
    }
}

/// Drops the lowest-scored `floor(gamma * m)` non-self edges of `mfg`.
pub fn sparsify_mfg<'t>(
    mfg: &MessageFlowGraph,
    scores: Tensor<'t>,
    gamma: f64,
) -> Result<(SparsifyResult<'t>, MessageFlowGraph)> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(config(format!("sparsification fraction {gamma} outside [0, 1)")));
    }
    let non_self = mfg.non_self_edges();
    let m = non_self.len();
    if scores.shape() != (m, 1) {
        return Err(validation(format!(
            "{:?} scores for {m} non-self edges",
            scores.shape()
        )));
    }
    let values = scores.value();
    let order = argsort_ascending(values.data());
    let num_drop = floor_fraction(gamma, m);
    let mut dropped = vec![false; m];
    for &k in &order[..num_drop] {
        dropped[k] = true;
    }
    let threshold = if num_drop == 0 {
        f64::NEG_INFINITY
    } else {
        values.get(order[num_drop], 0)
    };

    let mut slot_of_edge = vec![None; mfg.num_edges()];
    for (k, &e) in non_self.iter().enumerate() {
        slot_of_edge[e] = Some(k);
    }
    let mut retained_edge_indices = Vec::with_capacity(mfg.num_edges() - num_drop);
    let mut score_slots = Vec::with_capacity(mfg.num_edges() - num_drop);
    let mut retained_slots = Vec::with_capacity(m - num_drop);
    for (e, slot) in slot_of_edge.iter().enumerate() {
        match slot {
            Some(k) if dropped[*k] => continue,
            Some(k) => retained_slots.push(*k),
            None => {}
        }
        retained_edge_indices.push(e);
        score_slots.push(*slot);
    }
    let sparsified = mfg.retain_edges(|e| slot_of_edge[e].is_some_and(|k| !dropped[k]));
    let result = SparsifyResult {
        retained_edge_indices,
        threshold,
        retained_scores: scores.row_gather(&retained_slots)?,
        stats: SparsifyStats {
            non_self_edges: m,
            dropped: num_drop,
        },
        score_slots,
        all_scores: scores,
    };
    Ok((result, sparsified))
}

/// Dropped non-self edges over all non-self edges, pooled across calls.
/// Zero when there were no non-self edges at all.
pub fn sparsified_edge_fraction(results: &[SparsifyStats]) -> f64 {
    let total: usize = results.iter().map(|s| s.non_self_edges).sum();
    let dropped: usize = results.iter().map(|s| s.dropped).sum();
    if total == 0 {
        0.0
    } else {
        dropped as f64 / total as f64
    }
}
