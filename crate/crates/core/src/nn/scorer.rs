use super::params::{Bound, ParamId, ParamStore};
use crate::autodiff::Tensor;
use crate::error::{dimension, Result};
use crate::graph::MessageFlowGraph;
use crate::rng::Rng;

/// Two-layer MLP rating an edge from its endpoint states:
/// `sigmoid(W2 · relu(W1 · [h(u) ‖ h(v)] + b1) + b2)`.
#[derive(Debug, Clone)]
pub struct EdgeScorer {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub in_dim: usize,
    pub hidden_dim: usize,
}

impl EdgeScorer {
    pub fn new(params: &mut ParamStore, prefix: &str, in_dim: usize, hidden_dim: usize, rng: &mut Rng) -> Self {
        Self {
            w1: params.add_glorot(format!("{prefix}.w1"), 2 * in_dim, hidden_dim, rng),
            b1: params.add_zeros(format!("{prefix}.b1"), 1, hidden_dim),
            w2: params.add_glorot(format!("{prefix}.w2"), hidden_dim, 1, rng),
            b2: params.add_zeros(format!("{prefix}.b2"), 1, 1),
            in_dim,
            hidden_dim,
        }
    }

    /// One score in (0, 1) per non-self edge, in edge order. Self-edges are
    /// not scored.
    pub fn score_edges<'t>(
        &self,
        bound: &Bound<'t>,
        mfg: &MessageFlowGraph,
        h_prev: Tensor<'t>,
    ) -> Result<Tensor<'t>> {
        let (rows, cols) = h_prev.shape();
        if rows != mfg.num_left() || cols != self.in_dim {
            return Err(dimension(format!(
                "scorer expects {}x{} states, got {rows}x{cols}",
                mfg.num_left(),
                self.in_dim
            )));
        }
        let scored = mfg.non_self_edges();
        let src: Vec<usize> = scored.iter().map(|&e| mfg.edges()[e].0).collect();
        // right position r is left position r
        let dst: Vec<usize> = scored.iter().map(|&e| mfg.edges()[e].1).collect();
        h_prev
            .row_gather(&src)?
            .concat_cols(h_prev.row_gather(&dst)?)?
            .matmul(bound.get(self.w1))?
            .add_bias(bound.get(self.b1))?
            .relu()?
            .matmul(bound.get(self.w2))?
            .add_bias(bound.get(self.b2))?
            .sigmoid()
    }
}
