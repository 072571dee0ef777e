use super::params::{Bound, ParamId, ParamStore};
use super::Activation;
use crate::autodiff::{Matrix, Tensor};
use crate::error::{dimension, Result};
use crate::graph::MessageFlowGraph;
use crate::rng::Rng;

/// Graph convolution with symmetric degree normalization.
#[derive(Debug, Clone)]
pub struct GcnLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl GcnLayer {
    pub fn new(
        params: &mut ParamStore,
        prefix: &str,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Self {
        Self {
            weight: params.add_glorot(format!("{prefix}.weight"), in_dim, out_dim, rng),
            bias: params.add_zeros(format!("{prefix}.bias"), 1, out_dim),
            in_dim,
            out_dim,
            activation,
        }
    }

    /// Per-edge coefficient `1 / sqrt((deg_out(u) + 1) * (deg_in(v) + 1))`,
    /// degrees counting non-self edges. The `+ 1` terms account for the
    /// self-loop every node carries.
    pub fn normalization(mfg: &MessageFlowGraph) -> Vec<f64> {
        let in_deg = mfg.in_degrees();
        let src_deg = mfg.source_degrees();
        mfg.edges()
            .iter()
            .map(|&(s, d)| 1.0 / (((src_deg[s] + 1) * (in_deg[d] + 1)) as f64).sqrt())
            .collect()
    }

    pub fn forward<'t>(
        &self,
        bound: &Bound<'t>,
        mfg: &MessageFlowGraph,
        h_prev: Tensor<'t>,
        edge_weights: Option<Tensor<'t>>,
    ) -> Result<Tensor<'t>> {
        check_alignment(mfg, h_prev, edge_weights)?;
        let transformed = h_prev.matmul(bound.get(self.weight))?;
        let mut coef = h_prev.tape().constant(Matrix::column(&Self::normalization(mfg)));
        if let Some(w) = edge_weights {
            coef = coef.mul(w)?;
        }
        let out = transformed
            .row_gather(&mfg.sources())?
            .scale_rows(coef)?
            .segment_sum(&mfg.destinations(), mfg.num_right())?
            .add_bias(bound.get(self.bias))?;
        self.activation.apply(out)
    }
}

pub(crate) fn check_alignment(
    mfg: &MessageFlowGraph,
    h_prev: Tensor<'_>,
    edge_weights: Option<Tensor<'_>>,
) -> Result<()> {
    if h_prev.shape().0 != mfg.num_left() {
        return Err(dimension(format!(
            "{} input rows for {} left nodes",
            h_prev.shape().0,
            mfg.num_left()
        )));
    }
    if let Some(w) = edge_weights {
        if w.shape() != (mfg.num_edges(), 1) {
            return Err(dimension(format!(
                "edge weights {:?} for {} edges",
                w.shape(),
                mfg.num_edges()
            )));
        }
    }
    Ok(())
}
