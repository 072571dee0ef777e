use super::gcn::check_alignment;
use super::params::{Bound, ParamId, ParamStore};
use super::Activation;
use crate::autodiff::Tensor;
use crate::error::{config, Result};
use crate::graph::MessageFlowGraph;
use crate::rng::Rng;

pub const DEFAULT_HEADS: usize = 2;
pub const ATTENTION_NEGATIVE_SLOPE: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct GatHead {
    pub weight: ParamId,
    pub attn_src: ParamId,
    pub attn_dst: ParamId,
}

/// Multi-head graph attention; head outputs are averaged.
#[derive(Debug, Clone)]
pub struct GatLayer {
    pub heads: Vec<GatHead>,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
    pub negative_slope: f64,
    pub activation: Activation,
}

impl GatLayer {
    pub fn new(
        params: &mut ParamStore,
        prefix: &str,
        in_dim: usize,
        out_dim: usize,
        num_heads: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        if num_heads == 0 {
            return Err(config("GAT needs at least one head"));
        }
        let heads = (0..num_heads)
            .map(|h| GatHead {
                weight: params.add_glorot(format!("{prefix}.head{h}.weight"), in_dim, out_dim, rng),
                attn_src: params.add_glorot(format!("{prefix}.head{h}.attn_src"), out_dim, 1, rng),
                attn_dst: params.add_glorot(format!("{prefix}.head{h}.attn_dst"), out_dim, 1, rng),
            })
            .collect();
        Ok(Self {
            heads,
            bias: params.add_zeros(format!("{prefix}.bias"), 1, out_dim),
            in_dim,
            out_dim,
            negative_slope: ATTENTION_NEGATIVE_SLOPE,
            activation,
        })
    }

    fn head_transform<'t>(
        &self,
        bound: &Bound<'t>,
        head: &GatHead,
        mfg: &MessageFlowGraph,
        h_prev: Tensor<'t>,
        edge_weights: Option<Tensor<'t>>,
    ) -> Result<(Tensor<'t>, Tensor<'t>)> {
        let z = h_prev.matmul(bound.get(head.weight))?;
        let src_score = z.matmul(bound.get(head.attn_src))?;
        let right: Vec<usize> = (0..mfg.num_right()).collect();
        let dst_score = z.row_gather(&right)?.matmul(bound.get(head.attn_dst))?;
        let mut logits = src_score
            .row_gather(&mfg.sources())?
            .add(dst_score.row_gather(&mfg.destinations())?)?
            .leaky_relu(self.negative_slope)?;
        if let Some(w) = edge_weights {
            // w * exp(e) == exp(e + ln w)
            logits = logits.add(w.ln()?)?;
        }
        let alpha = logits.segment_softmax(&mfg.destinations(), mfg.num_right())?;
        Ok((z, alpha))
    }

    /// Attention coefficients per head, one column entry per MFG edge.
    pub fn attention<'t>(
        &self,
        bound: &Bound<'t>,
        mfg: &MessageFlowGraph,
        h_prev: Tensor<'t>,
        edge_weights: Option<Tensor<'t>>,
    ) -> Result<Vec<Tensor<'t>>> {
        check_alignment(mfg, h_prev, edge_weights)?;
        self.heads
            .iter()
            .map(|head| Ok(self.head_transform(bound, head, mfg, h_prev, edge_weights)?.1))
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
        let sources = mfg.sources();
        let destinations = mfg.destinations();
        let mut total: Option<Tensor<'t>> = None;
        for head in &self.heads {
            let (z, alpha) = self.head_transform(bound, head, mfg, h_prev, edge_weights)?;
            let out = z
                .row_gather(&sources)?
                .scale_rows(alpha)?
                .segment_sum(&destinations, mfg.num_right())?;
            total = Some(match total {
                Some(t) => t.add(out)?,
                None => out,
            });
        }
        let mean = total
            .expect("at least one head")
            .scale(1.0 / self.heads.len() as f64)?
            .add_bias(bound.get(self.bias))?;
        self.activation.apply(mean)
    }
}
