//! GCN and GAT layers over message flow graphs, the edge scorer, and the
//! stacked node classifier.

mod gat;
mod gcn;
mod model;
mod params;
mod scorer;

pub use gat::{GatHead, GatLayer, ATTENTION_NEGATIVE_SLOPE, DEFAULT_HEADS};
pub use gcn::GcnLayer;
pub use model::{model_forward, Backbone, GnnModel, Layer, ModelOutput, ModelSpec};
pub use params::{Bound, ParamId, ParamStore};
pub use scorer::EdgeScorer;

use crate::autodiff::Tensor;
use crate::error::Result;

/// Nonlinearity applied after a layer's aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Elu,
}

impl Activation {
    pub fn apply<'t>(self, x: Tensor<'t>) -> Result<Tensor<'t>> {
        match self {
            Activation::Identity => Ok(x),
            Activation::Relu => x.relu(),
            Activation::Elu => x.elu(),
        }
    }
}
