//! Dense matrices with reverse-mode differentiation.

mod checkpoint;
mod matrix;
mod tape;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use matrix::Matrix;
pub use tape::{argsort_ascending, quantile_rank, Gradients, Tape, Tensor};

pub(crate) use tape::softmax_rows;
