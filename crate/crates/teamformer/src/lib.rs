//! Forward pass of a hierarchical attention encoder over per-agent spatial
//! feature grids: an individual spatial encoder (attention within one agent's
//! `G×G` grid) alternating with a team relation encoder (attention across
//! agents at one grid), followed by a spatial softmax region head and a
//! sigmoid point head. Weights are seeded random; there is no training.

mod cnn;
mod io;
pub mod layers;
mod model;
mod tensor;

pub use cnn::{CnnExtractor, Conv3};
pub use model::{
    action_heads, flop_estimate, ise_forward, stf_block, tre_forward, ActionOutput, AttentionWeights, BlockWeights,
    FlopEstimate, ModelConfig,
};
pub use tensor::FeatureTensor;

#[derive(Debug, thiserror::Error)]
pub enum TfError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("agent index {index} out of range for {len} agents")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("bad weight file: {0}")]
    BadWeightFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
