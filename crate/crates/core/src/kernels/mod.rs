//! Forward-only reference implementations of the network building blocks
//! used by the segmentation model: CARAFE upsampling, GhostConv, ECA
//! channel attention and their combination, plus weight counting.
//!
//! All operators are bias-free unless a [`ConvWeights`] carries a bias.

pub mod carafe;
pub mod ghost;
pub mod params;
pub mod reference;
pub mod selftest;
pub mod tensor;
pub mod weights;

pub use carafe::{carafe, carafe_predict_kernels, carafe_reassemble, CarafeConfig, CarafeWeights, KernelField, Normalizer};
pub use ghost::{eca, eca_attention, ghost_conv, ghost_eca, GhostWeights};
pub use params::{count_params, OpSpec};
pub use selftest::{render_table, run_selftest, SelfTestRow, ORACLE_TOLERANCE};
pub use tensor::{conv2d, ConvWeights, Tensor};
pub use weights::WeightArray;
