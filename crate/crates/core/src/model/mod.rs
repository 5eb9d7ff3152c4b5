//! Shared value types: layer geometry, int8 tensors with an explicit layout,
//! requantization parameters, weights and the memory-hierarchy description.

mod geometry;
mod hierarchy;
mod quant;
mod tensor;
mod weights;

pub use geometry::{mac_count, output_dims, weight_bytes, LayerGeometry, LayerKind};
pub use hierarchy::{ComputeModel, Levels, MemHierarchy, TransferCosts};
pub use quant::QuantParams;
pub use tensor::{layout_convert, Layout, TensorBuf};
pub use weights::{PwWeightOrder, WeightsBuf};
