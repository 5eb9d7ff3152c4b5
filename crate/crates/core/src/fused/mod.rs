//! Two-layer fused execution through an L1-resident int8 intermediate buffer.
//!
//! Three schemes exist: row-tiled DW-then-PW, channel-tiled PW-then-DW and
//! row-tiled PW-then-DW with a buffer shift between tiles. Each kernel
//! returns its output together with the exact sequence of kernel calls it
//! made, which the planner reproduces analytically.

mod buffer;
mod dwpw_rows;
mod plan;
mod pwdw_channels;
mod pwdw_rows;
mod scheme;
mod traffic;

pub use buffer::IntermediateBuffer;
pub use dwpw_rows::fused_dwpw_rows;
pub use plan::{
    dwpw_row_tiles, expected_trace, pwdw_channel_tiles, pwdw_rows_plan, ChannelChunks, RowsTile, ShiftEvent, TraceItem,
};
pub(crate) use plan::{chunks, dw_chunk, pw_chunk};
pub use pwdw_channels::{fused_pwdw_channels, fused_pwdw_channels_chunked};
pub use pwdw_rows::fused_pwdw_rows;
pub use scheme::{buffer_bytes, FusedOrder, FusedScheme, LayoutTriple, Tiling};
pub use traffic::{count_intermediate_traffic, BlockExec};

use crate::error::{Error, Result};
use crate::kernels::AccessCounts;
use crate::model::TensorBuf;
use crate::reference::LayerParams;

/// Observable side information of a fused run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FusedStats {
    /// Bytes of the allocated intermediate buffer.
    pub buffer_bytes: u64,
    pub tiles: usize,
    /// Kernel calls and buffer shifts in execution order.
    pub trace: Vec<TraceItem>,
    pub shifts: Vec<ShiftEvent>,
    /// How many times each intermediate row (row schemes) or channel
    /// (channel scheme) was produced.
    pub produced: Vec<u32>,
    pub access: AccessCounts,
}

#[derive(Clone, Debug)]
pub struct FusedRun {
    pub output: TensorBuf,
    pub stats: FusedStats,
}

/// Runs `a` then `b` with the scheme's kernel.
pub fn run_fused(input: &TensorBuf, a: &LayerParams, b: &LayerParams, scheme: &FusedScheme) -> Result<FusedRun> {
    match (scheme.order, scheme.tiling) {
        (FusedOrder::DwPw, Tiling::Rows) => fused_dwpw_rows(input, a, b, scheme),
        (FusedOrder::PwDw, Tiling::Channels) => fused_pwdw_channels(input, a, b, scheme),
        (FusedOrder::PwDw, Tiling::Rows) => fused_pwdw_rows(input, a, b, scheme),
        (FusedOrder::DwPw, Tiling::Channels) => Err(Error::Scheme("DW-PW fusion tiles rows only".into())),
    }
}
