use serde::{Deserialize, Serialize};

use crate::fused::{ChannelChunks, FusedOrder, FusedScheme, Tiling};
use crate::model::LayerGeometry;

/// Bytes simultaneously resident in L1 for one tile configuration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResidentSet {
    pub input: u64,
    pub skip: u64,
    pub weights: u64,
    pub buffer: u64,
    pub output: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resource {
    Input,
    Skip,
    Weights,
    Buffer,
    Output,
}

impl ResidentSet {
    pub fn total(&self) -> u64 {
        self.input + self.skip + self.weights + self.buffer + self.output
    }

    /// The largest component; ties resolve in declaration order.
    pub fn largest(&self) -> Resource {
        let parts = [
            (Resource::Input, self.input),
            (Resource::Skip, self.skip),
            (Resource::Weights, self.weights),
            (Resource::Buffer, self.buffer),
            (Resource::Output, self.output),
        ];
        parts.iter().fold(parts[0], |best, &p| if p.1 > best.1 { p } else { best }).0
    }
}

/// Input rows a tile of `rows` output rows reads, bounded by the map.
pub(crate) fn window_rows(rows: usize, s: usize, fy: usize, iy: usize) -> usize {
    ((rows - 1) * s + fy).min(iy)
}

/// Output rows per tile of the row-wise PW-DW scheme.
pub(crate) fn pwdw_rows_out(dw: &LayerGeometry, fd: usize) -> usize {
    ((fd - dw.fy) / dw.s + 1).min(dw.oy)
}

/// Resident set of a fused block at `fd`. Both layers' weights stay in L1;
/// the channel-wise scheme holds only the current channel slice of them.
pub fn fused_resident(scheme: &FusedScheme, a: &LayerGeometry, b: &LayerGeometry, chunks: Option<ChannelChunks>) -> ResidentSet {
    let fd = scheme.fd;
    let w = a.weight_bytes() + b.weight_bytes();
    match (scheme.order, scheme.tiling) {
        (FusedOrder::DwPw, _) => ResidentSet {
            input: (window_rows(fd, a.s, a.fy, a.iy) * a.ix * a.c) as u64,
            weights: w,
            buffer: (a.k * a.ox * fd) as u64,
            output: (fd * b.ox * b.k) as u64,
            ..Default::default()
        },
        (FusedOrder::PwDw, Tiling::Channels) => {
            let ch = chunks.unwrap_or_else(|| ChannelChunks::full(a, b));
            ResidentSet {
                input: (ch.rows_in * a.ix * a.c) as u64,
                weights: (fd * a.c + fd * b.fy * b.fx) as u64,
                buffer: (fd * b.ix * b.iy) as u64,
                output: (ch.rows_out * b.ox * fd) as u64,
                ..Default::default()
            }
        }
        (FusedOrder::PwDw, Tiling::Rows) => ResidentSet {
            input: (fd.min(a.iy) * a.ix * a.c) as u64,
            weights: w,
            buffer: (b.c * b.ix * fd) as u64,
            output: (pwdw_rows_out(b, fd) * b.ox * b.k) as u64,
            ..Default::default()
        },
    }
}
