//! Tile sequences of the fused schemes and their analytic kernel traces.
//!
//! The kernels iterate exactly these plans, so the planner can cost a fused
//! block without running it.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::scheme::{FusedOrder, FusedScheme, Tiling};
use crate::error::Result;
use crate::kernels::{dw_contiguous, dw_taps, pw_contiguous, AccessCounts};
use crate::memsim::WorkChunk;
use crate::model::{LayerGeometry, Layout};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TraceItem {
    Dw(WorkChunk),
    Pw(WorkChunk),
    Shift { bytes: u64 },
}

/// A buffer shift of the row-wise PW-DW scheme: buffer rows
/// `from..from + rows` are moved to the head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftEvent {
    pub from: usize,
    pub rows: usize,
    pub bytes: u64,
}

/// Row chunking of the channel-wise PW-DW scheme: the PW processes `rows_in`
/// input rows per call and the DW writes `rows_out` output rows per call.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelChunks {
    pub rows_in: usize,
    pub rows_out: usize,
}

impl ChannelChunks {
    pub fn full(a: &LayerGeometry, b: &LayerGeometry) -> Self {
        ChannelChunks { rows_in: a.oy, rows_out: b.oy }
    }
}

pub(crate) fn chunks(n: usize, step: usize) -> Vec<Range<usize>> {
    (0..n).step_by(step.max(1)).map(|s| s..(s + step).min(n)).collect()
}

/// Output-row tiles of the DW in a row-wise DW-PW block.
pub fn dwpw_row_tiles(dw: &LayerGeometry, fd: usize) -> Vec<Range<usize>> {
    chunks(dw.oy, fd)
}

/// Channel tiles of a channel-wise PW-DW block.
pub fn pwdw_channel_tiles(pw: &LayerGeometry, fd: usize) -> Vec<Range<usize>> {
    chunks(pw.k, fd)
}

/// One tile of the row-wise PW-DW scheme, in padded DW-input row
/// coordinates (padded row `r` is real row `r - p`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowsTile {
    /// Padded row held in buffer row 0 during this tile.
    pub base: usize,
    /// Padded rows appended to the buffer by this tile.
    pub fill: Range<usize>,
    /// Real intermediate rows the PW computes for this tile.
    pub pw_rows: Range<usize>,
    /// DW output rows computed by this tile.
    pub out_rows: Range<usize>,
    /// Shift applied after the tile, if another tile follows.
    pub shift: Option<ShiftEvent>,
}

/// Tile sequence of a row-wise PW-DW block with an `fd`-row buffer.
///
/// The buffer is filled to `fd` rows, the DW computes every output row whose
/// window is complete, then the rows still needed are moved to the head.
/// Real intermediate rows are produced at most once. Requires `fd >= fy`.
pub fn pwdw_rows_plan(dw: &LayerGeometry, fd: usize) -> Vec<RowsTile> {
    let (s, fy, p) = (dw.s, dw.fy, dw.p);
    let needed = (dw.oy - 1) * s + fy;
    let row_bytes = (dw.ix * dw.c) as u64;
    let mut tiles = Vec::new();
    let (mut base, mut filled, mut next) = (0usize, 0usize, 0usize);
    while next < dw.oy {
        let tile_base = base;
        let start = base + filled;
        let end = (base + fd).min(needed);
        let lo = start.clamp(p, p + dw.iy) - p;
        let hi = end.clamp(p, p + dw.iy) - p;
        let mut o = next;
        while o < dw.oy && o * s + fy <= end {
            o += 1;
        }
        debug_assert!(o > next, "fd {fd} cannot hold one DW window");
        let out_rows = next..o;
        next = o;
        let mut shift = None;
        if next < dw.oy {
            let new_base = next * s;
            let keep = end.saturating_sub(new_base);
            if keep > 0 {
                shift = Some(ShiftEvent { from: new_base - base, rows: keep, bytes: keep as u64 * row_bytes });
            }
            filled = keep;
            base = new_base;
        }
        tiles.push(RowsTile { base: tile_base, fill: start..end, pw_rows: lo..hi, out_rows, shift });
    }
    tiles
}

pub(crate) fn dw_chunk(
    g: &LayerGeometry,
    rows: Range<usize>,
    chans: usize,
    src: (Layout, usize),
    dst: (Layout, usize),
) -> (WorkChunk, AccessCounts) {
    let mut a = AccessCounts::default();
    let n = rows.len();
    a.load(dw_taps(g, rows) * chans as u64, dw_contiguous(src.0, src.1));
    a.store((n * g.ox * chans) as u64, dw_contiguous(dst.0, dst.1));
    let w = WorkChunk {
        units: chans as u64,
        ops: (chans * n * g.ox * g.fx * g.fy) as u64,
        strided_loads: a.strided_loads,
        strided_stores: a.strided_stores,
    };
    (w, a)
}

pub(crate) fn pw_chunk(
    g: &LayerGeometry,
    rows: usize,
    kchans: usize,
    src: (Layout, usize, usize),
    dst: (Layout, usize, usize),
) -> (WorkChunk, AccessCounts) {
    let mut a = AccessCounts::default();
    let px = (rows * g.ox) as u64;
    a.load(px * (kchans * g.c) as u64, pw_contiguous(src.0, src.1, src.2));
    a.store(px * kchans as u64, pw_contiguous(dst.0, dst.1, dst.2));
    let w = WorkChunk {
        units: 2 * rows as u64,
        ops: px * (kchans * g.c) as u64,
        strided_loads: a.strided_loads,
        strided_stores: a.strided_stores,
    };
    (w, a)
}

/// The kernel calls and shifts a fused run performs, without running it.
/// `chunks` only affects the channel-wise scheme.
pub fn expected_trace(scheme: &FusedScheme, a: &LayerGeometry, b: &LayerGeometry, chunks_opt: Option<ChannelChunks>) -> Result<Vec<TraceItem>> {
    scheme.check(a, b)?;
    let l = scheme.layouts;
    let fd = scheme.fd;
    let mut v = Vec::new();
    match (scheme.order, scheme.tiling) {
        (FusedOrder::DwPw, _) => {
            for r in dwpw_row_tiles(a, fd) {
                let n = r.len();
                v.push(TraceItem::Dw(dw_chunk(a, r, a.c, (l.input, a.c), (l.mid, a.k)).0));
                v.push(TraceItem::Pw(pw_chunk(b, n, b.k, (l.mid, fd, a.ox), (l.output, b.oy, b.ox)).0));
            }
        }
        (FusedOrder::PwDw, Tiling::Channels) => {
            let ch = chunks_opt.unwrap_or_else(|| ChannelChunks::full(a, b));
            for t in pwdw_channel_tiles(a, fd) {
                for r in chunks(a.oy, ch.rows_in) {
                    v.push(TraceItem::Pw(pw_chunk(a, r.len(), t.len(), (l.input, a.iy, a.ix), (l.mid, b.iy, b.ix)).0));
                }
                for r in chunks(b.oy, ch.rows_out) {
                    v.push(TraceItem::Dw(dw_chunk(b, r, t.len(), (l.mid, fd), (l.output, b.k)).0));
                }
            }
        }
        (FusedOrder::PwDw, Tiling::Rows) => {
            for t in pwdw_rows_plan(b, fd) {
                if !t.pw_rows.is_empty() {
                    v.push(TraceItem::Pw(pw_chunk(a, t.pw_rows.len(), a.k, (l.input, a.iy, a.ix), (l.mid, fd, b.ix)).0));
                }
                v.push(TraceItem::Dw(dw_chunk(b, t.out_rows.clone(), b.c, (l.mid, b.c), (l.output, b.k)).0));
                if let Some(sh) = t.shift {
                    v.push(TraceItem::Shift { bytes: sh.bytes });
                }
            }
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_plan_reuses_fy_minus_one_rows() {
        let dw = LayerGeometry::dw(8, 12, 2, 3, 1, 1).unwrap();
        let plan = pwdw_rows_plan(&dw, 4);
        assert_eq!(plan[0].fill, 0..4);
        assert_eq!(plan[0].pw_rows, 0..3);
        assert_eq!(plan[0].out_rows, 0..2);
        assert_eq!(plan[0].shift, Some(ShiftEvent { from: 2, rows: 2, bytes: 2 * 8 * 2 }));
        assert_eq!(plan[1].base, 2);
        assert_eq!(plan[1].fill, 4..6);
        assert_eq!(plan[1].pw_rows, 3..5);
        let mut covered = Vec::new();
        for t in &plan {
            covered.extend(t.out_rows.clone());
        }
        assert_eq!(covered, (0..12).collect::<Vec<_>>());
        let mut made = Vec::new();
        for t in &plan {
            made.extend(t.pw_rows.clone());
        }
        assert_eq!(made, (0..12).collect::<Vec<_>>());
        for t in &plan[1..] {
            assert!(t.pw_rows.len() <= 4 - 2);
        }
    }

    #[test]
    fn rows_plan_with_stride_two_skips_nothing_needed() {
        let dw = LayerGeometry::dw(7, 9, 3, 3, 2, 1).unwrap();
        for fd in 3..10 {
            let plan = pwdw_rows_plan(&dw, fd);
            let outs: usize = plan.iter().map(|t| t.out_rows.len()).sum();
            assert_eq!(outs, dw.oy);
            let mut made: Vec<usize> = plan.iter().flat_map(|t| t.pw_rows.clone()).collect();
            let n = made.len();
            made.dedup();
            assert_eq!(made.len(), n);
        }
    }
}
