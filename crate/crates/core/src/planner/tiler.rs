use serde::{Deserialize, Serialize};

use super::resident::{fused_resident, pwdw_rows_out, window_rows, ResidentSet};
use crate::error::{Error, Result};
use crate::fused::{ChannelChunks, FusedOrder, FusedScheme, Tiling};
use crate::model::{LayerGeometry, LayerKind, MemHierarchy};

/// Tile extents of one layer or fused block.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TilingSolution {
    /// Output rows per tile.
    pub tile_rows: usize,
    /// Output channels per tile.
    pub tile_channels: usize,
    /// Input rows held per tile.
    pub input_rows: usize,
    pub row_tiles: usize,
    pub channel_tiles: usize,
    pub fd: Option<usize>,
    /// PW input / DW output row chunks of the channel-wise scheme.
    pub chunks: Option<ChannelChunks>,
    pub resident: ResidentSet,
}

fn single_resident(g: &LayerGeometry, tr: usize, tk: usize) -> ResidentSet {
    let in_rows = window_rows(tr, g.s, g.fy, g.iy);
    let out = (tr * g.ox * tk) as u64;
    match g.kind {
        LayerKind::Dw => ResidentSet {
            input: (in_rows * g.ix * tk) as u64,
            weights: (tk * g.fy * g.fx) as u64,
            output: out,
            ..Default::default()
        },
        LayerKind::Pw | LayerKind::Conv | LayerKind::Fc => ResidentSet {
            input: (in_rows * g.ix * g.c) as u64,
            weights: (tk * g.c * g.fy * g.fx) as u64,
            output: out,
            ..Default::default()
        },
        LayerKind::Add => ResidentSet { input: (tr * g.ix * g.c) as u64, skip: (tr * g.ix * g.c) as u64, output: out, ..Default::default() },
        LayerKind::Pool => ResidentSet { input: (g.iy * g.ix * tk) as u64, output: out, ..Default::default() },
    }
}

/// Tiles a single layer: the largest `rows x channels` output tile whose
/// input, weight and output tiles fit L1 together. Ties prefer more rows.
/// Add layers keep all channels per tile; pooling keeps all rows.
pub fn tile_layer(g: &LayerGeometry, h: &MemHierarchy) -> Result<TilingSolution> {
    g.validate()?;
    let budget = h.l1();
    let row_range: Vec<usize> = match g.kind {
        LayerKind::Pool => vec![g.oy],
        _ => (1..=g.oy).collect(),
    };
    let ch_range: Vec<usize> = match g.kind {
        LayerKind::Add => vec![g.k],
        _ => (1..=g.k).collect(),
    };
    let mut best: Option<(usize, usize)> = None;
    for &tr in &row_range {
        // Resident bytes grow with tk, so the largest fitting tk is found by bisection.
        let fit = |tk: usize| single_resident(g, tr, tk).total() <= budget;
        let (lo, hi) = (ch_range[0], *ch_range.last().expect("nonempty"));
        if !fit(lo) {
            continue;
        }
        let (mut l, mut r) = (lo, hi);
        while l < r {
            let m = (l + r).div_ceil(2);
            if fit(m) {
                l = m;
            } else {
                r = m - 1;
            }
        }
        let better = match best {
            None => true,
            Some((br, bk)) => tr * l > br * bk || (tr * l == br * bk && tr > br),
        };
        if better {
            best = Some((tr, l));
        }
    }
    let (tr, tk) = best.ok_or_else(|| Error::Infeasible(format!("{} layer {:?} has no tile fitting {budget} B of L1", g.kind, g.output_dims())))?;
    Ok(TilingSolution {
        tile_rows: tr,
        tile_channels: tk,
        input_rows: if g.kind == LayerKind::Pool { g.iy } else { window_rows(tr, g.s, g.fy, g.iy) },
        row_tiles: g.oy.div_ceil(tr),
        channel_tiles: g.k.div_ceil(tk),
        fd: None,
        chunks: None,
        resident: single_resident(g, tr, tk),
    })
}

/// Tiles a fused block at the scheme's fd. The channel-wise scheme takes the
/// largest PW input chunk that leaves room for at least one output row, then
/// the largest output chunk.
pub fn tile_fused(scheme: &FusedScheme, a: &LayerGeometry, b: &LayerGeometry, h: &MemHierarchy) -> Result<TilingSolution> {
    scheme.check(a, b)?;
    let fd = scheme.fd;
    let budget = h.l1();
    let over = |r: &ResidentSet| Error::Infeasible(format!("{scheme} needs {} B of L1, budget {budget} B", r.total()));
    let sol = match (scheme.order, scheme.tiling) {
        (FusedOrder::DwPw, _) => {
            let r = fused_resident(scheme, a, b, None);
            TilingSolution {
                tile_rows: fd,
                tile_channels: b.k,
                input_rows: window_rows(fd, a.s, a.fy, a.iy),
                row_tiles: a.oy.div_ceil(fd),
                channel_tiles: 1,
                fd: Some(fd),
                chunks: None,
                resident: r,
            }
        }
        (FusedOrder::PwDw, Tiling::Channels) => {
            let mut found = None;
            'outer: for rows_in in (1..=a.oy).rev() {
                for rows_out in (1..=b.oy).rev() {
                    let ch = ChannelChunks { rows_in, rows_out };
                    let r = fused_resident(scheme, a, b, Some(ch));
                    if r.total() <= budget {
                        found = Some((ch, r));
                        break 'outer;
                    }
                }
            }
            let min = fused_resident(scheme, a, b, Some(ChannelChunks { rows_in: 1, rows_out: 1 }));
            let (ch, r) = found.ok_or_else(|| over(&min))?;
            TilingSolution {
                tile_rows: ch.rows_out,
                tile_channels: fd,
                input_rows: ch.rows_in,
                row_tiles: b.oy.div_ceil(ch.rows_out),
                channel_tiles: a.k.div_ceil(fd),
                fd: Some(fd),
                chunks: Some(ch),
                resident: r,
            }
        }
        (FusedOrder::PwDw, Tiling::Rows) => {
            let r = fused_resident(scheme, a, b, None);
            let out_rows = pwdw_rows_out(b, fd);
            TilingSolution {
                tile_rows: out_rows,
                tile_channels: b.k,
                input_rows: fd.min(a.iy),
                row_tiles: crate::fused::pwdw_rows_plan(b, fd).len(),
                channel_tiles: 1,
                fd: Some(fd),
                chunks: None,
                resident: r,
            }
        }
    };
    if sol.resident.total() > budget {
        return Err(over(&sol.resident));
    }
    Ok(sol)
}
