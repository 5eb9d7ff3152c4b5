use super::buffer::IntermediateBuffer;
use super::dwpw_rows::prepare;
use super::plan::{pwdw_rows_plan, TraceItem};
use super::scheme::{FusedOrder, FusedScheme, Tiling};
use super::{FusedRun, FusedStats};
use crate::error::Result;
use crate::kernels::{dw_core, dw_work, pw_core, pw_work, AccessCounts};
use crate::model::TensorBuf;
use crate::reference::LayerParams;

/// Row-tiled PW then DW over an `fd`-row buffer. After each tile the rows the
/// next DW window still needs are shifted to the buffer head, so no
/// intermediate row is recomputed.
pub fn fused_pwdw_rows(input: &TensorBuf, pw: &LayerParams, dw: &LayerParams, scheme: &FusedScheme) -> Result<FusedRun> {
    prepare(input, pw, dw, scheme, FusedOrder::PwDw, Tiling::Rows)?;
    let (ga, gb) = (&pw.geometry, &dw.geometry);
    let (wa, wb) = (pw.weights()?, dw.weights()?);
    let l = scheme.layouts;
    let (p, iy, s) = (gb.p, gb.iy, gb.s);
    let mut mid = IntermediateBuffer::new(scheme.fd, gb.ix, gb.c, l.mid);
    let mut out = TensorBuf::zeros(gb.oy, gb.ox, gb.k, l.output);
    let mut stats = FusedStats { buffer_bytes: mid.bytes(), produced: vec![0; iy], ..Default::default() };
    for t in pwdw_rows_plan(gb, scheme.fd) {
        debug_assert_eq!(mid.base, t.base);
        let base = t.base;
        for r in t.fill.clone() {
            if r < p || r >= p + iy {
                mid.clear_row(r - base);
            }
        }
        if !t.pw_rows.is_empty() {
            let mut acc = AccessCounts::default();
            let n = t.pw_rows.len();
            pw_core(input, |o| o, wa, &pw.quant, ga, t.pw_rows.clone(), 0..ga.k, &mut mid.tensor, |o| o + p - base, 0, &mut acc);
            stats.trace.push(TraceItem::Pw(pw_work(ga, n, ga.k, &acc)));
            stats.access += acc;
            for y in t.pw_rows.clone() {
                stats.produced[y] += 1;
            }
        }
        let rows = move |o: usize, i: usize| {
            let r = o * s + i;
            (r >= p && r < p + iy).then(|| r - base)
        };
        let mut acc = AccessCounts::default();
        let n = t.out_rows.len();
        dw_core(&mid.tensor, rows, 0, wb, &dw.quant, gb, t.out_rows.clone(), 0..gb.c, &mut out, |o| o, 0, &mut acc);
        stats.trace.push(TraceItem::Dw(dw_work(gb, n, gb.c, &acc)));
        stats.access += acc;
        if let Some(sh) = t.shift {
            let bytes = mid.shift(sh.from, sh.rows);
            stats.trace.push(TraceItem::Shift { bytes });
            stats.shifts.push(sh);
        } else if t.out_rows.end < gb.oy {
            // Nothing to keep: the next window starts past the filled rows.
            mid.base = t.out_rows.end * s;
        }
        stats.tiles += 1;
    }
    Ok(FusedRun { output: out, stats })
}
