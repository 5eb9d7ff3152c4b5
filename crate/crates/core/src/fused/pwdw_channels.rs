use super::buffer::IntermediateBuffer;
use super::dwpw_rows::prepare;
use super::plan::{chunks, pwdw_channel_tiles, ChannelChunks, TraceItem};
use super::scheme::{FusedOrder, FusedScheme, Tiling};
use super::{FusedRun, FusedStats};
use crate::error::{Error, Result};
use crate::kernels::{dw_core, dw_work, padded_rows, pw_core, pw_work, AccessCounts};
use crate::model::TensorBuf;
use crate::reference::LayerParams;

/// Channel-tiled PW then DW with whole-map PW and DW calls.
pub fn fused_pwdw_channels(input: &TensorBuf, pw: &LayerParams, dw: &LayerParams, scheme: &FusedScheme) -> Result<FusedRun> {
    fused_pwdw_channels_chunked(input, pw, dw, scheme, ChannelChunks::full(&pw.geometry, &dw.geometry))
}

/// Channel-tiled PW then DW. Each tile produces `fd` intermediate channels
/// over the full map, the PW in calls of `rows_in` rows, then the DW consumes
/// exactly those channels in calls of `rows_out` output rows.
pub fn fused_pwdw_channels_chunked(
    input: &TensorBuf,
    pw: &LayerParams,
    dw: &LayerParams,
    scheme: &FusedScheme,
    ch: ChannelChunks,
) -> Result<FusedRun> {
    prepare(input, pw, dw, scheme, FusedOrder::PwDw, Tiling::Channels)?;
    if ch.rows_in == 0 || ch.rows_out == 0 {
        return Err(Error::Scheme("row chunks must be at least 1".into()));
    }
    let (ga, gb) = (&pw.geometry, &dw.geometry);
    let (wa, wb) = (pw.weights()?, dw.weights()?);
    let l = scheme.layouts;
    let mut mid = IntermediateBuffer::new(gb.iy, gb.ix, scheme.fd, l.mid);
    let mut out = TensorBuf::zeros(gb.oy, gb.ox, gb.k, l.output);
    let mut stats = FusedStats { buffer_bytes: mid.bytes(), produced: vec![0; ga.k], ..Default::default() };
    for t in pwdw_channel_tiles(ga, scheme.fd) {
        let c0 = t.start;
        for r in chunks(ga.oy, ch.rows_in) {
            let mut acc = AccessCounts::default();
            let n = r.len();
            pw_core(input, |o| o, wa, &pw.quant, ga, r, t.clone(), &mut mid.tensor, |o| o, c0, &mut acc);
            stats.trace.push(TraceItem::Pw(pw_work(ga, n, t.len(), &acc)));
            stats.access += acc;
        }
        for r in chunks(gb.oy, ch.rows_out) {
            let mut acc = AccessCounts::default();
            let n = r.len();
            dw_core(&mid.tensor, padded_rows(gb), c0, wb, &dw.quant, gb, r, t.clone(), &mut out, |o| o, 0, &mut acc);
            stats.trace.push(TraceItem::Dw(dw_work(gb, n, t.len(), &acc)));
            stats.access += acc;
        }
        for c in t {
            stats.produced[c] += 1;
        }
        stats.tiles += 1;
    }
    Ok(FusedRun { output: out, stats })
}
