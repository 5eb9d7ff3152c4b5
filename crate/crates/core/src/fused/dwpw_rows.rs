use super::buffer::IntermediateBuffer;
use super::plan::{dwpw_row_tiles, TraceItem};
use super::scheme::{FusedOrder, FusedScheme, Tiling};
use super::{FusedRun, FusedStats};
use crate::error::{Error, Result};
use crate::kernels::{dw_core, dw_work, padded_rows, pw_core, pw_work, AccessCounts};
use crate::model::TensorBuf;
use crate::reference::{check_input, LayerParams};

pub(crate) fn prepare(input: &TensorBuf, a: &LayerParams, b: &LayerParams, scheme: &FusedScheme, order: FusedOrder, tiling: Tiling) -> Result<()> {
    if scheme.order != order || scheme.tiling != tiling {
        return Err(Error::Scheme(format!("{} kernel called with a {} scheme", match (order, tiling) {
            (FusedOrder::DwPw, _) => "DWPW-Rows",
            (FusedOrder::PwDw, Tiling::Channels) => "PWDW-Channels",
            (FusedOrder::PwDw, Tiling::Rows) => "PWDW-Rows",
        }, scheme.name())));
    }
    scheme.check(&a.geometry, &b.geometry)?;
    if input.layout() != scheme.layouts.input {
        return Err(Error::LayoutMismatch { expected: scheme.layouts.input, actual: input.layout() });
    }
    check_input(input, &a.geometry)?;
    a.weights()?.check(&a.geometry)?;
    b.weights()?.check(&b.geometry)?;
    a.quant.validate(a.geometry.k)?;
    b.quant.validate(b.geometry.k)
}

/// Row-tiled DW then PW. Each tile computes `fd` DW output rows over all
/// channels into the buffer, then the PW turns them into `fd` output rows.
pub fn fused_dwpw_rows(input: &TensorBuf, dw: &LayerParams, pw: &LayerParams, scheme: &FusedScheme) -> Result<FusedRun> {
    prepare(input, dw, pw, scheme, FusedOrder::DwPw, Tiling::Rows)?;
    let (ga, gb) = (&dw.geometry, &pw.geometry);
    let (wa, wb) = (dw.weights()?, pw.weights()?);
    let l = scheme.layouts;
    let mut mid = IntermediateBuffer::new(scheme.fd, ga.ox, ga.k, l.mid);
    let mut out = TensorBuf::zeros(gb.oy, gb.ox, gb.k, l.output);
    let mut stats = FusedStats { buffer_bytes: mid.bytes(), produced: vec![0; ga.oy], ..Default::default() };
    for r in dwpw_row_tiles(ga, scheme.fd) {
        let (o0, n) = (r.start, r.len());
        let mut acc = AccessCounts::default();
        dw_core(input, padded_rows(ga), 0, wa, &dw.quant, ga, r.clone(), 0..ga.c, &mut mid.tensor, |o| o - o0, 0, &mut acc);
        stats.trace.push(TraceItem::Dw(dw_work(ga, n, ga.c, &acc)));
        stats.access += acc;
        let mut acc = AccessCounts::default();
        pw_core(&mid.tensor, |o| o - o0, wb, &pw.quant, gb, r.clone(), 0..gb.k, &mut out, |o| o, 0, &mut acc);
        stats.trace.push(TraceItem::Pw(pw_work(gb, n, gb.k, &acc)));
        stats.access += acc;
        for o in r {
            stats.produced[o] += 1;
        }
        stats.tiles += 1;
    }
    Ok(FusedRun { output: out, stats })
}
