//! Layout-parameterized single-layer depthwise and pointwise primitives.
//!
//! One body per operator; the four input/output layout combinations differ
//! only in the index strides. Besides the output, every run reports
//! contiguous/strided access counts and its parallel work decomposition.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memsim::WorkChunk;
use crate::model::{LayerGeometry, LayerKind, Layout, QuantParams, TensorBuf, WeightsBuf};
use crate::reference::check_input;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelOp {
    Dw,
    Pw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KernelVariant {
    pub op: KernelOp,
    pub in_layout: Layout,
    pub out_layout: Layout,
}

impl KernelVariant {
    pub fn new(op: KernelOp, in_layout: Layout, out_layout: Layout) -> Self {
        KernelVariant { op, in_layout, out_layout }
    }

    /// The four layout combinations of `op`.
    pub fn all(op: KernelOp) -> [KernelVariant; 4] {
        let mut v = [KernelVariant::new(op, Layout::Chw, Layout::Chw); 4];
        for (n, (i, o)) in [(Layout::Chw, Layout::Chw), (Layout::Chw, Layout::Hwc), (Layout::Hwc, Layout::Chw), (Layout::Hwc, Layout::Hwc)]
            .into_iter()
            .enumerate()
        {
            v[n] = KernelVariant::new(op, i, o);
        }
        v
    }
}

impl fmt::Display for KernelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.op {
            KernelOp::Dw => "DW",
            KernelOp::Pw => "PW",
        };
        write!(f, "{op} {}/{}", self.in_layout, self.out_layout)
    }
}

/// Activation-tensor accesses split by whether the innermost loop walks
/// memory with unit stride. Weight reads are not counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessCounts {
    pub contiguous_loads: u64,
    pub strided_loads: u64,
    pub contiguous_stores: u64,
    pub strided_stores: u64,
}

impl AccessCounts {
    pub(crate) fn load(&mut self, n: u64, contiguous: bool) {
        if contiguous {
            self.contiguous_loads += n;
        } else {
            self.strided_loads += n;
        }
    }

    pub(crate) fn store(&mut self, n: u64, contiguous: bool) {
        if contiguous {
            self.contiguous_stores += n;
        } else {
            self.strided_stores += n;
        }
    }

    pub fn loads(&self) -> u64 {
        self.contiguous_loads + self.strided_loads
    }

    pub fn stores(&self) -> u64 {
        self.contiguous_stores + self.strided_stores
    }
}

impl std::ops::AddAssign for AccessCounts {
    fn add_assign(&mut self, o: Self) {
        self.contiguous_loads += o.contiguous_loads;
        self.strided_loads += o.strided_loads;
        self.contiguous_stores += o.contiguous_stores;
        self.strided_stores += o.strided_stores;
    }
}

#[derive(Clone, Debug)]
pub struct KernelRun {
    pub output: TensorBuf,
    pub access: AccessCounts,
    pub work: WorkChunk,
}

/// Element strides `(row, column, channel)` of a tensor.
#[inline]
pub(crate) fn strides(t: &TensorBuf) -> (usize, usize, usize) {
    let (h, w, ch) = t.dims();
    match t.layout() {
        Layout::Chw => (w, 1, h * w),
        Layout::Hwc => (w * ch, ch, 1),
    }
}

/// Number of filter taps `i` in `0..f` with `0 <= o*s + i - p < n`.
#[inline]
pub(crate) fn valid_taps(o: usize, f: usize, s: usize, p: usize, n: usize) -> usize {
    let start = (o * s) as isize - p as isize;
    let lo = start.max(0);
    let hi = (start + f as isize).min(n as isize);
    (hi - lo).max(0) as usize
}

/// Maps (output row, filter row) to an input row, `None` inside the padding.
pub(crate) fn padded_rows(g: &LayerGeometry) -> impl Fn(usize, usize) -> Option<usize> {
    let (s, p, iy) = (g.s, g.p, g.iy);
    move |o, i| {
        let y = (o * s + i) as isize - p as isize;
        (y >= 0 && (y as usize) < iy).then_some(y as usize)
    }
}

/// Depthwise core: computes output rows `rows` of channels `chans`.
///
/// `src_row(o, i)` maps output row `o` and filter row `i` to a row of `src`,
/// or `None` for a padding row. Columns are always padded by bounds check.
/// `src` holds channel `c` at `c - src_c0`; `dst` receives output row `o` at
/// `dst_row(o)` and channel `c` at `c - dst_c0`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn dw_core(
    src: &TensorBuf,
    src_row: impl Fn(usize, usize) -> Option<usize>,
    src_c0: usize,
    w: &WeightsBuf,
    q: &QuantParams,
    g: &LayerGeometry,
    rows: Range<usize>,
    chans: Range<usize>,
    dst: &mut TensorBuf,
    dst_row: impl Fn(usize) -> usize,
    dst_c0: usize,
    counts: &mut AccessCounts,
) {
    let (sy, sx, sc) = strides(src);
    let (dy, dx, dc) = strides(dst);
    let load_contig = sx == 1;
    let store_contig = dx == 1;
    let sdata = src.data();
    let mut loads = 0u64;
    let npx = (rows.len() * g.ox) as u64;
    for c in chans.clone() {
        let sbase = (c - src_c0) * sc;
        let dbase = (c - dst_c0) * dc;
        for o in rows.clone() {
            for ox in 0..g.ox {
                let mut acc = 0i32;
                for i in 0..g.fy {
                    let Some(r) = src_row(o, i) else { continue };
                    let rbase = sbase + r * sy;
                    for j in 0..g.fx {
                        let x = (ox * g.s + j) as isize - g.p as isize;
                        if x < 0 || x as usize >= g.ix {
                            continue;
                        }
                        loads += 1;
                        acc += i32::from(sdata[rbase + x as usize * sx]) * i32::from(w.dw_at(c, i, j));
                    }
                }
                let di = dbase + dst_row(o) * dy + ox * dx;
                dst.data_mut()[di] = q.requant(acc, c);
            }
        }
    }
    counts.load(loads, load_contig);
    counts.store(npx * chans.len() as u64, store_contig);
}

/// Pointwise core: output rows `rows`, output channels `kchans`.
///
/// `src_row(o)` gives the source row holding the pixels of output row `o`;
/// the column is `ox * s`. Output row `o` lands at `dst_row(o)` and channel
/// `k` at `k - dst_k0`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn pw_core(
    src: &TensorBuf,
    src_row: impl Fn(usize) -> usize,
    w: &WeightsBuf,
    q: &QuantParams,
    g: &LayerGeometry,
    rows: Range<usize>,
    kchans: Range<usize>,
    dst: &mut TensorBuf,
    dst_row: impl Fn(usize) -> usize,
    dst_k0: usize,
    counts: &mut AccessCounts,
) {
    let (sy, sx, sc) = strides(src);
    let (dy, dx, dc) = strides(dst);
    let sdata = src.data();
    let mut col = vec![0i32; g.c];
    for o in rows.clone() {
        let r = src_row(o);
        let d = dst_row(o);
        for ox in 0..g.ox {
            let base = r * sy + ox * g.s * sx;
            for (c, v) in col.iter_mut().enumerate() {
                *v = i32::from(sdata[base + c * sc]);
            }
            for k in kchans.clone() {
                let mut acc = 0i32;
                for (c, v) in col.iter().enumerate() {
                    acc += v * i32::from(w.pw_at(k, c));
                }
                let di = d * dy + ox * dx + (k - dst_k0) * dc;
                dst.data_mut()[di] = q.requant(acc, k);
            }
        }
    }
    let npx = (rows.len() * g.ox) as u64;
    let nk = kchans.len() as u64;
    counts.load(npx * nk * g.c as u64, sc == 1);
    counts.store(npx * nk, dc == 1);
}

fn check_variant(variant: &KernelVariant, op: KernelOp, input: &TensorBuf, g: &LayerGeometry) -> Result<()> {
    let want = match op {
        KernelOp::Dw => LayerKind::Dw,
        KernelOp::Pw => LayerKind::Pw,
    };
    if variant.op != op || g.kind != want {
        return Err(Error::Geometry(format!("variant {variant} cannot run a {} layer", g.kind)));
    }
    if input.layout() != variant.in_layout {
        return Err(Error::LayoutMismatch { expected: variant.in_layout, actual: input.layout() });
    }
    g.validate()?;
    check_input(input, g)
}

/// Work units of a depthwise pass: one per channel.
pub fn dw_work(g: &LayerGeometry, rows: usize, chans: usize, access: &AccessCounts) -> WorkChunk {
    WorkChunk {
        units: chans as u64,
        ops: (chans * rows * g.ox * g.fx * g.fy) as u64,
        strided_loads: access.strided_loads,
        strided_stores: access.strided_stores,
    }
}

/// Work units of a pointwise pass: two half-rows per output row.
pub fn pw_work(g: &LayerGeometry, rows: usize, kchans: usize, access: &AccessCounts) -> WorkChunk {
    WorkChunk {
        units: 2 * rows as u64,
        ops: (rows * g.ox * kchans * g.c) as u64,
        strided_loads: access.strided_loads,
        strided_stores: access.strided_stores,
    }
}

pub fn run_dw(variant: &KernelVariant, input: &TensorBuf, w: &WeightsBuf, q: &QuantParams, g: &LayerGeometry) -> Result<KernelRun> {
    check_variant(variant, KernelOp::Dw, input, g)?;
    w.check(g)?;
    q.validate(g.k)?;
    let mut out = TensorBuf::zeros(g.oy, g.ox, g.k, variant.out_layout);
    let mut access = AccessCounts::default();
    dw_core(input, padded_rows(g), 0, w, q, g, 0..g.oy, 0..g.c, &mut out, |o| o, 0, &mut access);
    let work = dw_work(g, g.oy, g.c, &access);
    Ok(KernelRun { output: out, access, work })
}

pub fn run_pw(variant: &KernelVariant, input: &TensorBuf, w: &WeightsBuf, q: &QuantParams, g: &LayerGeometry) -> Result<KernelRun> {
    check_variant(variant, KernelOp::Pw, input, g)?;
    w.check(g)?;
    q.validate(g.k)?;
    let mut out = TensorBuf::zeros(g.oy, g.ox, g.k, variant.out_layout);
    let mut access = AccessCounts::default();
    let s = g.s;
    pw_core(input, |o| o * s, w, q, g, 0..g.oy, 0..g.k, &mut out, |o| o, 0, &mut access);
    let work = pw_work(g, g.oy, g.k, &access);
    Ok(KernelRun { output: out, access, work })
}

/// Whether a pass over a tensor with `layout` and extents `dims` has unit
/// stride along the depthwise inner loop (columns).
pub(crate) fn dw_contiguous(layout: Layout, ch: usize) -> bool {
    layout.x_stride(ch) == 1
}

/// Whether a pass has unit stride along the pointwise inner loop (channels).
pub(crate) fn pw_contiguous(layout: Layout, h: usize, w: usize) -> bool {
    layout.channel_stride(h, w) == 1
}

/// In-bounds depthwise taps over output rows `rows` for one channel.
pub(crate) fn dw_taps(g: &LayerGeometry, rows: Range<usize>) -> u64 {
    let r: usize = rows.map(|o| valid_taps(o, g.fy, g.s, g.p, g.iy)).sum();
    let c: usize = (0..g.ox).map(|o| valid_taps(o, g.fx, g.s, g.p, g.ix)).sum();
    (r * c) as u64
}

/// Closed-form access counts of [`run_dw`], used by the cost model.
pub fn dw_access_counts(variant: &KernelVariant, g: &LayerGeometry) -> AccessCounts {
    let mut a = AccessCounts::default();
    a.load(dw_taps(g, 0..g.oy) * g.c as u64, dw_contiguous(variant.in_layout, g.c));
    a.store((g.oy * g.ox * g.k) as u64, dw_contiguous(variant.out_layout, g.k));
    a
}

/// Closed-form access counts of [`run_pw`].
pub fn pw_access_counts(variant: &KernelVariant, g: &LayerGeometry) -> AccessCounts {
    let mut a = AccessCounts::default();
    let px = (g.oy * g.ox) as u64;
    a.load(px * (g.k * g.c) as u64, pw_contiguous(variant.in_layout, g.iy, g.ix));
    a.store(px * g.k as u64, pw_contiguous(variant.out_layout, g.oy, g.ox));
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PwWeightOrder;

    #[test]
    fn four_variants_per_op() {
        let v = KernelVariant::all(KernelOp::Dw);
        let mut set: Vec<_> = v.iter().map(|k| (k.in_layout, k.out_layout)).collect();
        set.sort();
        set.dedup();
        assert_eq!(set.len(), 4);
    }

    #[test]
    fn work_units() {
        let g = LayerGeometry::dw(8, 8, 64, 3, 1, 1).unwrap();
        let x = TensorBuf::zeros(8, 8, 64, Layout::Chw);
        let w = WeightsBuf::dw(64, 3, 3, vec![1; 64 * 9]).unwrap();
        let v = KernelVariant::new(KernelOp::Dw, Layout::Chw, Layout::Hwc);
        assert_eq!(run_dw(&v, &x, &w, &QuantParams::identity(64), &g).unwrap().work.units, 64);

        let g = LayerGeometry::pw(8, 8, 4, 4).unwrap();
        let x = TensorBuf::zeros(8, 8, 4, Layout::Hwc);
        let w = WeightsBuf::pw(4, 4, PwWeightOrder::OutMajor, vec![1; 16]).unwrap();
        let v = KernelVariant::new(KernelOp::Pw, Layout::Hwc, Layout::Hwc);
        assert_eq!(run_pw(&v, &x, &w, &QuantParams::identity(4), &g).unwrap().work.units, 16);

        let g = LayerGeometry::pw(1, 1, 4, 4).unwrap();
        let x = TensorBuf::zeros(1, 1, 4, Layout::Hwc);
        assert_eq!(run_pw(&v, &x, &w, &QuantParams::identity(4), &g).unwrap().work.units, 2);
    }

    #[test]
    fn layout_mismatch_is_an_error() {
        let g = LayerGeometry::pw(2, 2, 1, 1).unwrap();
        let x = TensorBuf::zeros(2, 2, 1, Layout::Chw);
        let w = WeightsBuf::pw(1, 1, PwWeightOrder::OutMajor, vec![1]).unwrap();
        let v = KernelVariant::new(KernelOp::Pw, Layout::Hwc, Layout::Hwc);
        assert!(matches!(run_pw(&v, &x, &w, &QuantParams::identity(1), &g), Err(Error::LayoutMismatch { .. })));
        let v = KernelVariant::new(KernelOp::Dw, Layout::Chw, Layout::Hwc);
        assert!(run_dw(&v, &x, &w, &QuantParams::identity(1), &g).is_err());
    }

    #[test]
    fn chw_input_avoids_strided_dw_loads() {
        let g = LayerGeometry::dw(6, 6, 4, 3, 1, 1).unwrap();
        let chw = dw_access_counts(&KernelVariant::new(KernelOp::Dw, Layout::Chw, Layout::Hwc), &g);
        let hwc = dw_access_counts(&KernelVariant::new(KernelOp::Dw, Layout::Hwc, Layout::Hwc), &g);
        assert_eq!(chw.strided_loads, 0);
        assert_eq!(hwc.contiguous_loads, 0);
        assert_eq!(chw.loads(), hwc.loads());
    }
}
