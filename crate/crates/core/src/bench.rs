//! Modeled fused-vs-unfused compute overhead over a grid of block
//! geometries and fd values.
//!
//! The `paper36` grid crosses IX = IY in {32, 64, 128}, DW stride in {1, 2},
//! C in {32, 64, 128} and K in {C, 2C}. A DW-PW block is DW(C, stride) then
//! PW(C -> K); a PW-DW block is PW(C -> K) then DW(K, stride). The fd sweep
//! runs 1..=16 for DWPW-Rows (the smallest DW output has 16 rows),
//! 1..=20 for PWDW-Channels and 3..=20 for PWDW-Rows (fd >= fy).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fused::{dw_chunk, expected_trace, pw_chunk, run_fused, FusedOrder, FusedScheme, TraceItem, Tiling};
use crate::memsim::{compute_cycles, shift_cycles};
use crate::model::{LayerGeometry, MemHierarchy};
use crate::reference::ref_block;
use crate::synth;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridPoint {
    pub ix: usize,
    pub s: usize,
    pub c: usize,
    pub k: usize,
}

pub fn paper36() -> Vec<GridPoint> {
    let mut v = Vec::with_capacity(36);
    for ix in [32, 64, 128] {
        for s in [1, 2] {
            for c in [32, 64, 128] {
                for k in [c, 2 * c] {
                    v.push(GridPoint { ix, s, c, k });
                }
            }
        }
    }
    v
}

pub fn grid(name: &str) -> Result<Vec<GridPoint>> {
    match name {
        "paper36" => Ok(paper36()),
        _ => Err(Error::Parse(format!("unknown grid `{name}` (paper36)"))),
    }
}

/// The two layers of a grid block for `order`.
pub fn block(order: FusedOrder, p: &GridPoint) -> Result<(LayerGeometry, LayerGeometry)> {
    match order {
        FusedOrder::DwPw => {
            let dw = LayerGeometry::dw(p.ix, p.ix, p.c, 3, p.s, 1)?;
            let pw = LayerGeometry::pw(dw.ox, dw.oy, p.c, p.k)?;
            Ok((dw, pw))
        }
        FusedOrder::PwDw => {
            let pw = LayerGeometry::pw(p.ix, p.ix, p.c, p.k)?;
            let dw = LayerGeometry::dw(p.ix, p.ix, p.k, 3, p.s, 1)?;
            Ok((pw, dw))
        }
    }
}

pub fn fd_range(scheme: &FusedScheme) -> std::ops::RangeInclusive<usize> {
    match (scheme.order, scheme.tiling) {
        (FusedOrder::DwPw, _) => 1..=16,
        (FusedOrder::PwDw, Tiling::Channels) => 1..=20,
        (FusedOrder::PwDw, Tiling::Rows) => 3..=20,
    }
}

/// Compute cycles of a fused run: every kernel call and buffer shift.
pub fn fused_compute(scheme: &FusedScheme, a: &LayerGeometry, b: &LayerGeometry, h: &MemHierarchy) -> Result<u64> {
    Ok(expected_trace(scheme, a, b, None)?
        .iter()
        .map(|t| match t {
            TraceItem::Dw(w) | TraceItem::Pw(w) => compute_cycles(w, h),
            TraceItem::Shift { bytes } => shift_cycles(*bytes, h),
        })
        .sum())
}

/// Compute cycles of the two layers run whole, each as one kernel call, in
/// the scheme's layouts with the intermediate materialized in `mid`.
pub fn unfused_compute(scheme: &FusedScheme, a: &LayerGeometry, b: &LayerGeometry, h: &MemHierarchy) -> u64 {
    let l = scheme.layouts;
    let (dw, pw) = match scheme.order {
        FusedOrder::DwPw => (
            dw_chunk(a, 0..a.oy, a.c, (l.input, a.c), (l.mid, a.k)).0,
            pw_chunk(b, b.oy, b.k, (l.mid, b.iy, b.ix), (l.output, b.oy, b.ox)).0,
        ),
        FusedOrder::PwDw => (
            dw_chunk(b, 0..b.oy, b.c, (l.mid, b.c), (l.output, b.k)).0,
            pw_chunk(a, a.oy, a.k, (l.input, a.iy, a.ix), (l.mid, a.oy, a.ox)).0,
        ),
    };
    compute_cycles(&dw, h) + compute_cycles(&pw, h)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    /// Scheme name and layout triple.
    pub kernel: String,
    pub fd: usize,
    pub ix: usize,
    pub s: usize,
    pub c: usize,
    pub k: usize,
    pub fused_cycles: u64,
    pub unfused_cycles: u64,
    /// `fused / unfused - 1`.
    pub overhead: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub kernel: String,
    pub fd: usize,
    pub rows: usize,
    pub median_overhead: f64,
    /// Numeric check of the fused kernel on a reduced block of this cell.
    pub oracle_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub grid: String,
    pub rows: Vec<BenchRow>,
    pub cells: Vec<BenchCell>,
}

pub fn kernel_label(scheme: &FusedScheme) -> String {
    format!("{} {}", scheme.name(), scheme.layouts)
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Runs the fused kernel on a 16x16 block with the grid point's stride
/// and a quarter of its channels, against the reference.
fn oracle(scheme: &FusedScheme, p: &GridPoint, seed: u64) -> Result<bool> {
    let small = GridPoint { ix: 16, s: p.s, c: p.c / 4, k: p.k / 4 };
    let (a, b) = block(scheme.order, &small)?;
    let mut rng = synth::rng(seed);
    let pa = synth::layer_params(&a, &mut rng);
    let pb = synth::layer_params(&b, &mut rng);
    let x = synth::tensor(&mut rng, a.iy, a.ix, a.c, scheme.layouts.input);
    let want = ref_block(&x, &pa, &pb)?;
    let fd = match (scheme.order, scheme.tiling) {
        (FusedOrder::DwPw, _) => scheme.fd.min(a.oy),
        (FusedOrder::PwDw, Tiling::Channels) => scheme.fd.min(a.k),
        (FusedOrder::PwDw, Tiling::Rows) => scheme.fd,
    };
    let got = run_fused(&x, &pa, &pb, &scheme.with_fd(fd)?)?.output;
    Ok(got.same_values(&want))
}

/// Sweeps the six preset kernels over a grid. With `check`, each
/// (kernel, fd) cell also runs one numeric oracle check.
pub fn bench_kernels(grid_name: &str, h: &MemHierarchy, check: bool) -> Result<BenchReport> {
    let points = grid(grid_name)?;
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for base in FusedScheme::presets(1) {
        for fd in fd_range(&base) {
            let scheme = FusedScheme { fd, ..base };
            let mut over = Vec::with_capacity(points.len());
            for p in &points {
                let (a, b) = block(scheme.order, p)?;
                let fused = fused_compute(&scheme, &a, &b, h)?;
                let unfused = unfused_compute(&scheme, &a, &b, h);
                let overhead = fused as f64 / unfused as f64 - 1.0;
                over.push(overhead);
                rows.push(BenchRow { kernel: kernel_label(&scheme), fd, ix: p.ix, s: p.s, c: p.c, k: p.k, fused_cycles: fused, unfused_cycles: unfused, overhead });
            }
            let oracle_ok = !check || oracle(&scheme, &points[fd % points.len()], fd as u64)?;
            cells.push(BenchCell { kernel: kernel_label(&scheme), fd, rows: over.len(), median_overhead: median(&mut over), oracle_ok });
        }
    }
    Ok(BenchReport { grid: grid_name.into(), rows, cells })
}

impl BenchReport {
    /// `(fd, median)` of one kernel, by ascending fd.
    pub fn medians(&self, kernel: &str) -> Vec<(usize, f64)> {
        self.cells.iter().filter(|c| c.kernel == kernel).map(|c| (c.fd, c.median_overhead)).collect()
    }

    pub fn kernels(&self) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        for c in &self.cells {
            if !v.contains(&c.kernel) {
                v.push(c.kernel.clone());
            }
        }
        v
    }
}

/// fds after which the median overhead rises: `f` with `m(f + 1) > m(f)`.
pub fn cliffs(medians: &[(usize, f64)]) -> Vec<usize> {
    medians.windows(2).filter(|w| w[1].1 > w[0].1 + 1e-12).map(|w| w[0].0).collect()
}
