//! Naive single-threaded kernels. Every optimized and fused kernel in the
//! crate is checked bit-exactly against these. Outputs are HWC.

use crate::error::{Error, Result};
use crate::model::{LayerGeometry, LayerKind, Layout, QuantParams, TensorBuf, WeightsBuf};

/// Geometry, weights and requantization of one layer.
#[derive(Clone, Debug)]
pub struct LayerParams {
    pub geometry: LayerGeometry,
    pub weights: Option<WeightsBuf>,
    pub quant: QuantParams,
}

impl LayerParams {
    pub fn new(geometry: LayerGeometry, weights: WeightsBuf, quant: QuantParams) -> Self {
        LayerParams { geometry, weights: Some(weights), quant }
    }

    pub fn weights(&self) -> Result<&WeightsBuf> {
        self.weights
            .as_ref()
            .ok_or_else(|| Error::DimensionMismatch(format!("{} layer has no weights", self.geometry.kind)))
    }
}

pub(crate) fn check_input(input: &TensorBuf, g: &LayerGeometry) -> Result<()> {
    if input.dims() != g.input_dims() {
        return Err(Error::DimensionMismatch(format!(
            "input is {:?}, {} layer expects {:?}",
            input.dims(),
            g.kind,
            g.input_dims()
        )));
    }
    Ok(())
}

fn expect_kind(g: &LayerGeometry, kinds: &[LayerKind]) -> Result<()> {
    g.validate()?;
    if kinds.contains(&g.kind) {
        Ok(())
    } else {
        Err(Error::Geometry(format!("expected one of {kinds:?}, got {}", g.kind)))
    }
}

/// Input element at padded coordinates, zero outside the map.
#[inline]
fn padded(input: &TensorBuf, y: isize, x: isize, c: usize) -> i32 {
    if y < 0 || x < 0 || y as usize >= input.h() || x as usize >= input.w() {
        0
    } else {
        i32::from(input.get(y as usize, x as usize, c))
    }
}

pub fn ref_dw(input: &TensorBuf, w: &WeightsBuf, q: &QuantParams, g: &LayerGeometry) -> Result<TensorBuf> {
    expect_kind(g, &[LayerKind::Dw])?;
    check_input(input, g)?;
    w.check(g)?;
    q.validate(g.k)?;
    let mut out = TensorBuf::zeros(g.oy, g.ox, g.k, Layout::Hwc);
    for k in 0..g.k {
        for oy in 0..g.oy {
            for ox in 0..g.ox {
                let mut acc = 0i32;
                for i in 0..g.fy {
                    for j in 0..g.fx {
                        let y = (oy * g.s + i) as isize - g.p as isize;
                        let x = (ox * g.s + j) as isize - g.p as isize;
                        acc += padded(input, y, x, k) * i32::from(w.dw_at(k, i, j));
                    }
                }
                out.set(oy, ox, k, q.requant(acc, k));
            }
        }
    }
    Ok(out)
}

pub fn ref_pw(input: &TensorBuf, w: &WeightsBuf, q: &QuantParams, g: &LayerGeometry) -> Result<TensorBuf> {
    expect_kind(g, &[LayerKind::Pw, LayerKind::Fc])?;
    check_input(input, g)?;
    w.check(g)?;
    q.validate(g.k)?;
    let mut out = TensorBuf::zeros(g.oy, g.ox, g.k, Layout::Hwc);
    for oy in 0..g.oy {
        for ox in 0..g.ox {
            for k in 0..g.k {
                let mut acc = 0i32;
                for c in 0..g.c {
                    acc += i32::from(input.get(oy * g.s, ox * g.s, c)) * i32::from(w.pw_at(k, c));
                }
                out.set(oy, ox, k, q.requant(acc, k));
            }
        }
    }
    Ok(out)
}

pub fn ref_conv(input: &TensorBuf, w: &WeightsBuf, q: &QuantParams, g: &LayerGeometry) -> Result<TensorBuf> {
    expect_kind(g, &[LayerKind::Conv])?;
    check_input(input, g)?;
    w.check(g)?;
    q.validate(g.k)?;
    let mut out = TensorBuf::zeros(g.oy, g.ox, g.k, Layout::Hwc);
    for oy in 0..g.oy {
        for ox in 0..g.ox {
            for k in 0..g.k {
                let mut acc = 0i32;
                for i in 0..g.fy {
                    for j in 0..g.fx {
                        let y = (oy * g.s + i) as isize - g.p as isize;
                        let x = (ox * g.s + j) as isize - g.p as isize;
                        for c in 0..g.c {
                            acc += padded(input, y, x, c) * i32::from(w.conv_at(k, i, j, c));
                        }
                    }
                }
                out.set(oy, ox, k, q.requant(acc, k));
            }
        }
    }
    Ok(out)
}

/// Saturating elementwise sum.
pub fn ref_add(a: &TensorBuf, b: &TensorBuf, g: &LayerGeometry) -> Result<TensorBuf> {
    expect_kind(g, &[LayerKind::Add])?;
    check_input(a, g)?;
    check_input(b, g)?;
    Ok(TensorBuf::from_fn(g.oy, g.ox, g.k, Layout::Hwc, |y, x, c| {
        (i16::from(a.get(y, x, c)) + i16::from(b.get(y, x, c))).clamp(-128, 127) as i8
    }))
}

/// Global average with round-half-up division.
pub fn ref_pool(input: &TensorBuf, g: &LayerGeometry) -> Result<TensorBuf> {
    expect_kind(g, &[LayerKind::Pool])?;
    check_input(input, g)?;
    let n = (g.ix * g.iy) as i64;
    let mut out = TensorBuf::zeros(1, 1, g.c, Layout::Hwc);
    for c in 0..g.c {
        let mut sum = 0i64;
        for y in 0..g.iy {
            for x in 0..g.ix {
                sum += i64::from(input.get(y, x, c));
            }
        }
        out.set(0, 0, c, pool_round(sum, n));
    }
    Ok(out)
}

#[inline]
pub(crate) fn pool_round(sum: i64, n: i64) -> i8 {
    (2 * sum + n).div_euclid(2 * n).clamp(-128, 127) as i8
}

/// Runs any single layer. `skip` is the residual operand of an Add layer.
pub fn ref_layer(input: &TensorBuf, params: &LayerParams, skip: Option<&TensorBuf>) -> Result<TensorBuf> {
    let g = &params.geometry;
    match g.kind {
        LayerKind::Dw => ref_dw(input, params.weights()?, &params.quant, g),
        LayerKind::Pw | LayerKind::Fc => ref_pw(input, params.weights()?, &params.quant, g),
        LayerKind::Conv => ref_conv(input, params.weights()?, &params.quant, g),
        LayerKind::Pool => ref_pool(input, g),
        LayerKind::Add => {
            let b = skip.ok_or_else(|| Error::DimensionMismatch("add layer needs a residual operand".into()))?;
            ref_add(input, b, g)
        }
    }
}

/// Layer `a` then layer `b` with the int8 intermediate fully materialized.
pub fn ref_block(input: &TensorBuf, a: &LayerParams, b: &LayerParams) -> Result<TensorBuf> {
    let pair = (a.geometry.kind, b.geometry.kind);
    if pair != (LayerKind::Dw, LayerKind::Pw) && pair != (LayerKind::Pw, LayerKind::Dw) {
        return Err(Error::Geometry(format!("blocks are DW-PW or PW-DW, got {}-{}", pair.0, pair.1)));
    }
    if !a.geometry.chains_into(&b.geometry) {
        return Err(Error::Chain {
            index: 1,
            reason: format!("{:?} does not feed {:?}", a.geometry.output_dims(), b.geometry.input_dims()),
        });
    }
    let mid = ref_layer(input, a, None)?;
    ref_layer(&mid, b, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PwWeightOrder;

    fn lcg(seed: &mut u64) -> i8 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*seed >> 56) as i8
    }

    #[test]
    fn dw_identity_and_zero() {
        let g = LayerGeometry::dw(5, 4, 3, 1, 1, 0).unwrap();
        let mut s = 7;
        let x = TensorBuf::from_fn(4, 5, 3, Layout::Chw, |_, _, _| lcg(&mut s));
        let w = WeightsBuf::dw(3, 1, 1, vec![1; 3]).unwrap();
        let y = ref_dw(&x, &w, &QuantParams::identity(3), &g).unwrap();
        assert!(y.same_values(&x));
        let z = ref_dw(&TensorBuf::zeros(4, 5, 3, Layout::Hwc), &w, &QuantParams::identity(3), &g).unwrap();
        assert!(z.data().iter().all(|&v| v == 0));
    }

    /// Frozen 3x3x2 case; the expected values were evaluated by hand from the
    /// depthwise sum with zero padding.
    #[test]
    fn dw_small_frozen_case() {
        let g = LayerGeometry::dw(3, 3, 2, 3, 1, 1).unwrap();
        // channel 0 = 1..=9 row-major, channel 1 = all 2
        let x = TensorBuf::from_fn(3, 3, 2, Layout::Hwc, |y, x, c| if c == 0 { (y * 3 + x + 1) as i8 } else { 2 });
        let w = WeightsBuf::dw(2, 3, 3, vec![1; 18]).unwrap();
        let y = ref_dw(&x, &w, &QuantParams::identity(2), &g).unwrap();
        let ch0: Vec<i8> = (0..3).flat_map(|r| (0..3).map(move |c| (r, c))).map(|(r, c)| y.get(r, c, 0)).collect();
        assert_eq!(ch0, vec![12, 21, 16, 27, 45, 33, 24, 39, 28]);
        assert_eq!(y.get(0, 0, 1), 8);
        assert_eq!(y.get(1, 1, 1), 18);
    }

    #[test]
    fn pw_copy_and_channel_sum() {
        let g = LayerGeometry::pw(3, 2, 1, 1).unwrap();
        let mut s = 3;
        let x = TensorBuf::from_fn(2, 3, 1, Layout::Hwc, |_, _, _| lcg(&mut s));
        let w = WeightsBuf::pw(1, 1, PwWeightOrder::OutMajor, vec![1]).unwrap();
        assert!(ref_pw(&x, &w, &QuantParams::identity(1), &g).unwrap().same_values(&x));

        let g = LayerGeometry::pw(2, 2, 3, 2).unwrap();
        let x = TensorBuf::from_fn(2, 2, 3, Layout::Chw, |y, x, c| (y + x + c) as i8);
        let w = WeightsBuf::pw(2, 3, PwWeightOrder::OutMajor, vec![1, 1, 1, 0, 0, 0]).unwrap();
        let y = ref_pw(&x, &w, &QuantParams::identity(2), &g).unwrap();
        assert_eq!(y.get(1, 1, 0), 2 + 3 + 4);
        assert_eq!(y.get(1, 0, 1), 0);
    }

    #[test]
    fn block_rejects_bad_pairs() {
        let dw = LayerGeometry::dw(4, 4, 2, 3, 1, 1).unwrap();
        let pw = LayerGeometry::pw(5, 5, 2, 2).unwrap();
        let a = LayerParams::new(dw, WeightsBuf::dw(2, 3, 3, vec![0; 18]).unwrap(), QuantParams::identity(2));
        let b = LayerParams::new(pw, WeightsBuf::pw(2, 2, PwWeightOrder::OutMajor, vec![0; 4]).unwrap(), QuantParams::identity(2));
        let x = TensorBuf::zeros(4, 4, 2, Layout::Hwc);
        assert!(matches!(ref_block(&x, &a, &b), Err(Error::Chain { .. })));
        assert!(ref_block(&x, &a, &a).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let g = LayerGeometry::dw(4, 4, 2, 3, 1, 1).unwrap();
        let w = WeightsBuf::dw(2, 3, 3, vec![0; 18]).unwrap();
        let x = TensorBuf::zeros(4, 5, 2, Layout::Hwc);
        assert!(matches!(ref_dw(&x, &w, &QuantParams::identity(2), &g), Err(Error::DimensionMismatch(_))));
    }
}
