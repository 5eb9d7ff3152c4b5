use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    /// Depthwise convolution, one filter per channel.
    Dw,
    /// Pointwise (1x1) convolution.
    Pw,
    /// Standard dense convolution.
    Conv,
    /// Elementwise residual addition.
    Add,
    /// Global average pooling.
    Pool,
    /// Fully connected classifier on a 1x1 map.
    Fc,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Dw => "dw",
            LayerKind::Pw => "pw",
            LayerKind::Conv => "conv",
            LayerKind::Add => "add",
            LayerKind::Pool => "pool",
            LayerKind::Fc => "fc",
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Hyperparameters of one layer.
///
/// The `x` axis is the width (the length of a row) and the `y` axis is the
/// height (the row count): `ix`/`ox`/`fx` are widths, `iy`/`oy`/`fy` are
/// heights. Row tiling therefore splits `oy`, and the row-wise fused
/// buffers hold `FD` rows of length `ix` or `ox`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerGeometry {
    pub kind: LayerKind,
    pub ix: usize,
    pub iy: usize,
    pub c: usize,
    pub ox: usize,
    pub oy: usize,
    pub k: usize,
    pub fx: usize,
    pub fy: usize,
    pub p: usize,
    pub s: usize,
}

fn out_extent(input: usize, filter: usize, p: usize, s: usize) -> Result<usize> {
    if s == 0 {
        return Err(Error::Geometry("stride must be >= 1".into()));
    }
    if filter == 0 || input == 0 {
        return Err(Error::Geometry("extents must be >= 1".into()));
    }
    if filter > input + 2 * p {
        return Err(Error::Geometry(format!(
            "filter extent {filter} exceeds padded input extent {}",
            input + 2 * p
        )));
    }
    Ok((input + 2 * p - filter) / s + 1)
}

/// Output extents `(ox, oy)` from the sliding-window size law.
pub fn output_dims(g: &LayerGeometry) -> Result<(usize, usize)> {
    Ok((out_extent(g.ix, g.fx, g.p, g.s)?, out_extent(g.iy, g.fy, g.p, g.s)?))
}

/// Multiply-accumulate count. Padded taps are counted, as the kernels
/// iterate over them. Add and pooling layers perform no MACs.
pub fn mac_count(g: &LayerGeometry) -> u64 {
    let out_px = (g.ox * g.oy) as u64;
    match g.kind {
        LayerKind::Conv => g.k as u64 * out_px * (g.c * g.fx * g.fy) as u64,
        LayerKind::Dw => g.c as u64 * out_px * (g.fx * g.fy) as u64,
        LayerKind::Pw | LayerKind::Fc => g.k as u64 * out_px * g.c as u64,
        LayerKind::Add | LayerKind::Pool => 0,
    }
}

/// Weight storage in bytes (one byte per int8 weight, biases excluded).
pub fn weight_bytes(g: &LayerGeometry) -> u64 {
    match g.kind {
        LayerKind::Conv => (g.k * g.c * g.fx * g.fy) as u64,
        LayerKind::Dw => (g.c * g.fx * g.fy) as u64,
        LayerKind::Pw | LayerKind::Fc => (g.k * g.c) as u64,
        LayerKind::Add | LayerKind::Pool => 0,
    }
}

impl LayerGeometry {
    /// Builds a geometry and derives the output extents.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: LayerKind,
        ix: usize,
        iy: usize,
        c: usize,
        k: usize,
        fx: usize,
        fy: usize,
        p: usize,
        s: usize,
    ) -> Result<Self> {
        let mut g = LayerGeometry { kind, ix, iy, c, ox: 0, oy: 0, k, fx, fy, p, s };
        let (ox, oy) = output_dims(&g)?;
        g.ox = ox;
        g.oy = oy;
        g.validate()?;
        Ok(g)
    }

    /// Square-filter depthwise layer over a `ix` x `iy` map.
    pub fn dw(ix: usize, iy: usize, c: usize, f: usize, s: usize, p: usize) -> Result<Self> {
        Self::new(LayerKind::Dw, ix, iy, c, c, f, f, p, s)
    }

    pub fn pw(ix: usize, iy: usize, c: usize, k: usize) -> Result<Self> {
        Self::new(LayerKind::Pw, ix, iy, c, k, 1, 1, 0, 1)
    }

    pub fn conv(ix: usize, iy: usize, c: usize, k: usize, f: usize, s: usize, p: usize) -> Result<Self> {
        Self::new(LayerKind::Conv, ix, iy, c, k, f, f, p, s)
    }

    pub fn add(ix: usize, iy: usize, c: usize) -> Result<Self> {
        Self::new(LayerKind::Add, ix, iy, c, c, 1, 1, 0, 1)
    }

    /// Global average pooling down to a 1x1 map.
    pub fn pool(ix: usize, iy: usize, c: usize) -> Result<Self> {
        let mut g = LayerGeometry { kind: LayerKind::Pool, ix, iy, c, ox: 0, oy: 0, k: c, fx: ix, fy: iy, p: 0, s: 1 };
        let (ox, oy) = output_dims(&g)?;
        g.ox = ox;
        g.oy = oy;
        g.validate()?;
        Ok(g)
    }

    pub fn fc(c: usize, k: usize) -> Result<Self> {
        Self::new(LayerKind::Fc, 1, 1, c, k, 1, 1, 0, 1)
    }

    /// Checks every structural invariant, including that the stored output
    /// extents agree with the size law.
    pub fn validate(&self) -> Result<()> {
        let dims = [self.ix, self.iy, self.c, self.ox, self.oy, self.k, self.fx, self.fy, self.s];
        if dims.contains(&0) {
            return Err(Error::Geometry(format!("all dimensions must be >= 1: {self:?}")));
        }
        let (ox, oy) = output_dims(self)?;
        if (ox, oy) != (self.ox, self.oy) {
            return Err(Error::Geometry(format!(
                "output extents ({}, {}) disagree with the size law ({ox}, {oy})",
                self.ox, self.oy
            )));
        }
        let bad = |m: &str| Err(Error::Geometry(format!("{} layer: {m}", self.kind)));
        match self.kind {
            LayerKind::Dw if self.k != self.c => bad("k must equal c"),
            LayerKind::Pw if self.fx != 1 || self.fy != 1 || self.p != 0 => {
                bad("filter must be 1x1 with no padding")
            }
            LayerKind::Pw if self.s > 2 => bad("stride must be 1 or 2"),
            LayerKind::Add if self.k != self.c || self.fx != 1 || self.fy != 1 || self.s != 1 || self.p != 0 => {
                bad("must be shape-preserving")
            }
            LayerKind::Pool if self.k != self.c || self.ox != 1 || self.oy != 1 => {
                bad("must reduce to a 1x1 map with k = c")
            }
            LayerKind::Fc if self.ix != 1 || self.iy != 1 || self.fx != 1 || self.fy != 1 => {
                bad("input must be a 1x1 map")
            }
            _ => Ok(()),
        }
    }

    pub fn input_bytes(&self) -> u64 {
        (self.ix * self.iy * self.c) as u64
    }

    pub fn output_bytes(&self) -> u64 {
        (self.ox * self.oy * self.k) as u64
    }

    pub fn macs(&self) -> u64 {
        mac_count(self)
    }

    pub fn weight_bytes(&self) -> u64 {
        weight_bytes(self)
    }

    /// `(h, w, ch)` of the input tensor.
    pub fn input_dims(&self) -> (usize, usize, usize) {
        (self.iy, self.ix, self.c)
    }

    /// `(h, w, ch)` of the output tensor.
    pub fn output_dims(&self) -> (usize, usize, usize) {
        (self.oy, self.ox, self.k)
    }

    /// True when `next` consumes exactly what `self` produces.
    pub fn chains_into(&self, next: &LayerGeometry) -> bool {
        self.output_dims() == next.input_dims()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_law_examples() {
        let g = LayerGeometry::dw(56, 56, 32, 3, 2, 1).unwrap();
        assert_eq!((g.ox, g.oy), (28, 28));
        let g = LayerGeometry::pw(8, 8, 4, 4).unwrap();
        assert_eq!((g.ox, g.oy), (8, 8));
        let g = LayerGeometry::new(LayerKind::Conv, 5, 5, 1, 1, 3, 3, 0, 1).unwrap();
        assert_eq!(g.ox, 3);
    }

    #[test]
    fn filter_larger_than_padded_input_is_rejected() {
        let err = LayerGeometry::new(LayerKind::Conv, 2, 2, 1, 1, 5, 5, 1, 1).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
    }

    #[test]
    fn separable_arithmetic_of_the_worked_example() {
        let conv = LayerGeometry::conv(56, 56, 32, 64, 3, 2, 1).unwrap();
        let dw = LayerGeometry::dw(56, 56, 32, 3, 2, 1).unwrap();
        let pw = LayerGeometry::pw(28, 28, 32, 64).unwrap();
        assert_eq!(mac_count(&conv), 14_450_688);
        assert_eq!(mac_count(&dw), 225_792);
        assert_eq!(mac_count(&pw), 1_605_632);
        assert_eq!(mac_count(&dw) + mac_count(&pw), 1_831_424);
        assert_eq!(weight_bytes(&conv), 18_432);
        assert_eq!(weight_bytes(&dw) + weight_bytes(&pw), 2_336);
        let unit = LayerGeometry::dw(1, 1, 1, 1, 1, 0).unwrap();
        assert_eq!(weight_bytes(&unit), 1);
    }

    #[test]
    fn kind_invariants() {
        assert!(LayerGeometry::new(LayerKind::Pw, 8, 8, 4, 4, 3, 3, 1, 1).is_err());
        assert!(LayerGeometry::new(LayerKind::Dw, 8, 8, 4, 8, 3, 3, 1, 1).is_err());
        let mut g = LayerGeometry::pw(8, 8, 4, 4).unwrap();
        g.ox = 7;
        assert!(g.validate().is_err());
    }
}
