use crate::error::{Error, Result};
use crate::model::{LayerGeometry, LayerKind};

/// Storage order of a pointwise weight matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PwWeightOrder {
    /// `W[k][c]`, output-channel major.
    OutMajor,
    /// `W[c][k]`, input-channel major.
    InMajor,
}

/// Signed 8-bit weights of one layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WeightsBuf {
    /// `W[k][i][j]` with `i` over filter rows and `j` over filter columns.
    Dw { k: usize, fy: usize, fx: usize, data: Vec<i8> },
    Pw { k: usize, c: usize, order: PwWeightOrder, data: Vec<i8> },
    /// `W[k][i][j][c]`.
    Conv { k: usize, c: usize, fy: usize, fx: usize, data: Vec<i8> },
}

impl WeightsBuf {
    pub fn dw(k: usize, fy: usize, fx: usize, data: Vec<i8>) -> Result<Self> {
        check_len(data.len(), k * fy * fx)?;
        Ok(WeightsBuf::Dw { k, fy, fx, data })
    }

    pub fn pw(k: usize, c: usize, order: PwWeightOrder, data: Vec<i8>) -> Result<Self> {
        check_len(data.len(), k * c)?;
        Ok(WeightsBuf::Pw { k, c, order, data })
    }

    pub fn conv(k: usize, c: usize, fy: usize, fx: usize, data: Vec<i8>) -> Result<Self> {
        check_len(data.len(), k * c * fy * fx)?;
        Ok(WeightsBuf::Conv { k, c, fy, fx, data })
    }

    /// Builds weights shaped for `g` from a generator over flat indices.
    pub fn for_layer(g: &LayerGeometry, mut gen: impl FnMut() -> i8) -> Option<Self> {
        let mut fill = |n: usize| (0..n).map(|_| gen()).collect::<Vec<_>>();
        match g.kind {
            LayerKind::Dw => Some(WeightsBuf::Dw { k: g.k, fy: g.fy, fx: g.fx, data: fill(g.k * g.fy * g.fx) }),
            LayerKind::Pw | LayerKind::Fc => {
                Some(WeightsBuf::Pw { k: g.k, c: g.c, order: PwWeightOrder::OutMajor, data: fill(g.k * g.c) })
            }
            LayerKind::Conv => {
                Some(WeightsBuf::Conv { k: g.k, c: g.c, fy: g.fy, fx: g.fx, data: fill(g.k * g.c * g.fy * g.fx) })
            }
            LayerKind::Add | LayerKind::Pool => None,
        }
    }

    pub fn len(&self) -> usize {
        self.data().len()
    }

    pub fn is_empty(&self) -> bool {
        self.data().is_empty()
    }

    pub fn data(&self) -> &[i8] {
        match self {
            WeightsBuf::Dw { data, .. } | WeightsBuf::Pw { data, .. } | WeightsBuf::Conv { data, .. } => data,
        }
    }

    #[inline]
    pub fn dw_at(&self, k: usize, i: usize, j: usize) -> i8 {
        match self {
            WeightsBuf::Dw { fy, fx, data, .. } => {
                debug_assert!(i < *fy && j < *fx);
                data[(k * fy + i) * fx + j]
            }
            _ => panic!("not depthwise weights"),
        }
    }

    #[inline]
    pub fn pw_at(&self, k: usize, c: usize) -> i8 {
        match self {
            WeightsBuf::Pw { k: nk, c: nc, order, data } => match order {
                PwWeightOrder::OutMajor => data[k * nc + c],
                PwWeightOrder::InMajor => data[c * nk + k],
            },
            _ => panic!("not pointwise weights"),
        }
    }

    #[inline]
    pub fn conv_at(&self, k: usize, i: usize, j: usize, c: usize) -> i8 {
        match self {
            WeightsBuf::Conv { c: nc, fy, fx, data, .. } => data[((k * fy + i) * fx + j) * nc + c],
            _ => panic!("not convolution weights"),
        }
    }

    /// Verifies the weights fit geometry `g`.
    pub fn check(&self, g: &LayerGeometry) -> Result<()> {
        let ok = match (self, g.kind) {
            (WeightsBuf::Dw { k, fy, fx, .. }, LayerKind::Dw) => *k == g.c && *fy == g.fy && *fx == g.fx,
            (WeightsBuf::Pw { k, c, .. }, LayerKind::Pw | LayerKind::Fc) => *k == g.k && *c == g.c,
            (WeightsBuf::Conv { k, c, fy, fx, .. }, LayerKind::Conv) => {
                *k == g.k && *c == g.c && *fy == g.fy && *fx == g.fx
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!("weights do not match {} geometry {g:?}", g.kind)))
        }
    }
}

fn check_len(got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!("weights need {want} elements, got {got}")))
    }
}
