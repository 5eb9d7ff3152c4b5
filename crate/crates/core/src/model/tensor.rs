use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Layout {
    /// Channel-major: `(c * h + y) * w + x`.
    #[serde(rename = "CHW")]
    Chw,
    /// Channel-minor: `(y * w + x) * ch + c`.
    #[serde(rename = "HWC")]
    Hwc,
}

impl Layout {
    pub const ALL: [Layout; 2] = [Layout::Chw, Layout::Hwc];

    #[inline]
    pub fn index(self, (h, w, ch): (usize, usize, usize), y: usize, x: usize, c: usize) -> usize {
        match self {
            Layout::Chw => (c * h + y) * w + x,
            Layout::Hwc => (y * w + x) * ch + c,
        }
    }

    /// Element distance between horizontally adjacent pixels.
    pub fn x_stride(self, ch: usize) -> usize {
        match self {
            Layout::Chw => 1,
            Layout::Hwc => ch,
        }
    }

    /// Element distance between adjacent channels of one pixel.
    pub fn channel_stride(self, h: usize, w: usize) -> usize {
        match self {
            Layout::Chw => h * w,
            Layout::Hwc => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Layout::Chw => "CHW",
            Layout::Hwc => "HWC",
        }
    }

    pub fn parse(s: &str) -> Option<Layout> {
        match s.to_ascii_uppercase().as_str() {
            "CHW" => Some(Layout::Chw),
            "HWC" => Some(Layout::Hwc),
            _ => None,
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Dense int8 tensor of extents `h x w x ch` stored in `layout`.
#[derive(Clone, PartialEq, Eq)]
pub struct TensorBuf {
    h: usize,
    w: usize,
    ch: usize,
    layout: Layout,
    data: Vec<i8>,
}

impl fmt::Debug for TensorBuf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TensorBuf({}x{}x{} {}, {} B)", self.h, self.w, self.ch, self.layout, self.data.len())
    }
}

impl TensorBuf {
    pub fn zeros(h: usize, w: usize, ch: usize, layout: Layout) -> Self {
        TensorBuf { h, w, ch, layout, data: vec![0; h * w * ch] }
    }

    pub fn from_vec(h: usize, w: usize, ch: usize, layout: Layout, data: Vec<i8>) -> Result<Self> {
        if data.len() != h * w * ch {
            return Err(Error::DimensionMismatch(format!(
                "tensor {h}x{w}x{ch} needs {} elements, got {}",
                h * w * ch,
                data.len()
            )));
        }
        Ok(TensorBuf { h, w, ch, layout, data })
    }

    /// Fills the tensor from a function of the logical coordinate `(y, x, c)`.
    pub fn from_fn(h: usize, w: usize, ch: usize, layout: Layout, mut f: impl FnMut(usize, usize, usize) -> i8) -> Self {
        let mut t = Self::zeros(h, w, ch, layout);
        for y in 0..h {
            for x in 0..w {
                for c in 0..ch {
                    t.set(y, x, c, f(y, x, c));
                }
            }
        }
        t
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.h, self.w, self.ch)
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn ch(&self) -> usize {
        self.ch
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn data(&self) -> &[i8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [i8] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn offset(&self, y: usize, x: usize, c: usize) -> usize {
        debug_assert!(y < self.h && x < self.w && c < self.ch);
        self.layout.index((self.h, self.w, self.ch), y, x, c)
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> i8 {
        self.data[self.offset(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: i8) {
        let i = self.offset(y, x, c);
        self.data[i] = v;
    }

    /// Compares logical contents, ignoring the storage layout.
    pub fn same_values(&self, other: &TensorBuf) -> bool {
        if self.dims() != other.dims() {
            return false;
        }
        if self.layout == other.layout {
            return self.data == other.data;
        }
        (0..self.h).all(|y| (0..self.w).all(|x| (0..self.ch).all(|c| self.get(y, x, c) == other.get(y, x, c))))
    }

    pub fn to_layout(&self, target: Layout) -> TensorBuf {
        layout_convert(self, target)
    }

    /// Number of elements whose logical value differs from `other`.
    pub fn mismatches(&self, other: &TensorBuf) -> usize {
        if self.dims() != other.dims() {
            return self.len().max(other.len());
        }
        let mut n = 0;
        for y in 0..self.h {
            for x in 0..self.w {
                for c in 0..self.ch {
                    n += usize::from(self.get(y, x, c) != other.get(y, x, c));
                }
            }
        }
        n
    }
}

/// Re-lays a tensor out in `target` without changing any logical element.
pub fn layout_convert(t: &TensorBuf, target: Layout) -> TensorBuf {
    if t.layout == target {
        return t.clone();
    }
    let dims = t.dims();
    let mut data = vec![0i8; t.data.len()];
    for y in 0..t.h {
        for x in 0..t.w {
            for c in 0..t.ch {
                data[target.index(dims, y, x, c)] = t.data[t.layout.index(dims, y, x, c)];
            }
        }
    }
    TensorBuf { h: t.h, w: t.w, ch: t.ch, layout: target, data }
}
