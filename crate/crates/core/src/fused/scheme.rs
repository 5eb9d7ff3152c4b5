use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LayerGeometry, LayerKind, Layout};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FusedOrder {
    #[serde(rename = "DWPW")]
    DwPw,
    #[serde(rename = "PWDW")]
    PwDw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tiling {
    Rows,
    Channels,
}

/// Layouts of the block input, the intermediate buffer and the block output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LayoutTriple {
    pub input: Layout,
    pub mid: Layout,
    pub output: Layout,
}

impl LayoutTriple {
    pub fn new(input: Layout, mid: Layout, output: Layout) -> Self {
        LayoutTriple { input, mid, output }
    }

    /// The four triples with equal input and output layouts.
    pub fn all() -> Vec<LayoutTriple> {
        let mut v = Vec::with_capacity(4);
        for io in Layout::ALL {
            for mid in Layout::ALL {
                v.push(LayoutTriple::new(io, mid, io));
            }
        }
        v
    }
}

impl fmt::Display for LayoutTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.input, self.mid, self.output)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FusedScheme {
    pub order: FusedOrder,
    pub tiling: Tiling,
    pub layouts: LayoutTriple,
    /// Rows per tile for row schemes, channels per tile for the channel one.
    pub fd: usize,
}

impl FusedScheme {
    pub fn new(order: FusedOrder, tiling: Tiling, layouts: LayoutTriple, fd: usize) -> Result<Self> {
        if order == FusedOrder::DwPw && tiling == Tiling::Channels {
            return Err(Error::Scheme("DW-PW fusion needs every intermediate channel of a pixel; it tiles rows only".into()));
        }
        if layouts.input != layouts.output {
            return Err(Error::Scheme(format!("fused input and output layouts must match, got {layouts}")));
        }
        if fd == 0 {
            return Err(Error::Scheme("fd must be at least 1".into()));
        }
        Ok(FusedScheme { order, tiling, layouts, fd })
    }

    pub fn dwpw_rows(layouts: LayoutTriple, fd: usize) -> Result<Self> {
        Self::new(FusedOrder::DwPw, Tiling::Rows, layouts, fd)
    }

    pub fn pwdw_channels(layouts: LayoutTriple, fd: usize) -> Result<Self> {
        Self::new(FusedOrder::PwDw, Tiling::Channels, layouts, fd)
    }

    pub fn pwdw_rows(layouts: LayoutTriple, fd: usize) -> Result<Self> {
        Self::new(FusedOrder::PwDw, Tiling::Rows, layouts, fd)
    }

    pub fn with_fd(mut self, fd: usize) -> Result<Self> {
        if fd == 0 {
            return Err(Error::Scheme("fd must be at least 1".into()));
        }
        self.fd = fd;
        Ok(self)
    }

    /// Every constructible (scheme, layout triple) pair: 3 schemes x 4.
    pub fn all_kernels(fd: usize) -> Vec<FusedScheme> {
        let mut v = Vec::new();
        for (o, t) in [(FusedOrder::DwPw, Tiling::Rows), (FusedOrder::PwDw, Tiling::Channels), (FusedOrder::PwDw, Tiling::Rows)] {
            for l in LayoutTriple::all() {
                v.push(FusedScheme { order: o, tiling: t, layouts: l, fd });
            }
        }
        v
    }

    /// The six retained kernels: those that do not feed the PW from a CHW
    /// tensor while the DW also writes CHW.
    pub fn presets(fd: usize) -> Vec<FusedScheme> {
        Self::all_kernels(fd)
            .into_iter()
            .filter(|s| {
                let (pw_in, dw_out) = match s.order {
                    FusedOrder::DwPw => (s.layouts.mid, s.layouts.mid),
                    FusedOrder::PwDw => (s.layouts.input, s.layouts.output),
                };
                !(pw_in == Layout::Chw && dw_out == Layout::Chw)
            })
            .collect()
    }

    /// Channel-tiled PW-DW, HWC/CHW/HWC, fd 8.
    pub fn default_pwdw() -> Self {
        FusedScheme { order: FusedOrder::PwDw, tiling: Tiling::Channels, layouts: LayoutTriple::new(Layout::Hwc, Layout::Chw, Layout::Hwc), fd: 8 }
    }

    /// Row-tiled DW-PW, CHW/HWC/CHW, fd 4.
    pub fn default_dwpw() -> Self {
        FusedScheme { order: FusedOrder::DwPw, tiling: Tiling::Rows, layouts: LayoutTriple::new(Layout::Chw, Layout::Hwc, Layout::Chw), fd: 4 }
    }

    pub fn name(&self) -> &'static str {
        match (self.order, self.tiling) {
            (FusedOrder::DwPw, Tiling::Rows) => "DWPW-Rows",
            (FusedOrder::DwPw, Tiling::Channels) => "DWPW-Channels",
            (FusedOrder::PwDw, Tiling::Channels) => "PWDW-Channels",
            (FusedOrder::PwDw, Tiling::Rows) => "PWDW-Rows",
        }
    }

    /// Kinds of the first and second layer.
    pub fn kinds(&self) -> (LayerKind, LayerKind) {
        match self.order {
            FusedOrder::DwPw => (LayerKind::Dw, LayerKind::Pw),
            FusedOrder::PwDw => (LayerKind::Pw, LayerKind::Dw),
        }
    }

    /// Checks that the pair matches the scheme's order, chains, keeps the
    /// PW at stride 1 and admits the scheme's fd.
    pub fn check(&self, a: &LayerGeometry, b: &LayerGeometry) -> Result<()> {
        let (ka, kb) = self.kinds();
        if a.kind != ka || b.kind != kb {
            return Err(Error::Scheme(format!("{} needs a {ka}-{kb} pair, got {}-{}", self.name(), a.kind, b.kind)));
        }
        a.validate()?;
        b.validate()?;
        if !a.chains_into(b) {
            return Err(Error::Chain { index: 1, reason: format!("output {:?} does not feed input {:?}", a.output_dims(), b.input_dims()) });
        }
        let pw = if ka == LayerKind::Pw { a } else { b };
        if pw.s != 1 {
            return Err(Error::Scheme(format!("{} needs a stride-1 PW, got stride {}", self.name(), pw.s)));
        }
        match (self.order, self.tiling) {
            (FusedOrder::DwPw, Tiling::Rows) if self.fd > a.oy => {
                Err(Error::Scheme(format!("fd {} exceeds the {} DW output rows", self.fd, a.oy)))
            }
            (FusedOrder::PwDw, Tiling::Channels) if self.fd > a.k => {
                Err(Error::Scheme(format!("fd {} exceeds the {} PW output channels", self.fd, a.k)))
            }
            (FusedOrder::PwDw, Tiling::Rows) if self.fd < b.fy => {
                Err(Error::Scheme(format!("fd {} is below the DW filter height {}", self.fd, b.fy)))
            }
            (FusedOrder::DwPw, Tiling::Channels) => Err(Error::Scheme("DW-PW fusion tiles rows only".into())),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for FusedScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} fd={}", self.name(), self.layouts, self.fd)
    }
}

/// Intermediate buffer bytes: C*OX*FD, FD*IX*IY or C*IX*FD.
pub fn buffer_bytes(scheme: &FusedScheme, a: &LayerGeometry, b: &LayerGeometry) -> u64 {
    let fd = scheme.fd as u64;
    match (scheme.order, scheme.tiling) {
        (FusedOrder::DwPw, _) => a.k as u64 * a.ox as u64 * fd,
        (FusedOrder::PwDw, Tiling::Channels) => fd * b.ix as u64 * b.iy as u64,
        (FusedOrder::PwDw, Tiling::Rows) => b.c as u64 * b.ix as u64 * fd,
    }
}
