use serde::{Deserialize, Serialize};

use super::feasibility::min_legal_fd;
use super::resident::fused_resident;
use crate::error::{Error, Result};
use crate::fused::{ChannelChunks, FusedOrder, FusedScheme, Tiling};
use crate::model::{LayerGeometry, MemHierarchy};

/// Which fitting multiple of the scheme's step to take.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdPolicy {
    /// Smallest multiple that fits: the first fd at full core utilization.
    #[default]
    MinFullUtilization,
    /// Largest multiple that fits.
    LargestFitting,
}

impl FdPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "min-full-utilization" => Some(FdPolicy::MinFullUtilization),
            "largest-fitting" => Some(FdPolicy::LargestFitting),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdRule {
    /// A multiple of the scheme's step.
    Multiple,
    /// The whole extent, shorter than one step.
    FullExtent,
    /// No multiple fits; the smallest legal fd.
    SmallestLegal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FdChoice {
    pub fd: usize,
    pub rule: FdRule,
}

/// Multiplicity step: n/2 rows for DW-PW, n channels for channel-wise
/// PW-DW, n/2 + fy - 1 rows for row-wise PW-DW.
pub fn fd_step(scheme: &FusedScheme, b: &LayerGeometry, n_cores: usize) -> usize {
    match (scheme.order, scheme.tiling) {
        (FusedOrder::DwPw, _) => n_cores / 2,
        (FusedOrder::PwDw, Tiling::Channels) => n_cores,
        (FusedOrder::PwDw, Tiling::Rows) => n_cores / 2 + b.fy - 1,
    }
}

/// Largest meaningful fd: DW output rows, PW output channels, or padded
/// DW input rows.
pub fn fd_extent(scheme: &FusedScheme, a: &LayerGeometry, b: &LayerGeometry) -> usize {
    match (scheme.order, scheme.tiling) {
        (FusedOrder::DwPw, _) => a.oy,
        (FusedOrder::PwDw, Tiling::Channels) => a.k,
        (FusedOrder::PwDw, Tiling::Rows) => b.iy + 2 * b.p,
    }
}

fn fits(scheme: &FusedScheme, fd: usize, a: &LayerGeometry, b: &LayerGeometry, h: &MemHierarchy) -> bool {
    let s = FusedScheme { fd, ..*scheme };
    let chunks = (scheme.tiling == Tiling::Channels).then_some(ChannelChunks { rows_in: 1, rows_out: 1 });
    fused_resident(&s, a, b, chunks).total() <= h.l1()
}

/// Picks fd for a feasible block. Falls back to the whole extent when it is
/// shorter than one step, then to the smallest legal fd when no multiple fits.
pub fn select_fd(scheme: &FusedScheme, a: &LayerGeometry, b: &LayerGeometry, h: &MemHierarchy, policy: FdPolicy) -> Result<FdChoice> {
    scheme.with_fd(min_legal_fd(scheme, b))?.check(a, b)?;
    let step = fd_step(scheme, b, h.n_cores() as usize);
    let extent = fd_extent(scheme, a, b);
    let lattice = (1..).map(|m| m * step).take_while(|&fd| fd <= extent);
    let mut fitting = lattice.filter(|&fd| fits(scheme, fd, a, b, h));
    let pick = match policy {
        FdPolicy::MinFullUtilization => fitting.next(),
        FdPolicy::LargestFitting => fitting.last(),
    };
    if let Some(fd) = pick {
        return Ok(FdChoice { fd, rule: FdRule::Multiple });
    }
    let smallest = min_legal_fd(scheme, b);
    if extent < step && extent >= smallest && fits(scheme, extent, a, b, h) {
        return Ok(FdChoice { fd: extent, rule: FdRule::FullExtent });
    }
    if fits(scheme, smallest, a, b, h) {
        return Ok(FdChoice { fd: smallest, rule: FdRule::SmallestLegal });
    }
    Err(Error::Infeasible(format!("{} block does not fit L1 ({} B) even at fd {smallest}", scheme.name(), h.l1())))
}
