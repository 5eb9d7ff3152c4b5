use serde::{Deserialize, Serialize};

use super::resident::{fused_resident, Resource, ResidentSet};
use crate::fused::{ChannelChunks, FusedOrder, FusedScheme, Tiling};
use crate::model::{LayerGeometry, MemHierarchy};

/// Outcome of the fusion-feasibility check. Infeasibility is a value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Fusibility {
    Feasible { fd: usize, resident: ResidentSet, budget: u64 },
    Infeasible { fd: usize, resident: ResidentSet, budget: u64, blocking: Resource },
    /// The pair or the requested fd violates a scheme constraint.
    Rejected { reason: String },
}

impl Fusibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Fusibility::Feasible { .. })
    }
}

/// Smallest fd the scheme admits.
pub fn min_legal_fd(scheme: &FusedScheme, b: &LayerGeometry) -> usize {
    match (scheme.order, scheme.tiling) {
        (FusedOrder::PwDw, Tiling::Rows) => b.fy,
        _ => 1,
    }
}

/// Minimal resident set of the block: smallest legal fd, one-row chunks for
/// the channel-wise scheme, full weights wherever the scheme keeps them.
pub fn min_resident(scheme: &FusedScheme, a: &LayerGeometry, b: &LayerGeometry) -> (usize, ResidentSet) {
    let fd = min_legal_fd(scheme, b);
    let s = FusedScheme { fd, ..*scheme };
    let chunks = (scheme.tiling == Tiling::Channels).then_some(ChannelChunks { rows_in: 1, rows_out: 1 });
    (fd, fused_resident(&s, a, b, chunks))
}

/// Whether the block can run fused at all under the L1 budget.
///
/// The scheme's own fd is checked against the constraints (for example
/// fd >= fy for row-wise PW-DW); the memory check then uses the minimal
/// tile configuration.
pub fn check_fusible(a: &LayerGeometry, b: &LayerGeometry, scheme: &FusedScheme, h: &MemHierarchy) -> Fusibility {
    if let Err(e) = scheme.check(a, b) {
        return Fusibility::Rejected { reason: e.to_string() };
    }
    let (fd, resident) = min_resident(scheme, a, b);
    let budget = h.l1();
    if resident.total() <= budget {
        Fusibility::Feasible { fd, resident, budget }
    } else {
        Fusibility::Infeasible { fd, resident, budget, blocking: resident.largest() }
    }
}
