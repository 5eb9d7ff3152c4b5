use serde::{Deserialize, Serialize};

use super::ledger::{LevelPair, TransferLedger};
use crate::model::MemHierarchy;

/// Parallel work of one kernel invocation.
///
/// `units` are the independent pieces handed out to cores (channels for a
/// depthwise pass, half output rows for a pointwise pass). `ops` counts MACs
/// or elementwise operations over all units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WorkChunk {
    pub units: u64,
    pub ops: u64,
    pub strided_loads: u64,
    pub strided_stores: u64,
}

// Guards `ceil` against representation error in products like 3 * (1/3).
const EPS: f64 = 1e-9;

fn ceil_cycles(x: f64) -> u64 {
    if x <= 0.0 {
        0
    } else {
        (x - EPS).ceil().max(0.0) as u64
    }
}

/// `ceil(ceil(units / n_cores) * unit_cost) + kernel_call_cycles`.
///
/// All units are assumed to cost the same, so a round with idle cores takes
/// as long as a full one.
pub fn compute_cycles(w: &WorkChunk, h: &MemHierarchy) -> u64 {
    if w.units == 0 {
        return 0;
    }
    let m = &h.compute;
    let rounds = w.units.div_ceil(h.n_cores());
    let per_unit = (w.ops as f64 / m.macs_per_cycle_per_core
        + w.strided_loads as f64 * m.strided_load_penalty
        + w.strided_stores as f64 * m.strided_store_penalty)
        / w.units as f64;
    ceil_cycles(rounds as f64 * per_unit) + ceil_cycles(m.kernel_call_cycles)
}

pub fn shift_cycles(bytes: u64, h: &MemHierarchy) -> u64 {
    ceil_cycles(bytes as f64 * h.compute.shift_cycles_per_byte / h.n_cores() as f64)
}

pub fn reorg_cycles(bytes: u64, h: &MemHierarchy) -> u64 {
    ceil_cycles(bytes as f64 * h.compute.reorg_cycles_per_byte / h.n_cores() as f64)
}

/// Sum over level pairs of bytes moved times the per-byte cost of the pair.
pub fn transfer_cycles(ledger: &TransferLedger, h: &MemHierarchy) -> u64 {
    let t = &h.transfer;
    ceil_cycles(
        ledger.pair_total(LevelPair::L2L1) as f64 * t.l2_l1_cycles_per_byte
            + ledger.pair_total(LevelPair::L3L2) as f64 * t.l3_l2_cycles_per_byte,
    )
}

/// Modeled cost of a schedule, a node or a whole network.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub macs: u64,
    pub compute_cycles: u64,
    pub transfer_cycles: u64,
    pub total_cycles: u64,
    pub peak_l1_bytes: u64,
    pub ledger: TransferLedger,
}

impl CostReport {
    /// Activation memory transfers: activation plus intermediate bytes over
    /// every level pair. Weights are excluded.
    pub fn amt(&self) -> u64 {
        self.ledger.amt()
    }

    /// Accumulates a report that ran after `self`. Cycles add, peak L1 is
    /// the maximum.
    pub fn absorb(&mut self, o: &CostReport) {
        self.macs += o.macs;
        self.compute_cycles += o.compute_cycles;
        self.transfer_cycles += o.transfer_cycles;
        self.total_cycles += o.total_cycles;
        self.peak_l1_bytes = self.peak_l1_bytes.max(o.peak_l1_bytes);
        self.ledger.merge(&o.ledger);
    }
}

/// `compute + transfer - floor(overlap * min(compute, transfer))`.
pub(crate) fn combine(compute: u64, transfer: u64, h: &MemHierarchy) -> u64 {
    let hidden = (h.overlap * compute.min(transfer) as f64).floor() as u64;
    compute + transfer - hidden.min(compute.min(transfer))
}
