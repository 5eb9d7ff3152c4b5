use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::cost::{combine, compute_cycles, reorg_cycles, shift_cycles, transfer_cycles, CostReport, WorkChunk};
use super::ledger::{Direction, LevelPair, TensorClass, TransferLedger};
use crate::error::{Error, Result};
use crate::model::MemHierarchy;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    L1,
    L2,
    L3,
}

/// A tensor living outside L1 that the schedule moves tiles of.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorDecl {
    pub name: String,
    pub bytes: u64,
    pub home: Level,
    pub class: TensorClass,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Step {
    /// Reserves an L1 buffer.
    Alloc { buf: usize, bytes: u64 },
    Free { buf: usize },
    /// Moves `bytes` of `tensor` into L1 from its home, or from L2 once staged.
    Load { tensor: usize, bytes: u64 },
    /// Moves `bytes` of `tensor` out of L1 to its home.
    Store { tensor: usize, bytes: u64 },
    /// Copies a whole L3-resident tensor to L2 so later loads come from L2.
    Stage { tensor: usize },
    Compute(WorkChunk),
    /// Like `Compute`, but the ops are elementwise and not counted as MACs.
    Elementwise(WorkChunk),
    /// In-L1 memmove of the row-wise fused buffer.
    Shift { bytes: u64 },
    /// In-L1 CHW/HWC re-layout.
    Reorg { bytes: u64 },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub name: String,
    pub tensors: Vec<TensorDecl>,
    pub steps: Vec<Step>,
}

impl Schedule {
    pub fn new(name: impl Into<String>) -> Self {
        Schedule { name: name.into(), ..Default::default() }
    }

    pub fn tensor(&mut self, name: impl Into<String>, bytes: u64, home: Level, class: TensorClass) -> usize {
        self.tensors.push(TensorDecl { name: name.into(), bytes, home, class });
        self.tensors.len() - 1
    }

    pub fn push(&mut self, s: Step) {
        self.steps.push(s);
    }
}

fn count(ledger: &mut TransferLedger, from: Level, dir: Direction, class: TensorClass, bytes: u64) {
    match from {
        Level::L1 => {}
        Level::L2 => ledger.add(LevelPair::L2L1, dir, class, bytes),
        Level::L3 => {
            ledger.add(LevelPair::L2L1, dir, class, bytes);
            ledger.add(LevelPair::L3L2, dir, class, bytes);
        }
    }
}

/// Runs a schedule against the hierarchy, counting every byte it moves.
///
/// Fails if the live L1 buffers ever exceed `l1_bytes`, if a step names an
/// undeclared tensor or buffer, or if a tensor is homed in an absent L3.
pub fn execute_schedule(schedule: &Schedule, h: &MemHierarchy) -> Result<CostReport> {
    for t in &schedule.tensors {
        if t.home == Level::L3 && !h.has_l3() {
            return Err(Error::Infeasible(format!("tensor `{}` needs L3 but the hierarchy has none", t.name)));
        }
    }
    let tensor = |id: usize| schedule.tensors.get(id).ok_or(Error::UnknownTensor(id));
    let mut ledger = TransferLedger::default();
    let mut live: BTreeMap<usize, u64> = BTreeMap::new();
    let mut staged: BTreeSet<usize> = BTreeSet::new();
    let (mut used, mut peak) = (0u64, 0u64);
    let (mut compute, mut macs) = (0u64, 0u64);
    for step in &schedule.steps {
        match *step {
            Step::Alloc { buf, bytes } => {
                if live.insert(buf, bytes).is_some() {
                    return Err(Error::UnknownBuffer(buf));
                }
                used += bytes;
                if used > h.l1() {
                    return Err(Error::L1Overflow { node: schedule.name.clone(), required: used, budget: h.l1() });
                }
                peak = peak.max(used);
            }
            Step::Free { buf } => used -= live.remove(&buf).ok_or(Error::UnknownBuffer(buf))?,
            Step::Load { tensor: id, bytes } => {
                let t = tensor(id)?;
                let from = if staged.contains(&id) { Level::L2 } else { t.home };
                count(&mut ledger, from, Direction::Load, t.class, bytes);
            }
            Step::Store { tensor: id, bytes } => {
                let t = tensor(id)?;
                count(&mut ledger, t.home, Direction::Store, t.class, bytes);
            }
            Step::Stage { tensor: id } => {
                let t = tensor(id)?;
                if t.home == Level::L3 && staged.insert(id) {
                    ledger.add(LevelPair::L3L2, Direction::Load, t.class, t.bytes);
                }
            }
            Step::Compute(ref w) => {
                compute += compute_cycles(w, h);
                macs += w.ops;
            }
            Step::Elementwise(ref w) => compute += compute_cycles(w, h),
            Step::Shift { bytes } => compute += shift_cycles(bytes, h),
            Step::Reorg { bytes } => compute += reorg_cycles(bytes, h),
        }
    }
    let transfer = transfer_cycles(&ledger, h);
    Ok(CostReport {
        macs,
        compute_cycles: compute,
        transfer_cycles: transfer,
        total_cycles: combine(compute, transfer, h),
        peak_l1_bytes: peak,
        ledger,
    })
}
