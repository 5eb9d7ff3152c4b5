//! Scratchpad hierarchy simulation: byte-exact transfer ledger, explicit
//! tiled schedules and the cycle cost model.

mod cost;
mod ledger;
mod schedule;

pub use cost::{compute_cycles, shift_cycles, reorg_cycles, transfer_cycles, CostReport, WorkChunk};
pub use ledger::{ClassBytes, DirBytes, Direction, LevelPair, TensorClass, TransferLedger};
pub use schedule::{execute_schedule, Level, Schedule, Step, TensorDecl};
