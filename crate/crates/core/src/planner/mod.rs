//! Fusion planning: per-block feasibility and fd selection, tiling, the
//! lowering of plan nodes to memory schedules and the network-level search.

mod fd;
mod feasibility;
mod lower;
mod optimize;
mod plan;
mod resident;
mod tiler;

pub use fd::{fd_extent, fd_step, select_fd, FdChoice, FdPolicy, FdRule};
pub use feasibility::{check_fusible, min_legal_fd, min_resident, Fusibility};
pub use lower::{slots, NetContext, NodeKey, NodeSpec, Slot};
pub use optimize::{optimize, optimize_bruteforce, Objective, PlannerConfig, SearchStats};
pub use plan::{replay, FusionPlan, PlanNode, SeedCosts, PLAN_SCHEMA_VERSION};
pub use resident::{fused_resident, ResidentSet, Resource};
pub use tiler::{tile_fused, tile_layer, TilingSolution};
