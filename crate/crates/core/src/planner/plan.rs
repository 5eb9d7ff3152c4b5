//! Serializable fusion plans and their replay.

use serde::{Deserialize, Serialize};

use super::lower::{NetContext, NodeKey, NodeSpec};
use super::optimize::{PlannerConfig, SearchStats};
use super::tiler::{tile_fused, tile_layer, TilingSolution};
use crate::error::{Error, Result};
use crate::kernels::{KernelOp, KernelVariant};
use crate::memsim::{execute_schedule, CostReport, Schedule, Step};
use crate::model::{LayerKind, Layout, MemHierarchy};
use crate::net::NetworkGraph;

pub const PLAN_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanNode {
    pub spec: NodeSpec,
    pub name: String,
    pub layers: Vec<usize>,
    /// `fused` or `unfused`.
    pub choice: String,
    /// Fused scheme name or single-layer kernel variant.
    pub kernel: String,
    pub input_layout: Layout,
    pub output_layout: Layout,
    pub skip_layout: Option<Layout>,
    pub tiling: TilingSolution,
    pub cost: CostReport,
}

impl PlanNode {
    pub(crate) fn new(ctx: &NetContext<'_>, key: &NodeKey, tiling: TilingSolution, cost: CostReport) -> Self {
        let (choice, kernel) = match key.spec {
            NodeSpec::Fused { scheme, .. } => ("fused", scheme.to_string()),
            NodeSpec::Layer { index } => {
                let kind = ctx.geometry(index).kind;
                let op = match kind {
                    LayerKind::Dw => Some(KernelOp::Dw),
                    LayerKind::Pw => Some(KernelOp::Pw),
                    _ => None,
                };
                let name = match op {
                    Some(op) => KernelVariant { op, in_layout: ctx.required_input(&key.spec, key.input_layout), out_layout: key.output_layout }.to_string(),
                    None => format!("{kind}-ref"),
                };
                ("unfused", name)
            }
        };
        PlanNode {
            spec: key.spec,
            name: ctx.node_name(&key.spec),
            layers: key.spec.layers().collect(),
            choice: choice.into(),
            kernel,
            input_layout: key.input_layout,
            output_layout: key.output_layout,
            skip_layout: key.skip_layout,
            tiling,
            cost,
        }
    }

    pub fn key(&self) -> NodeKey {
        NodeKey { spec: self.spec, input_layout: self.input_layout, output_layout: self.output_layout, skip_layout: self.skip_layout }
    }

    pub fn is_fused(&self) -> bool {
        matches!(self.spec, NodeSpec::Fused { .. })
    }
}

/// Objective values of the three seed graphs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedCosts {
    pub unfused: u64,
    pub all_dwpw: u64,
    pub all_pwdw: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionPlan {
    pub schema_version: u32,
    pub network: NetworkGraph,
    pub hierarchy: MemHierarchy,
    pub config: PlannerConfig,
    pub nodes: Vec<PlanNode>,
    pub predicted: CostReport,
    /// Every layer unfused.
    pub baseline: CostReport,
    pub seeds: SeedCosts,
    pub search: SearchStats,
}

impl FusionPlan {
    pub fn fused_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_fused()).count()
    }

    /// The lowered schedule of every node, in order.
    pub fn schedules(&self) -> Result<Vec<Schedule>> {
        let ctx = NetContext::new(&self.network, &self.hierarchy)?;
        self.nodes.iter().map(|n| ctx.lower(&n.key(), &n.tiling)).collect()
    }

    /// Bytes loaded or stored for tensor `t` (0 = network input) across
    /// every node.
    pub fn tensor_traffic(&self, t: usize) -> Result<u64> {
        let name = format!("t{t}");
        let mut bytes = 0;
        for s in self.schedules()? {
            for step in &s.steps {
                if let Step::Load { tensor, bytes: b } | Step::Store { tensor, bytes: b } = step {
                    if s.tensors[*tensor].name == name {
                        bytes += b;
                    }
                }
            }
        }
        Ok(bytes)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: FusionPlan = serde_json::from_str(text).map_err(|e| Error::Parse(format!("plan: {e}")))?;
        if p.schema_version != PLAN_SCHEMA_VERSION {
            return Err(Error::Parse(format!("plan schema version {} (expected {PLAN_SCHEMA_VERSION})", p.schema_version)));
        }
        Ok(p)
    }
}

/// Re-derives every node's tiling and cost from the plan's own network and
/// hierarchy. Any difference from the recorded values is an error.
pub fn replay(plan: &FusionPlan) -> Result<CostReport> {
    let ctx = NetContext::new(&plan.network, &plan.hierarchy)?;
    let covered: Vec<usize> = plan.nodes.iter().flat_map(|n| n.layers.clone()).collect();
    if covered != (0..plan.network.layers.len()).collect::<Vec<_>>() {
        return Err(Error::Oracle("plan nodes do not cover the network in order".into()));
    }
    let specs: Vec<NodeSpec> = plan.nodes.iter().map(|n| n.spec).collect();
    let keys = ctx.resolve_layouts(&specs);
    let mut total = CostReport::default();
    for (node, key) in plan.nodes.iter().zip(&keys) {
        if node.key() != *key {
            return Err(Error::Oracle(format!("{}: recorded layouts differ from the resolved ones", node.name)));
        }
        let tiling = match node.spec {
            NodeSpec::Layer { index } => tile_layer(ctx.geometry(index), &plan.hierarchy)?,
            NodeSpec::Fused { first, scheme } => tile_fused(&scheme, ctx.geometry(first), ctx.geometry(first + 1), &plan.hierarchy)?,
        };
        if tiling != node.tiling {
            return Err(Error::Oracle(format!("{}: tiling differs on replay", node.name)));
        }
        let cost = execute_schedule(&ctx.lower(key, &tiling)?, &plan.hierarchy)?;
        if cost != node.cost {
            return Err(Error::Oracle(format!("{}: cost differs on replay", node.name)));
        }
        total.absorb(&cost);
    }
    if total != plan.predicted {
        return Err(Error::Oracle("network total differs on replay".into()));
    }
    Ok(total)
}
