//! Network-level fusion search.
//!
//! Every DW layer is a slot with up to two candidates: fusing it with the
//! PW after it (side A, DW-PW) or the PW before it (side B, PW-DW). Three
//! seed graphs are costed first: nothing fused, every side-A candidate fused
//! and every side-B candidate fused. Each candidate is then kept only if its
//! fused node beats its two unfused layers, giving one partial graph per
//! side. Finally all `2^M` per-slot choices between the two partial graphs
//! are costed and the cheapest non-overlapping one wins.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::fd::{select_fd, FdPolicy};
use super::feasibility::{check_fusible, Fusibility};
use super::lower::{slots, NetContext, NodeKey, NodeSpec};
use super::plan::{FusionPlan, PlanNode, SeedCosts, PLAN_SCHEMA_VERSION};
use super::tiler::{tile_fused, tile_layer, TilingSolution};
use crate::error::{Error, Result};
use crate::fused::{FusedScheme, LayoutTriple, Tiling};
use crate::memsim::{execute_schedule, CostReport};
use crate::model::MemHierarchy;
use crate::net::NetworkGraph;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Total cycles.
    #[default]
    Latency,
    /// Activation and intermediate bytes moved.
    Transfers,
}

impl Objective {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "latency" => Ok(Objective::Latency),
            "transfers" => Ok(Objective::Transfers),
            _ => Err(Error::Parse(format!("unknown objective `{s}` (latency, transfers)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Objective::Latency => "latency",
            Objective::Transfers => "transfers",
        }
    }

    pub fn value(self, r: &CostReport) -> u64 {
        match self {
            Objective::Latency => r.total_cycles,
            Objective::Transfers => r.amt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub objective: Objective,
    pub fd_policy: FdPolicy,
    /// Tiling of PW-DW blocks.
    pub pwdw_tiling: Tiling,
    pub dwpw_layouts: LayoutTriple,
    pub pwdw_layouts: LayoutTriple,
    /// Largest slot count the `2^M` search accepts.
    pub max_blocks: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            objective: Objective::Latency,
            fd_policy: FdPolicy::default(),
            pwdw_tiling: Tiling::Channels,
            dwpw_layouts: FusedScheme::default_dwpw().layouts,
            pwdw_layouts: FusedScheme::default_pwdw().layouts,
            max_blocks: 24,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    /// Slots (DW layers) in the network.
    pub blocks: usize,
    /// Feasible side-A and side-B candidates.
    pub candidates_a: usize,
    pub candidates_b: usize,
    /// Candidates kept in the partial graphs.
    pub partial_a: usize,
    pub partial_b: usize,
    pub combinations: u64,
    /// Combinations fusing one PW into two blocks.
    pub rejected: u64,
    /// Distinct graphs costed.
    pub evaluated: u64,
    /// Distinct node costings; the rest were memo hits.
    pub node_costings: u64,
    pub memo_hits: u64,
}

/// A fusion decision: fused blocks by DW slot, `None` = unfused.
type Choice = Vec<Option<NodeSpec>>;

struct Search<'a> {
    ctx: NetContext<'a>,
    memo: bool,
    tilings: HashMap<NodeSpec, TilingSolution>,
    costs: HashMap<NodeKey, CostReport>,
    stats: SearchStats,
}

impl<'a> Search<'a> {
    fn tiling(&mut self, spec: &NodeSpec) -> Result<TilingSolution> {
        if self.memo {
            if let Some(t) = self.tilings.get(spec) {
                return Ok(t.clone());
            }
        }
        let t = match *spec {
            NodeSpec::Layer { index } => tile_layer(self.ctx.geometry(index), self.ctx.h)?,
            NodeSpec::Fused { first, scheme } => tile_fused(&scheme, self.ctx.geometry(first), self.ctx.geometry(first + 1), self.ctx.h)?,
        };
        if self.memo {
            self.tilings.insert(*spec, t.clone());
        }
        Ok(t)
    }

    fn node_cost(&mut self, key: &NodeKey) -> Result<CostReport> {
        if self.memo {
            if let Some(c) = self.costs.get(key) {
                self.stats.memo_hits += 1;
                return Ok(c.clone());
            }
        }
        let t = self.tiling(&key.spec)?;
        let c = execute_schedule(&self.ctx.lower(key, &t)?, self.ctx.h)?;
        self.stats.node_costings += 1;
        if self.memo {
            self.costs.insert(*key, c.clone());
        }
        Ok(c)
    }

    /// Per-node costs of a node sequence and their sum.
    fn evaluate(&mut self, nodes: &[NodeSpec]) -> Result<(Vec<NodeKey>, Vec<CostReport>, CostReport)> {
        let keys = self.ctx.resolve_layouts(nodes);
        let mut per = Vec::with_capacity(keys.len());
        let mut total = CostReport::default();
        for k in &keys {
            let c = self.node_cost(k)?;
            total.absorb(&c);
            per.push(c);
        }
        Ok((keys, per, total))
    }
}

fn nodes_for(n_layers: usize, choice: &Choice) -> Vec<NodeSpec> {
    let mut fused: HashMap<usize, NodeSpec> = HashMap::new();
    for spec in choice.iter().flatten() {
        fused.insert(spec.first(), *spec);
    }
    let mut nodes = Vec::new();
    let mut i = 0;
    while i < n_layers {
        match fused.get(&i) {
            Some(spec) => {
                nodes.push(*spec);
                i += 2;
            }
            None => {
                nodes.push(NodeSpec::Layer { index: i });
                i += 1;
            }
        }
    }
    nodes
}

fn overlapping(choice: &Choice) -> bool {
    let mut used = HashSet::new();
    choice.iter().flatten().any(|s| !s.layers().all(|l| used.insert(l)))
}

/// A fusion candidate: the block's scheme at its selected fd, if the block
/// is fusible and tiles.
fn candidate(cfg: &PlannerConfig, g: &NetworkGraph, h: &MemHierarchy, first: usize, dwpw: bool) -> Option<NodeSpec> {
    let (a, b) = (&g.layers[first].geometry, &g.layers[first + 1].geometry);
    let base = if dwpw {
        FusedScheme::dwpw_rows(cfg.dwpw_layouts, 1)
    } else {
        match cfg.pwdw_tiling {
            Tiling::Channels => FusedScheme::pwdw_channels(cfg.pwdw_layouts, 1),
            Tiling::Rows => FusedScheme::pwdw_rows(cfg.pwdw_layouts, b.fy),
        }
    }
    .ok()?;
    let fd = select_fd(&base, a, b, h, cfg.fd_policy).ok()?.fd;
    let scheme = base.with_fd(fd).ok()?;
    if !matches!(check_fusible(a, b, &scheme, h), Fusibility::Feasible { .. }) {
        return None;
    }
    tile_fused(&scheme, a, b, h).ok()?;
    Some(NodeSpec::Fused { first, scheme })
}

/// Plans a network. With `memo == false` every node of every graph is
/// lowered and executed afresh.
fn run(graph: &NetworkGraph, h: &MemHierarchy, cfg: &PlannerConfig, memo: bool) -> Result<FusionPlan> {
    let ctx = NetContext::new(graph, h)?;
    let n = graph.layers.len();
    let slot_list = slots(graph);
    let m = slot_list.len();
    if m > cfg.max_blocks {
        return Err(Error::SearchTooLarge { blocks: m, cap: cfg.max_blocks });
    }
    let side_a: Choice = slot_list.iter().map(|s| if s.a { candidate(cfg, graph, h, s.dw, true) } else { None }).collect();
    let side_b: Choice = slot_list.iter().map(|s| if s.b { candidate(cfg, graph, h, s.dw - 1, false) } else { None }).collect();
    let mut search = Search { ctx, memo, tilings: HashMap::new(), costs: HashMap::new(), stats: SearchStats::default() };
    search.stats.blocks = m;
    search.stats.candidates_a = side_a.iter().flatten().count();
    search.stats.candidates_b = side_b.iter().flatten().count();
    let obj = cfg.objective;

    let none: Choice = vec![None; m];
    let (_, base_per, baseline) = search.evaluate(&nodes_for(n, &none))?;
    let (a_keys, a_per, a_total) = search.evaluate(&nodes_for(n, &side_a))?;
    let (b_keys, b_per, b_total) = search.evaluate(&nodes_for(n, &side_b))?;

    // Keeps a candidate iff its node, costed in its seed graph, beats the
    // sum of its layers in the unfused graph.
    let base_nodes = nodes_for(n, &none);
    let unfused_pair = |first: usize| -> u64 {
        base_nodes
            .iter()
            .zip(&base_per)
            .filter(|(s, _)| s.first() == first || s.first() == first + 1)
            .map(|(_, c)| obj.value(c))
            .sum()
    };
    let partial = |side: &Choice, keys: &[NodeKey], per: &[CostReport]| -> Choice {
        side.iter()
            .map(|c| {
                let spec = (*c)?;
                let i = keys.iter().position(|k| k.spec == spec)?;
                (obj.value(&per[i]) < unfused_pair(spec.first())).then_some(spec)
            })
            .collect()
    };
    let part_a = partial(&side_a, &a_keys, &a_per);
    let part_b = partial(&side_b, &b_keys, &b_per);
    search.stats.partial_a = part_a.iter().flatten().count();
    search.stats.partial_b = part_b.iter().flatten().count();

    // (objective, fused count, order) of the best graph so far.
    type Rank = (u64, usize, u64);
    let rank = |r: &CostReport, c: &Choice, order: u64| -> Rank { (obj.value(r), c.iter().flatten().count(), order) };
    let mut best: (Rank, Choice) = (rank(&baseline, &none, 0), none.clone());
    let mut offer = |r: Rank, c: &Choice| {
        if r < best.0 {
            best = (r, c.clone());
        }
    };
    let total_masks = 1u64 << m;
    offer(rank(&a_total, &side_a, total_masks + 1), &side_a);
    offer(rank(&b_total, &side_b, total_masks + 2), &side_b);

    let mut seen: HashSet<Choice> = HashSet::new();
    search.stats.combinations = total_masks;
    for mask in 0..total_masks {
        let choice: Choice = (0..m).map(|j| if mask >> j & 1 == 0 { part_a[j] } else { part_b[j] }).collect();
        if overlapping(&choice) {
            search.stats.rejected += 1;
            continue;
        }
        let r = if memo {
            if !seen.insert(choice.clone()) {
                continue;
            }
            search.evaluate(&nodes_for(n, &choice))?.2
        } else {
            search.evaluate(&nodes_for(n, &choice))?.2
        };
        search.stats.evaluated += 1;
        offer(rank(&r, &choice, 1 + mask), &choice);
    }

    let chosen = best.1;
    let nodes = nodes_for(n, &chosen);
    let (keys, per, predicted) = search.evaluate(&nodes)?;
    let mut plan_nodes = Vec::with_capacity(keys.len());
    for (k, c) in keys.iter().zip(per) {
        let tiling = search.tiling(&k.spec)?;
        plan_nodes.push(PlanNode::new(&search.ctx, k, tiling, c));
    }
    Ok(FusionPlan {
        schema_version: PLAN_SCHEMA_VERSION,
        network: graph.clone(),
        hierarchy: h.clone(),
        config: cfg.clone(),
        nodes: plan_nodes,
        predicted,
        baseline: baseline.clone(),
        seeds: SeedCosts { unfused: obj.value(&baseline), all_dwpw: obj.value(&a_total), all_pwdw: obj.value(&b_total) },
        search: search.stats,
    })
}

/// Plans a network: the fusion choice minimizing the objective, ties
/// broken toward fewer fused blocks, then toward the earlier graph in
/// search order.
pub fn optimize(graph: &NetworkGraph, h: &MemHierarchy, cfg: &PlannerConfig) -> Result<FusionPlan> {
    run(graph, h, cfg, true)
}

/// The same search with no memoization: every combination is lowered and
/// executed in full. Limited to 10 slots.
pub fn optimize_bruteforce(graph: &NetworkGraph, h: &MemHierarchy, cfg: &PlannerConfig) -> Result<FusionPlan> {
    let m = slots(graph).len();
    if m > 10 {
        return Err(Error::SearchTooLarge { blocks: m, cap: 10 });
    }
    run(graph, h, cfg, false)
}
