//! Network context (tensor homes and classes) and the lowering of plan
//! nodes to explicit schedules.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::tiler::TilingSolution;
use crate::error::{Error, Result};
use crate::fused::{chunks, dw_chunk, dwpw_row_tiles, expected_trace, pw_chunk, pwdw_channel_tiles, pwdw_rows_plan, FusedOrder, FusedScheme, TraceItem, Tiling};
use crate::memsim::{execute_schedule, CostReport, Level, Schedule, Step, TensorClass, WorkChunk};
use crate::model::{LayerGeometry, LayerKind, Layout, MemHierarchy};
use crate::net::NetworkGraph;

/// One executable unit of a plan: a single layer or a fused pair starting
/// at `first`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum NodeSpec {
    Layer { index: usize },
    Fused { first: usize, scheme: FusedScheme },
}

impl NodeSpec {
    pub fn first(&self) -> usize {
        match *self {
            NodeSpec::Layer { index } => index,
            NodeSpec::Fused { first, .. } => first,
        }
    }

    pub fn last(&self) -> usize {
        match *self {
            NodeSpec::Layer { index } => index,
            NodeSpec::Fused { first, .. } => first + 1,
        }
    }

    pub fn layers(&self) -> Range<usize> {
        self.first()..self.last() + 1
    }

    pub fn scheme(&self) -> Option<FusedScheme> {
        match *self {
            NodeSpec::Fused { scheme, .. } => Some(scheme),
            NodeSpec::Layer { .. } => None,
        }
    }
}

/// A node together with the layouts it sees: the layout its input (and
/// skip) tensor was produced in and the layout it writes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeKey {
    pub spec: NodeSpec,
    pub input_layout: Layout,
    pub output_layout: Layout,
    pub skip_layout: Option<Layout>,
}

/// Per-network facts the lowering needs: where each tensor lives and which
/// class its traffic is booked under.
#[derive(Clone, Debug)]
pub struct NetContext<'a> {
    pub graph: &'a NetworkGraph,
    pub h: &'a MemHierarchy,
    pub weights_home: Level,
    /// Home of tensor `t` (0 = network input).
    pub homes: Vec<Level>,
    pub classes: Vec<TensorClass>,
}

/// Structural fusion candidate of a DW layer: `a` is the DW-PW pair
/// starting at the DW, `b` the PW-DW pair ending at it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub dw: usize,
    pub a: bool,
    pub b: bool,
}

/// Fusion slots, one per DW layer. A pair is a candidate when its partner
/// is a stride-1 PW and the tensor between them is not read by a residual add.
pub fn slots(g: &NetworkGraph) -> Vec<Slot> {
    let kind = |i: usize| g.layers.get(i).map(|l| l.geometry.kind);
    let pw1 = |i: usize| kind(i) == Some(LayerKind::Pw) && g.layers[i].geometry.s == 1;
    g.layers
        .iter()
        .enumerate()
        .filter(|(_, l)| l.geometry.kind == LayerKind::Dw)
        .map(|(d, _)| Slot {
            dw: d,
            a: pw1(d + 1) && !g.is_skip_source(d + 1),
            b: d >= 1 && pw1(d - 1) && !g.is_skip_source(d),
        })
        .collect()
}

impl<'a> NetContext<'a> {
    /// Weights live in L2 when they take at most half of it, else in L3
    /// with per-node staging. An activation tensor lives in L2 when its
    /// producer's and every consumer's working set fit next to the L2-homed
    /// weights, else in L3.
    pub fn new(graph: &'a NetworkGraph, h: &'a MemHierarchy) -> Result<Self> {
        graph.validate()?;
        h.validate()?;
        let total_w = graph.weight_bytes();
        let weights_home = if total_w <= h.l2() / 2 { Level::L2 } else { Level::L3 };
        let cap = if weights_home == Level::L2 { h.l2() - total_w } else { h.l2() };
        let working_set = |i: usize| {
            let l = &graph.layers[i];
            let skip = l.skip_from.map_or(0, |j| graph.tensor_bytes(j + 1));
            let staged = if weights_home == Level::L3 { l.geometry.weight_bytes() } else { 0 };
            graph.tensor_bytes(i) + graph.tensor_bytes(i + 1) + skip + staged
        };
        let n = graph.layers.len();
        let homes = (0..=n)
            .map(|t| {
                let mut users = graph.consumers(t);
                if t > 0 {
                    users.push(t - 1);
                }
                if users.iter().all(|&i| working_set(i) <= cap) {
                    Level::L2
                } else {
                    Level::L3
                }
            })
            .collect();
        let mut classes = vec![TensorClass::Activation; n + 1];
        for s in slots(graph) {
            if s.a {
                classes[s.dw + 1] = TensorClass::Intermediate;
            }
            if s.b {
                classes[s.dw] = TensorClass::Intermediate;
            }
        }
        Ok(NetContext { graph, h, weights_home, homes, classes })
    }

    pub fn geometry(&self, i: usize) -> &LayerGeometry {
        &self.graph.layers[i].geometry
    }

    fn declare(&self, s: &mut Schedule, t: usize) -> usize {
        s.tensor(format!("t{t}"), self.graph.tensor_bytes(t), self.homes[t], self.classes[t])
    }

    fn declare_weights(&self, s: &mut Schedule, i: usize) -> usize {
        let w = s.tensor(format!("w{i}"), self.geometry(i).weight_bytes(), self.weights_home, TensorClass::Weight);
        if self.weights_home == Level::L3 {
            s.push(Step::Stage { tensor: w });
        }
        w
    }

    /// Layout a node reads its main input in.
    pub fn required_input(&self, spec: &NodeSpec, have: Layout) -> Layout {
        match spec {
            NodeSpec::Fused { scheme, .. } => scheme.layouts.input,
            NodeSpec::Layer { index } => match self.geometry(*index).kind {
                LayerKind::Dw | LayerKind::Pw => have,
                _ => Layout::Hwc,
            },
        }
    }

    /// Layout a producer should write for this consumer.
    pub fn preferred_input(&self, spec: &NodeSpec) -> Layout {
        match spec {
            NodeSpec::Fused { scheme, .. } => scheme.layouts.input,
            NodeSpec::Layer { index } => match self.geometry(*index).kind {
                LayerKind::Dw => Layout::Chw,
                _ => Layout::Hwc,
            },
        }
    }

    /// Assigns layouts along a node sequence. Fixed-layout nodes (fused,
    /// conv, add, pool, fc) write their own layout; unfused DW and PW write
    /// what the next node prefers.
    pub fn resolve_layouts(&self, nodes: &[NodeSpec]) -> Vec<NodeKey> {
        let mut produced = vec![Layout::Hwc; self.graph.layers.len() + 1];
        let mut keys = Vec::with_capacity(nodes.len());
        for (n, spec) in nodes.iter().enumerate() {
            let input_layout = produced[spec.first()];
            let output_layout = match spec {
                NodeSpec::Fused { scheme, .. } => scheme.layouts.output,
                NodeSpec::Layer { index } => match self.geometry(*index).kind {
                    LayerKind::Dw | LayerKind::Pw => nodes.get(n + 1).map_or(Layout::Hwc, |next| self.preferred_input(next)),
                    _ => Layout::Hwc,
                },
            };
            let skip_layout = match spec {
                NodeSpec::Layer { index } => self.graph.layers[*index].skip_from.map(|j| produced[j + 1]),
                NodeSpec::Fused { .. } => None,
            };
            produced[spec.last() + 1] = output_layout;
            keys.push(NodeKey { spec: *spec, input_layout, output_layout, skip_layout });
        }
        keys
    }

    pub fn node_name(&self, spec: &NodeSpec) -> String {
        match spec {
            NodeSpec::Layer { index } => self.graph.layers[*index].name.clone(),
            NodeSpec::Fused { first, scheme } => {
                format!("{}+{} [{}]", self.graph.layers[*first].name, self.graph.layers[first + 1].name, scheme.name())
            }
        }
    }

    /// Lowers a node to a schedule under a given tiling.
    pub fn lower(&self, key: &NodeKey, tiling: &TilingSolution) -> Result<Schedule> {
        let mut s = Schedule::new(self.node_name(&key.spec));
        let t_in = key.spec.first();
        let req = self.required_input(&key.spec, key.input_layout);
        if req != key.input_layout {
            s.push(Step::Reorg { bytes: self.graph.tensor_bytes(t_in) });
        }
        match key.spec {
            NodeSpec::Layer { index } => self.lower_layer(&mut s, index, key, req, tiling)?,
            NodeSpec::Fused { first, scheme } => self.lower_fused(&mut s, first, &scheme, tiling)?,
        }
        Ok(s)
    }

    pub fn cost(&self, key: &NodeKey, tiling: &TilingSolution) -> Result<CostReport> {
        execute_schedule(&self.lower(key, tiling)?, self.h)
    }

    fn lower_layer(&self, s: &mut Schedule, i: usize, key: &NodeKey, in_layout: Layout, t: &TilingSolution) -> Result<()> {
        let g = *self.geometry(i);
        let tin = self.declare(s, i);
        let tout = self.declare(s, i + 1);
        let w = (g.weight_bytes() > 0).then(|| self.declare_weights(s, i));
        let tskip = match self.graph.layers[i].skip_from {
            Some(j) => {
                if key.skip_layout != Some(Layout::Hwc) {
                    s.push(Step::Reorg { bytes: self.graph.tensor_bytes(j + 1) });
                }
                Some(self.declare(s, j + 1))
            }
            None => None,
        };
        let r = t.resident;
        let bufs = [r.input, r.skip, r.weights, r.output];
        for (b, &bytes) in bufs.iter().enumerate() {
            s.push(Step::Alloc { buf: b, bytes });
        }
        let out_l = key.output_layout;
        let row_tiles = chunks(g.oy, t.tile_rows);
        let single_row_tile = row_tiles.len() == 1;
        let mut input_loaded = false;
        for kr in chunks(g.k, t.tile_channels) {
            let nk = kr.len();
            if let Some(w) = w {
                let per_k = if g.kind == LayerKind::Dw { g.fy * g.fx } else { g.c * g.fy * g.fx };
                s.push(Step::Load { tensor: w, bytes: (nk * per_k) as u64 });
            }
            for rr in &row_tiles {
                let n = rr.len();
                let rows_in = rows_needed(&g, rr.clone());
                match g.kind {
                    LayerKind::Dw => {
                        s.push(Step::Load { tensor: tin, bytes: (rows_in * g.ix * nk) as u64 });
                        let (wc, _) = dw_chunk(&g, rr.clone(), nk, (in_layout, nk), (out_l, nk));
                        s.push(Step::Compute(wc));
                    }
                    LayerKind::Pw | LayerKind::Conv | LayerKind::Fc => {
                        if !(single_row_tile && input_loaded) {
                            s.push(Step::Load { tensor: tin, bytes: (rows_in * g.ix * g.c) as u64 });
                            input_loaded = true;
                        }
                        let wc = if g.kind == LayerKind::Pw {
                            pw_chunk(&g, n, nk, (in_layout, n, g.ix), (out_l, n, g.ox)).0
                        } else {
                            WorkChunk {
                                units: if g.kind == LayerKind::Fc { nk as u64 } else { 2 * n as u64 },
                                ops: (n * g.ox * nk * g.c * g.fy * g.fx) as u64,
                                ..Default::default()
                            }
                        };
                        s.push(Step::Compute(wc));
                    }
                    LayerKind::Add => {
                        s.push(Step::Load { tensor: tin, bytes: (n * g.ix * g.c) as u64 });
                        s.push(Step::Load { tensor: tskip.expect("add has a skip"), bytes: (n * g.ix * g.c) as u64 });
                        s.push(Step::Elementwise(WorkChunk { units: 2 * n as u64, ops: (n * g.ox * g.c) as u64, ..Default::default() }));
                    }
                    LayerKind::Pool => {
                        s.push(Step::Load { tensor: tin, bytes: (g.iy * g.ix * nk) as u64 });
                        s.push(Step::Elementwise(WorkChunk { units: nk as u64, ops: (g.iy * g.ix * nk) as u64, ..Default::default() }));
                    }
                }
                s.push(Step::Store { tensor: tout, bytes: (n * g.ox * nk) as u64 });
            }
        }
        for b in 0..bufs.len() {
            s.push(Step::Free { buf: b });
        }
        Ok(())
    }

    fn lower_fused(&self, s: &mut Schedule, first: usize, scheme: &FusedScheme, t: &TilingSolution) -> Result<()> {
        let (a, b) = (*self.geometry(first), *self.geometry(first + 1));
        let tin = self.declare(s, first);
        let tout = self.declare(s, first + 2);
        let wa = self.declare_weights(s, first);
        let wb = self.declare_weights(s, first + 1);
        let r = t.resident;
        let bufs = [r.input, r.weights, r.buffer, r.output];
        for (i, &bytes) in bufs.iter().enumerate() {
            s.push(Step::Alloc { buf: i, bytes });
        }
        let mut trace = expected_trace(scheme, &a, &b, t.chunks)?.into_iter();
        let mut next = |want_dw: bool| -> Result<WorkChunk> {
            match trace.next() {
                Some(TraceItem::Dw(w)) if want_dw => Ok(w),
                Some(TraceItem::Pw(w)) if !want_dw => Ok(w),
                Some(TraceItem::Shift { .. }) if want_dw => match trace.next() {
                    Some(TraceItem::Dw(w)) => Ok(w),
                    other => Err(Error::Scheme(format!("trace out of step: {other:?}"))),
                },
                Some(TraceItem::Shift { .. }) => match trace.next() {
                    Some(TraceItem::Pw(w)) => Ok(w),
                    other => Err(Error::Scheme(format!("trace out of step: {other:?}"))),
                },
                other => Err(Error::Scheme(format!("trace out of step: {other:?}"))),
            }
        };
        match (scheme.order, scheme.tiling) {
            (FusedOrder::DwPw, _) => {
                s.push(Step::Load { tensor: wa, bytes: a.weight_bytes() });
                s.push(Step::Load { tensor: wb, bytes: b.weight_bytes() });
                for rr in dwpw_row_tiles(&a, scheme.fd) {
                    let n = rr.len();
                    s.push(Step::Load { tensor: tin, bytes: (rows_needed(&a, rr) * a.ix * a.c) as u64 });
                    s.push(Step::Compute(next(true)?));
                    s.push(Step::Compute(next(false)?));
                    s.push(Step::Store { tensor: tout, bytes: (n * b.ox * b.k) as u64 });
                }
            }
            (FusedOrder::PwDw, Tiling::Channels) => {
                let ch = t.chunks.ok_or_else(|| Error::Scheme("channel-wise tiling without row chunks".into()))?;
                let resident_input = ch.rows_in >= a.oy;
                if resident_input {
                    s.push(Step::Load { tensor: tin, bytes: a.input_bytes() });
                }
                for tc in pwdw_channel_tiles(&a, scheme.fd) {
                    let nc = tc.len();
                    s.push(Step::Load { tensor: wa, bytes: (nc * a.c) as u64 });
                    s.push(Step::Load { tensor: wb, bytes: (nc * b.fy * b.fx) as u64 });
                    for rr in chunks(a.oy, ch.rows_in) {
                        if !resident_input {
                            s.push(Step::Load { tensor: tin, bytes: (rr.len() * a.ix * a.c) as u64 });
                        }
                        s.push(Step::Compute(next(false)?));
                    }
                    for rr in chunks(b.oy, ch.rows_out) {
                        s.push(Step::Compute(next(true)?));
                        s.push(Step::Store { tensor: tout, bytes: (rr.len() * b.ox * nc) as u64 });
                    }
                }
            }
            (FusedOrder::PwDw, Tiling::Rows) => {
                s.push(Step::Load { tensor: wa, bytes: a.weight_bytes() });
                s.push(Step::Load { tensor: wb, bytes: b.weight_bytes() });
                for tile in pwdw_rows_plan(&b, scheme.fd) {
                    if !tile.pw_rows.is_empty() {
                        s.push(Step::Load { tensor: tin, bytes: (tile.pw_rows.len() * a.ix * a.c) as u64 });
                        s.push(Step::Compute(next(false)?));
                    }
                    s.push(Step::Compute(next(true)?));
                    s.push(Step::Store { tensor: tout, bytes: (tile.out_rows.len() * b.ox * b.k) as u64 });
                    if let Some(sh) = tile.shift {
                        s.push(Step::Shift { bytes: sh.bytes });
                    }
                }
            }
        }
        for i in 0..bufs.len() {
            s.push(Step::Free { buf: i });
        }
        Ok(())
    }
}

/// Input rows read for output rows `r`, padding excluded.
pub(crate) fn rows_needed(g: &LayerGeometry, r: Range<usize>) -> usize {
    if r.is_empty() {
        return 0;
    }
    let lo = (r.start * g.s) as isize - g.p as isize;
    let hi = ((r.end - 1) * g.s + g.fy) as isize - g.p as isize;
    (hi.min(g.iy as isize) - lo.max(0)).max(0) as usize
}
