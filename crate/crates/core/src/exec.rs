//! Numeric execution of a plan on seeded synthetic data, checked node by
//! node against the reference kernels.

use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fused::{fused_pwdw_channels_chunked, run_fused, FusedOrder, Tiling};
use crate::kernels::{run_dw, run_pw, KernelVariant, KernelOp};
use crate::model::{LayerKind, Layout, TensorBuf};
use crate::net::NetworkGraph;
use crate::planner::{FusionPlan, NodeSpec};
use crate::reference::{ref_layer, LayerParams};
use crate::synth;

pub const SIM_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeCheck {
    pub name: String,
    pub kernel: String,
    pub elements: usize,
    pub mismatches: usize,
    pub checksum: String,
}

impl NodeCheck {
    pub fn ok(&self) -> bool {
        self.mismatches == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimReport {
    pub schema_version: u32,
    pub network: String,
    pub seed: u64,
    pub nodes: Vec<NodeCheck>,
    /// Checksum of the network output.
    pub output_checksum: String,
}

impl SimReport {
    pub fn ok(&self) -> bool {
        self.nodes.iter().all(NodeCheck::ok)
    }
}

/// FNV-1a over the tensor's values in HWC order, as 16 hex digits.
pub fn checksum(t: &TensorBuf) -> String {
    let hwc = t.to_layout(Layout::Hwc);
    let mut h = FnvHasher::default();
    h.write(&hwc.data().iter().map(|&v| v as u8).collect::<Vec<u8>>());
    format!("{:016x}", h.finish())
}

/// Network input and per-layer parameters drawn from one seeded stream,
/// input first. A layer's `shift` overrides the synthesized one.
pub fn network_data(g: &NetworkGraph, seed: u64) -> (TensorBuf, Vec<LayerParams>) {
    let mut rng = synth::rng(seed);
    let (h, w, c) = g.input;
    let input = synth::tensor(&mut rng, h, w, c, Layout::Hwc);
    let params = g
        .layers
        .iter()
        .map(|l| {
            let mut p = synth::layer_params(&l.geometry, &mut rng);
            if let Some(s) = l.shift {
                p.quant.shift = s;
            }
            p
        })
        .collect();
    (input, params)
}

/// Reference output of every tensor (index 0 = network input).
pub fn reference_tensors(g: &NetworkGraph, input: &TensorBuf, params: &[LayerParams]) -> Result<Vec<TensorBuf>> {
    let mut t = vec![input.clone()];
    for (i, l) in g.layers.iter().enumerate() {
        let skip = l.skip_from.map(|j| t[j + 1].clone());
        let out = ref_layer(&t[i], &params[i], skip.as_ref())
            .map_err(|e| Error::Chain { index: i, reason: e.to_string() })?;
        t.push(out);
    }
    Ok(t)
}

/// Runs every plan node with the kernel it names, in the layouts it
/// names, and compares each node's output with the reference.
pub fn simulate(plan: &FusionPlan, seed: u64) -> Result<SimReport> {
    let g = &plan.network;
    let (input, params) = network_data(g, seed);
    let reference = reference_tensors(g, &input, &params)?;
    let mut produced: Vec<Option<TensorBuf>> = vec![None; g.layers.len() + 1];
    produced[0] = Some(input);
    let mut nodes = Vec::with_capacity(plan.nodes.len());
    for node in &plan.nodes {
        let first = node.spec.first();
        let have = produced[first].as_ref().ok_or_else(|| Error::Oracle(format!("{}: input not produced", node.name)))?;
        if have.layout() != node.input_layout {
            return Err(Error::Oracle(format!("{}: input is {}, plan says {}", node.name, have.layout(), node.input_layout)));
        }
        let out = match node.spec {
            NodeSpec::Layer { index } => {
                let p = &params[index];
                let kind = p.geometry.kind;
                match kind {
                    LayerKind::Dw | LayerKind::Pw => {
                        let op = if kind == LayerKind::Dw { KernelOp::Dw } else { KernelOp::Pw };
                        let v = KernelVariant::new(op, node.input_layout, node.output_layout);
                        let run = if op == KernelOp::Dw { run_dw } else { run_pw };
                        run(&v, have, p.weights()?, &p.quant, &p.geometry)?.output
                    }
                    _ => {
                        let skip = g.layers[index].skip_from.map(|j| {
                            produced[j + 1].as_ref().map(|t| t.to_layout(Layout::Hwc)).ok_or_else(|| Error::Oracle(format!("{}: skip operand not produced", node.name)))
                        });
                        let skip = skip.transpose()?;
                        ref_layer(&have.to_layout(Layout::Hwc), p, skip.as_ref())?.to_layout(node.output_layout)
                    }
                }
            }
            NodeSpec::Fused { first, scheme } => {
                let (a, b) = (&params[first], &params[first + 1]);
                let x = have.to_layout(scheme.layouts.input);
                match (scheme.order, scheme.tiling, node.tiling.chunks) {
                    (FusedOrder::PwDw, Tiling::Channels, Some(ch)) => fused_pwdw_channels_chunked(&x, a, b, &scheme, ch)?.output,
                    _ => run_fused(&x, a, b, &scheme)?.output,
                }
            }
        };
        let want = &reference[node.spec.last() + 1];
        nodes.push(NodeCheck {
            name: node.name.clone(),
            kernel: node.kernel.clone(),
            elements: want.len(),
            mismatches: out.mismatches(want),
            checksum: checksum(&out),
        });
        produced[node.spec.last() + 1] = Some(out);
    }
    let last = produced.last().cloned().flatten().ok_or_else(|| Error::Oracle("network output not produced".into()))?;
    Ok(SimReport { schema_version: SIM_SCHEMA_VERSION, network: g.name.clone(), seed, nodes, output_checksum: checksum(&last) })
}
