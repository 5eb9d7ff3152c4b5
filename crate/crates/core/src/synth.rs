//! Seeded synthetic weights, requantization parameters and activations.
//! Values are uniform int8; the requant scale keeps typical accumulators
//! inside the int8 range so outputs are not dominated by saturation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{LayerGeometry, LayerKind, Layout, QuantParams, TensorBuf, WeightsBuf};
use crate::net::{Layer, NetworkGraph};
use crate::reference::LayerParams;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tensor(rng: &mut impl Rng, h: usize, w: usize, ch: usize, layout: Layout) -> TensorBuf {
    TensorBuf::from_fn(h, w, ch, layout, |_, _, _| rng.random::<i8>())
}

/// Accumulation length of one output element.
fn fan_in(g: &LayerGeometry) -> usize {
    match g.kind {
        LayerKind::Dw => g.fx * g.fy,
        LayerKind::Pw | LayerKind::Fc => g.c,
        LayerKind::Conv => g.c * g.fx * g.fy,
        LayerKind::Add | LayerKind::Pool => 1,
    }
}

/// Shift that maps the accumulator spread of `fan_in` products of uniform
/// int8 values, times a multiplier near 32, to roughly +-64.
pub fn quant_for(g: &LayerGeometry, rng: &mut impl Rng) -> QuantParams {
    let spread = (fan_in(g) as f64).sqrt() * 127.0 * 127.0 / 3.0 * 32.0 / 64.0;
    let shift = spread.log2().ceil().clamp(1.0, 31.0) as u32;
    let k = g.k;
    QuantParams {
        mult: (0..k).map(|_| rng.random_range(24..=40)).collect(),
        shift,
        bias: (0..k).map(|_| rng.random_range(-(1i32 << (shift.min(20) - 1))..=(1i32 << (shift.min(20) - 1)))).collect(),
    }
}

pub fn layer_params(g: &LayerGeometry, rng: &mut impl Rng) -> LayerParams {
    let weights = WeightsBuf::for_layer(g, || rng.random::<i8>());
    let quant = quant_for(g, rng);
    LayerParams { geometry: *g, weights, quant }
}

/// A random DW/PW chain with `dw_layers` DW layers, optionally behind a
/// conv stem. Each DW is preceded by an expanding PW with probability 1/2
/// and followed by a PW; strides are 1 or 2 while the map stays at least 4 rows.
pub fn network(rng: &mut impl Rng, name: &str, dw_layers: usize) -> NetworkGraph {
    let side = rng.random_range(8..=24);
    let mut g = NetworkGraph { name: name.into(), input: (side, side, rng.random_range(2..=8)), layers: Vec::new() };
    let dims = |g: &NetworkGraph| g.layers.last().map_or(g.input, |l| l.geometry.output_dims());
    let push = |g: &mut NetworkGraph, n: String, geom: LayerGeometry| g.layers.push(Layer { name: n, geometry: geom, skip_from: None, shift: None });
    if rng.random_bool(0.5) {
        let (h, w, c) = dims(&g);
        let k = rng.random_range(4..=16);
        push(&mut g, "stem".into(), LayerGeometry::conv(w, h, c, k, 3, 1, 1).expect("stem"));
    }
    for i in 0..dw_layers {
        if rng.random_bool(0.5) {
            let (h, w, c) = dims(&g);
            let k = rng.random_range(4..=32);
            push(&mut g, format!("l{i}_expand"), LayerGeometry::pw(w, h, c, k).expect("pw"));
        }
        let (h, w, c) = dims(&g);
        let s = if h >= 8 && rng.random_bool(0.3) { 2 } else { 1 };
        let f = if h >= 5 && rng.random_bool(0.2) { 5 } else { 3 };
        push(&mut g, format!("l{i}_dw"), LayerGeometry::dw(w, h, c, f, s, f / 2).expect("dw"));
        let (h, w, c) = dims(&g);
        let k = rng.random_range(4..=32);
        push(&mut g, format!("l{i}_pw"), LayerGeometry::pw(w, h, c, k).expect("pw"));
    }
    g.validate().expect("synthetic chains are valid");
    g
}
