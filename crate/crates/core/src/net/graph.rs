use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LayerGeometry, LayerKind};

pub const GRAPH_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    pub geometry: LayerGeometry,
    /// For `add` layers: index of the layer whose output is the second operand.
    pub skip_from: Option<usize>,
    /// Overrides the synthesized requantization shift.
    pub shift: Option<u32>,
}

/// An ordered chain of layers. Tensor 0 is the network input and layer `i`
/// produces tensor `i + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkGraph {
    pub name: String,
    /// Input extents `(h, w, c)`.
    pub input: (usize, usize, usize),
    pub layers: Vec<Layer>,
}

impl NetworkGraph {
    /// Checks every layer and the chain; errors name the offending layer.
    pub fn validate(&self) -> Result<()> {
        let mut prev = self.input;
        for (i, l) in self.layers.iter().enumerate() {
            let g = &l.geometry;
            g.validate().map_err(|e| Error::Chain { index: i, reason: e.to_string() })?;
            if g.input_dims() != prev {
                return Err(Error::Chain { index: i, reason: format!("input {:?} does not match the preceding tensor {prev:?}", g.input_dims()) });
            }
            match (g.kind, l.skip_from) {
                (LayerKind::Add, Some(j)) => {
                    if j + 1 >= i {
                        return Err(Error::Chain { index: i, reason: format!("skip source {j} must precede the previous layer") });
                    }
                    let src = self.layers[j].geometry.output_dims();
                    if src != g.output_dims() {
                        return Err(Error::Chain { index: i, reason: format!("skip tensor {src:?} differs from {:?}", g.output_dims()) });
                    }
                }
                (LayerKind::Add, None) => return Err(Error::Chain { index: i, reason: "add layer without skip_from".into() }),
                (_, Some(_)) => return Err(Error::Chain { index: i, reason: "only add layers take skip_from".into() }),
                _ => {}
            }
            if let Some(s) = l.shift {
                if s > 31 {
                    return Err(Error::Chain { index: i, reason: format!("shift {s} exceeds 31") });
                }
            }
            prev = g.output_dims();
        }
        Ok(())
    }

    /// Bytes of tensor `t` (0 = network input).
    pub fn tensor_bytes(&self, t: usize) -> u64 {
        if t == 0 {
            let (h, w, c) = self.input;
            (h * w * c) as u64
        } else {
            self.layers[t - 1].geometry.output_bytes()
        }
    }

    pub fn tensor_dims(&self, t: usize) -> (usize, usize, usize) {
        if t == 0 {
            self.input
        } else {
            self.layers[t - 1].geometry.output_dims()
        }
    }

    /// Whether tensor `t` is read by an add layer as its skip operand.
    pub fn is_skip_source(&self, t: usize) -> bool {
        t > 0 && self.layers.iter().any(|l| l.skip_from == Some(t - 1))
    }

    /// Layers reading tensor `t`, in order.
    pub fn consumers(&self, t: usize) -> Vec<usize> {
        let mut v = Vec::new();
        if t < self.layers.len() {
            v.push(t);
        }
        for (i, l) in self.layers.iter().enumerate() {
            if t > 0 && l.skip_from == Some(t - 1) && i != t {
                v.push(i);
            }
        }
        v
    }

    pub fn macs(&self) -> u64 {
        self.layers.iter().map(|l| l.geometry.macs()).sum()
    }

    pub fn weight_bytes(&self) -> u64 {
        self.layers.iter().map(|l| l.geometry.weight_bytes()).sum()
    }

    pub fn count(&self, kind: LayerKind) -> usize {
        self.layers.iter().filter(|l| l.geometry.kind == kind).count()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let f: GraphFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if f.schema_version != GRAPH_SCHEMA_VERSION {
            return Err(Error::Parse(format!("graph schema_version {} (expected {GRAPH_SCHEMA_VERSION})", f.schema_version)));
        }
        let mut layers = Vec::with_capacity(f.layers.len());
        for (i, e) in f.layers.into_iter().enumerate() {
            let geometry = LayerGeometry::new(e.kind, e.ix, e.iy, e.c, e.k, e.fx, e.fy, e.p, e.s)
                .map_err(|err| Error::Chain { index: i, reason: err.to_string() })?;
            layers.push(Layer { name: e.name, geometry, skip_from: e.skip_from, shift: e.shift });
        }
        let g = NetworkGraph { name: f.name, input: (f.input.h, f.input.w, f.input.c), layers };
        g.validate()?;
        Ok(g)
    }

    pub fn to_toml(&self) -> String {
        let f = GraphFile {
            schema_version: GRAPH_SCHEMA_VERSION,
            name: self.name.clone(),
            input: InputDims { h: self.input.0, w: self.input.1, c: self.input.2 },
            layers: self
                .layers
                .iter()
                .map(|l| {
                    let g = &l.geometry;
                    LayerEntry {
                        name: l.name.clone(),
                        kind: g.kind,
                        ix: g.ix,
                        iy: g.iy,
                        c: g.c,
                        k: g.k,
                        fx: g.fx,
                        fy: g.fy,
                        s: g.s,
                        p: g.p,
                        skip_from: l.skip_from,
                        shift: l.shift,
                    }
                })
                .collect(),
        };
        toml::to_string(&f).expect("graph serializes")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InputDims {
    h: usize,
    w: usize,
    c: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerEntry {
    name: String,
    kind: LayerKind,
    ix: usize,
    iy: usize,
    c: usize,
    k: usize,
    fx: usize,
    fy: usize,
    s: usize,
    p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    skip_from: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shift: Option<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    schema_version: u32,
    name: String,
    input: InputDims,
    layers: Vec<LayerEntry>,
}

pub fn load_graph(path: &Path) -> Result<NetworkGraph> {
    NetworkGraph::from_toml(&std::fs::read_to_string(path)?)
}

pub fn save_graph(g: &NetworkGraph, path: &Path) -> Result<()> {
    std::fs::write(path, g.to_toml())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"
schema_version = 1
name = "tiny"

[input]
h = 8
w = 8
c = 4

[[layers]]
name = "dw"
kind = "dw"
ix = 8
iy = 8
c = 4
k = 4
fx = 3
fy = 3
s = 1
p = 1

[[layers]]
name = "pw"
kind = "pw"
ix = 8
iy = 8
c = 4
k = 8
fx = 1
fy = 1
s = 1
p = 0
"#;

    #[test]
    fn parses_and_round_trips() {
        let g = NetworkGraph::from_toml(TINY).unwrap();
        assert_eq!(g.layers.len(), 2);
        let text = g.to_toml();
        let again = NetworkGraph::from_toml(&text).unwrap();
        assert_eq!(again, g);
        assert_eq!(again.to_toml(), text);
    }

    #[test]
    fn rejects_pw_with_spatial_filter() {
        let bad = TINY.replacen("fx = 1\nfy = 1\ns = 1\np = 0", "fx = 3\nfy = 1\ns = 1\np = 0", 1);
        assert!(matches!(NetworkGraph::from_toml(&bad), Err(Error::Chain { index: 1, .. })));
    }

    #[test]
    fn rejects_broken_chain_and_bad_syntax() {
        let bad = TINY.replacen("c = 4\nk = 8", "c = 5\nk = 8", 1);
        assert!(matches!(NetworkGraph::from_toml(&bad), Err(Error::Chain { index: 1, .. })));
        assert!(matches!(NetworkGraph::from_toml("name = ["), Err(Error::Parse(_))));
        let unknown = TINY.replacen("kind = \"dw\"", "kind = \"lstm\"", 1);
        assert!(matches!(NetworkGraph::from_toml(&unknown), Err(Error::Parse(_))));
    }
}
