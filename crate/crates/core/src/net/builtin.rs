//! Builtin networks at width multiplier 0.25.
//!
//! MobileNetV1 (224/128/96 input): stem 3x3/2 conv to 8 channels, 13 DW-PW
//! blocks with output channels
//! 16, 32/2, 32, 64/2, 64, 128/2, 128 x5, 256/2, 256 (`/2`: DW stride 2),
//! global average pool and a fully connected classifier (1000 classes; 2 for
//! the 96x96 wake-word variant). 29 layers.
//!
//! MobileNetV2 (224/128 input): channels rounded to multiples of 8. Stem
//! 3x3/2 conv to 8, a t=1 block (DW, PW 8->8, add), then 16 expanded
//! bottlenecks (PW expand x6, DW, PW project) over stages
//! (c, n, s) = (8,2,2) (8,3,2) (16,4,2) (24,3,1) (40,3,2) (80,1,1),
//! with an add wherever input and output shapes agree, a final PW to 1280,
//! pool and classifier. 65 layers, 11 adds.
//!
//! DSCNN: 49x10x1 MFCC input, 10x4/2 conv with padding 1 to 64 channels
//! (21x5 map), then 4 blocks of DW 3x3 and PW 64->64. 9 layers; the
//! pool/classifier head is not part of the 9-layer body and is omitted.

use crate::error::{Error, Result};
use crate::model::LayerGeometry;

use super::graph::{Layer, NetworkGraph};

pub const BUILTIN_NAMES: [&str; 6] = ["mv1-224", "mv1-128", "mv1-96", "mv2-224", "mv2-128", "dscnn"];

struct Builder {
    g: NetworkGraph,
}

impl Builder {
    fn new(name: &str, h: usize, w: usize, c: usize) -> Self {
        Builder { g: NetworkGraph { name: name.into(), input: (h, w, c), layers: Vec::new() } }
    }

    fn dims(&self) -> (usize, usize, usize) {
        match self.g.layers.last() {
            Some(l) => l.geometry.output_dims(),
            None => self.g.input,
        }
    }

    fn push(&mut self, name: String, geometry: LayerGeometry, skip_from: Option<usize>) -> usize {
        self.g.layers.push(Layer { name, geometry, skip_from, shift: None });
        self.g.layers.len() - 1
    }

    fn conv(&mut self, name: &str, k: usize, fy: usize, fx: usize, s: usize, p: usize) {
        let (h, w, c) = self.dims();
        let g = LayerGeometry::new(crate::model::LayerKind::Conv, w, h, c, k, fx, fy, p, s).expect("builtin conv");
        self.push(name.into(), g, None);
    }

    fn dw(&mut self, name: String, s: usize) {
        let (h, w, c) = self.dims();
        self.push(name, LayerGeometry::dw(w, h, c, 3, s, 1).expect("builtin dw"), None);
    }

    fn pw(&mut self, name: String, k: usize) {
        let (h, w, c) = self.dims();
        self.push(name, LayerGeometry::pw(w, h, c, k).expect("builtin pw"), None);
    }

    fn add(&mut self, name: String, skip_from: usize) {
        let (h, w, c) = self.dims();
        self.push(name, LayerGeometry::add(w, h, c).expect("builtin add"), Some(skip_from));
    }

    fn head(&mut self, classes: usize) {
        let (h, w, c) = self.dims();
        self.push("pool".into(), LayerGeometry::pool(w, h, c).expect("builtin pool"), None);
        self.push("fc".into(), LayerGeometry::fc(c, classes).expect("builtin fc"), None);
    }

    fn finish(self) -> NetworkGraph {
        self.g.validate().expect("builtin graphs are valid");
        self.g
    }
}

pub fn mobilenet_v1(resolution: usize, classes: usize) -> NetworkGraph {
    let mut b = Builder::new(&format!("mv1-{resolution}"), resolution, resolution, 3);
    b.conv("conv0", 8, 3, 3, 2, 1);
    let blocks = [(1, 16), (2, 32), (1, 32), (2, 64), (1, 64), (2, 128), (1, 128), (1, 128), (1, 128), (1, 128), (1, 128), (2, 256), (1, 256)];
    for (i, (s, k)) in blocks.into_iter().enumerate() {
        b.dw(format!("b{}_dw", i + 1), s);
        b.pw(format!("b{}_pw", i + 1), k);
    }
    b.head(classes);
    b.finish()
}

pub fn mobilenet_v2(resolution: usize) -> NetworkGraph {
    let mut b = Builder::new(&format!("mv2-{resolution}"), resolution, resolution, 3);
    b.conv("conv0", 8, 3, 3, 2, 1);
    let stem = b.g.layers.len() - 1;
    b.dw("b1_dw".into(), 1);
    b.pw("b1_pw".into(), 8);
    b.add("b1_add".into(), stem);
    let mut block = 1;
    for (c, n, s) in [(8, 2, 2), (8, 3, 2), (16, 4, 2), (24, 3, 1), (40, 3, 2), (80, 1, 1)] {
        for r in 0..n {
            block += 1;
            let input_layer = b.g.layers.len() - 1;
            let (_, _, cin) = b.dims();
            let stride = if r == 0 { s } else { 1 };
            b.pw(format!("b{block}_expand"), cin * 6);
            b.dw(format!("b{block}_dw"), stride);
            b.pw(format!("b{block}_project"), c);
            if stride == 1 && cin == c {
                b.add(format!("b{block}_add"), input_layer);
            }
        }
    }
    b.pw("conv_last".into(), 1280);
    b.head(1000);
    b.finish()
}

pub fn dscnn() -> NetworkGraph {
    let mut b = Builder::new("dscnn", 49, 10, 1);
    b.conv("conv0", 64, 10, 4, 2, 1);
    for i in 1..=4 {
        b.dw(format!("b{i}_dw"), 1);
        b.pw(format!("b{i}_pw"), 64);
    }
    b.finish()
}

pub fn builtin(name: &str) -> Result<NetworkGraph> {
    Ok(match name {
        "mv1-224" => mobilenet_v1(224, 1000),
        "mv1-128" => mobilenet_v1(128, 1000),
        "mv1-96" => mobilenet_v1(96, 2),
        "mv2-224" => mobilenet_v2(224),
        "mv2-128" => mobilenet_v2(128),
        "dscnn" => dscnn(),
        _ => return Err(Error::UnknownNetwork(name.into())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LayerKind;

    #[test]
    fn layer_and_block_counts() {
        for n in ["mv1-224", "mv1-128", "mv1-96"] {
            let g = builtin(n).unwrap();
            assert_eq!(g.layers.len(), 29);
            assert_eq!(g.count(LayerKind::Dw), 13);
        }
        for n in ["mv2-224", "mv2-128"] {
            let g = builtin(n).unwrap();
            assert_eq!(g.layers.len(), 65);
            assert_eq!(g.count(LayerKind::Add), 11);
            assert_eq!(g.layers.iter().filter(|l| l.name.ends_with("_expand")).count(), 16);
        }
        let d = dscnn();
        assert_eq!(d.layers.len(), 9);
        assert_eq!(d.count(LayerKind::Dw), 4);
    }

    #[test]
    fn mac_totals() {
        // Frozen from an independent layer-by-layer evaluation of the tables above.
        let expect = [
            ("mv1-224", 41_030_272, 463_600),
            ("mv1-128", 13_570_048, 463_600),
            ("mv1-96", 7_489_664, 208_112),
            ("mv2-224", 37_201_312, 1_507_456),
            ("mv2-128", 13_009_408, 1_507_456),
            ("dscnn", 2_231_040, 21_248),
        ];
        for (n, macs, weights) in expect {
            let g = builtin(n).unwrap();
            assert_eq!((g.macs(), g.weight_bytes()), (macs, weights), "{n}");
        }
    }

    #[test]
    fn generators_are_pure_and_names_checked() {
        assert_eq!(builtin("mv2-128").unwrap(), builtin("mv2-128").unwrap());
        assert!(matches!(builtin("resnet"), Err(Error::UnknownNetwork(_))));
    }
}
