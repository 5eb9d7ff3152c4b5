use serde::{Deserialize, Serialize};

use super::scheme::FusedScheme;
use crate::model::LayerGeometry;

/// How a two-layer block executes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "exec", rename_all = "lowercase")]
pub enum BlockExec {
    Unfused,
    Fused { scheme: FusedScheme },
}

/// Intermediate-tensor bytes crossing the L1 boundary for a block.
///
/// Fused blocks keep the intermediate in L1. Unfused, the intermediate is
/// stored once and reloaded once unless `resident_budget` is given and the
/// input, intermediate, output and both weight sets fit in it together.
pub fn count_intermediate_traffic(exec: BlockExec, a: &LayerGeometry, b: &LayerGeometry, resident_budget: Option<u64>) -> u64 {
    match exec {
        BlockExec::Fused { .. } => 0,
        BlockExec::Unfused => {
            let mid = a.output_bytes();
            let whole = a.input_bytes() + mid + b.output_bytes() + a.weight_bytes() + b.weight_bytes();
            match resident_budget {
                Some(budget) if whole <= budget => 0,
                _ => 2 * mid,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unfused_spills_twice_the_intermediate() {
        let dw = LayerGeometry::dw(28, 28, 32, 3, 1, 1).unwrap();
        let pw = LayerGeometry::pw(28, 28, 32, 64).unwrap();
        assert_eq!(count_intermediate_traffic(BlockExec::Unfused, &dw, &pw, None), 50_176);
        assert_eq!(count_intermediate_traffic(BlockExec::Unfused, &dw, &pw, Some(65_536)), 50_176);
        let fused = BlockExec::Fused { scheme: FusedScheme::default_dwpw() };
        assert_eq!(count_intermediate_traffic(fused, &dw, &pw, None), 0);
        let small_dw = LayerGeometry::dw(8, 8, 8, 3, 1, 1).unwrap();
        let small_pw = LayerGeometry::pw(8, 8, 8, 8).unwrap();
        assert_eq!(count_intermediate_traffic(BlockExec::Unfused, &small_dw, &small_pw, Some(65_536)), 0);
    }
}
