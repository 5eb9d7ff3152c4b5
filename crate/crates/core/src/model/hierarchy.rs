use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scratchpad capacities in bytes. `l3_bytes = 0` means no L3.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Levels {
    pub l1_bytes: u64,
    pub l2_bytes: u64,
    pub l3_bytes: u64,
}

/// DMA cost per byte for each level pair, in abstract cycles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferCosts {
    pub l2_l1_cycles_per_byte: f64,
    pub l3_l2_cycles_per_byte: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComputeModel {
    pub n_cores: u32,
    pub macs_per_cycle_per_core: f64,
    /// Extra cycles per load whose innermost-loop stride is not 1.
    pub strided_load_penalty: f64,
    /// Extra cycles per store whose innermost-loop stride is not 1.
    pub strided_store_penalty: f64,
    /// Fixed cost of one kernel invocation (one tile of one layer).
    pub kernel_call_cycles: f64,
    /// Cost of the row-wise buffer shift, per byte moved, spread over all cores.
    pub shift_cycles_per_byte: f64,
    /// Cost of a CHW/HWC re-layout, per byte, spread over all cores.
    pub reorg_cycles_per_byte: f64,
}

/// Memory hierarchy and cost-model constants.
///
/// The cost constants are free parameters of the model; the `gap8` preset
/// only fixes the level sizes and the core count to those of the chip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemHierarchy {
    pub schema_version: u32,
    pub name: String,
    pub levels: Levels,
    pub transfer: TransferCosts,
    pub compute: ComputeModel,
    /// Fraction in `[0, 1]` of the shorter of compute and transfer time that
    /// is hidden by overlapping them. 0 means fully serialized.
    pub overlap: f64,
}

pub const HIERARCHY_SCHEMA_VERSION: u32 = 1;

impl MemHierarchy {
    /// GAP8: 64 kB L1, 512 kB L2, 8 MB external L3, an 8-core cluster.
    pub fn gap8() -> Self {
        MemHierarchy {
            schema_version: HIERARCHY_SCHEMA_VERSION,
            name: "gap8".into(),
            levels: Levels { l1_bytes: 64 * 1024, l2_bytes: 512 * 1024, l3_bytes: 8 * 1024 * 1024 },
            transfer: TransferCosts { l2_l1_cycles_per_byte: 0.25, l3_l2_cycles_per_byte: 2.0 },
            compute: ComputeModel {
                n_cores: 8,
                macs_per_cycle_per_core: 2.0,
                strided_load_penalty: 0.5,
                strided_store_penalty: 0.125,
                kernel_call_cycles: 150.0,
                shift_cycles_per_byte: 0.5,
                reorg_cycles_per_byte: 0.5,
            },
            overlap: 0.0,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "gap8" => Some(Self::gap8()),
            "gap8-l1-1mb" => Some(Self::gap8().with_l1(1024 * 1024)),
            _ => None,
        }
    }

    pub fn with_l1(mut self, l1_bytes: u64) -> Self {
        self.levels.l1_bytes = l1_bytes;
        if self.levels.l2_bytes <= l1_bytes {
            self.levels.l2_bytes = l1_bytes * 8;
        }
        self
    }

    pub fn l1(&self) -> u64 {
        self.levels.l1_bytes
    }

    pub fn l2(&self) -> u64 {
        self.levels.l2_bytes
    }

    pub fn l3(&self) -> u64 {
        self.levels.l3_bytes
    }

    pub fn n_cores(&self) -> u64 {
        u64::from(self.compute.n_cores)
    }

    pub fn has_l3(&self) -> bool {
        self.levels.l3_bytes > 0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Hierarchy(m));
        if self.schema_version != HIERARCHY_SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}", self.schema_version));
        }
        let l = &self.levels;
        if l.l1_bytes == 0 || l.l1_bytes >= l.l2_bytes {
            return bad(format!("need 0 < l1_bytes < l2_bytes, got {} / {}", l.l1_bytes, l.l2_bytes));
        }
        if l.l3_bytes != 0 && l.l3_bytes <= l.l2_bytes {
            return bad("l3_bytes must exceed l2_bytes when present".into());
        }
        let c = &self.compute;
        if c.n_cores == 0 || !c.n_cores.is_multiple_of(2) {
            return bad(format!("n_cores must be even and >= 2, got {}", c.n_cores));
        }
        if !c.macs_per_cycle_per_core.is_finite() || c.macs_per_cycle_per_core <= 0.0 {
            return bad("macs_per_cycle_per_core must be positive".into());
        }
        let costs = [
            self.transfer.l2_l1_cycles_per_byte,
            self.transfer.l3_l2_cycles_per_byte,
            c.strided_load_penalty,
            c.strided_store_penalty,
            c.kernel_call_cycles,
            c.shift_cycles_per_byte,
            c.reorg_cycles_per_byte,
        ];
        if costs.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("all costs must be finite and >= 0".into());
        }
        if self.transfer.l3_l2_cycles_per_byte < self.transfer.l2_l1_cycles_per_byte {
            return bad("L3 transfers must not be cheaper than L2 transfers".into());
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return bad(format!("overlap {} outside [0, 1]", self.overlap));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let h: MemHierarchy = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        h.validate()?;
        Ok(h)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("hierarchy serializes")
    }

    /// Loads a preset name or a TOML file path.
    pub fn load(spec: &str) -> Result<Self> {
        if let Some(h) = Self::preset(spec) {
            return Ok(h);
        }
        let text = std::fs::read_to_string(spec)?;
        Self::from_toml(&text)
    }
}
