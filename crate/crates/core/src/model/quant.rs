use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-output-channel requantization from a 32-bit accumulator to int8.
///
/// `out = sat8(((acc + bias[k]) * mult[k] + round) >> shift)` where
/// `round = 1 << (shift - 1)` for `shift > 0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantParams {
    pub mult: Vec<i32>,
    pub shift: u32,
    pub bias: Vec<i32>,
}

impl QuantParams {
    /// `mult = 1`, `shift = 0`, `bias = 0` for `k` channels.
    pub fn identity(k: usize) -> Self {
        QuantParams { mult: vec![1; k], shift: 0, bias: vec![0; k] }
    }

    pub fn uniform(k: usize, mult: i32, shift: u32, bias: i32) -> Self {
        QuantParams { mult: vec![mult; k], shift, bias: vec![bias; k] }
    }

    pub fn channels(&self) -> usize {
        self.mult.len()
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.shift > 31 {
            return Err(Error::Quant(format!("shift {} outside 0..=31", self.shift)));
        }
        if self.mult.len() != k || self.bias.len() != k {
            return Err(Error::Quant(format!(
                "expected {k} channels, got {} multipliers and {} biases",
                self.mult.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn requant(&self, acc: i32, k: usize) -> i8 {
        let v = (i64::from(acc) + i64::from(self.bias[k])) * i64::from(self.mult[k]);
        let r = if self.shift > 0 { (v + (1i64 << (self.shift - 1))) >> self.shift } else { v };
        r.clamp(-128, 127) as i8
    }
}
