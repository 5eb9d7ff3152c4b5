use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LevelPair {
    L2L1,
    L3L2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Towards L1.
    Load,
    /// Away from L1.
    Store,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorClass {
    Activation,
    Weight,
    /// The internal tensor of a fusion candidate executed without fusion.
    Intermediate,
}

impl fmt::Display for TensorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TensorClass::Activation => "activation",
            TensorClass::Weight => "weight",
            TensorClass::Intermediate => "intermediate",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassBytes {
    pub activation: u64,
    pub weight: u64,
    pub intermediate: u64,
}

impl ClassBytes {
    fn slot(&mut self, c: TensorClass) -> &mut u64 {
        match c {
            TensorClass::Activation => &mut self.activation,
            TensorClass::Weight => &mut self.weight,
            TensorClass::Intermediate => &mut self.intermediate,
        }
    }

    pub fn get(&self, c: TensorClass) -> u64 {
        match c {
            TensorClass::Activation => self.activation,
            TensorClass::Weight => self.weight,
            TensorClass::Intermediate => self.intermediate,
        }
    }

    pub fn total(&self) -> u64 {
        self.activation + self.weight + self.intermediate
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DirBytes {
    pub load: ClassBytes,
    pub store: ClassBytes,
}

impl DirBytes {
    fn dir(&mut self, d: Direction) -> &mut ClassBytes {
        match d {
            Direction::Load => &mut self.load,
            Direction::Store => &mut self.store,
        }
    }
}

/// Bytes moved per level pair, direction and tensor class. Counters only
/// ever grow.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransferLedger {
    pub l2_l1: DirBytes,
    pub l3_l2: DirBytes,
}

impl TransferLedger {
    fn pair(&self, p: LevelPair) -> &DirBytes {
        match p {
            LevelPair::L2L1 => &self.l2_l1,
            LevelPair::L3L2 => &self.l3_l2,
        }
    }

    pub fn add(&mut self, p: LevelPair, d: Direction, c: TensorClass, bytes: u64) {
        let pair = match p {
            LevelPair::L2L1 => &mut self.l2_l1,
            LevelPair::L3L2 => &mut self.l3_l2,
        };
        *pair.dir(d).slot(c) += bytes;
    }

    pub fn get(&self, p: LevelPair, d: Direction, c: TensorClass) -> u64 {
        let pair = self.pair(p);
        match d {
            Direction::Load => pair.load.get(c),
            Direction::Store => pair.store.get(c),
        }
    }

    /// Both directions of one class on one level pair.
    pub fn class_bytes(&self, p: LevelPair, c: TensorClass) -> u64 {
        self.get(p, Direction::Load, c) + self.get(p, Direction::Store, c)
    }

    pub fn pair_total(&self, p: LevelPair) -> u64 {
        let pair = self.pair(p);
        pair.load.total() + pair.store.total()
    }

    /// Activation plus intermediate bytes on the L2-L1 pair.
    pub fn activation_l2_l1(&self) -> u64 {
        self.class_bytes(LevelPair::L2L1, TensorClass::Activation) + self.class_bytes(LevelPair::L2L1, TensorClass::Intermediate)
    }

    /// Activation memory transfers over every level pair, weights excluded.
    pub fn amt(&self) -> u64 {
        [LevelPair::L2L1, LevelPair::L3L2]
            .into_iter()
            .map(|p| self.class_bytes(p, TensorClass::Activation) + self.class_bytes(p, TensorClass::Intermediate))
            .sum()
    }

    /// Bytes of one class over every level pair and direction.
    pub fn class_total(&self, c: TensorClass) -> u64 {
        [LevelPair::L2L1, LevelPair::L3L2].into_iter().map(|p| self.class_bytes(p, c)).sum()
    }

    pub fn merge(&mut self, o: &TransferLedger) {
        for p in [LevelPair::L2L1, LevelPair::L3L2] {
            for d in [Direction::Load, Direction::Store] {
                for c in [TensorClass::Activation, TensorClass::Weight, TensorClass::Intermediate] {
                    self.add(p, d, c, o.get(p, d, c));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn amt_excludes_weights() {
        let mut l = TransferLedger::default();
        l.add(LevelPair::L2L1, Direction::Load, TensorClass::Activation, 10);
        l.add(LevelPair::L2L1, Direction::Store, TensorClass::Intermediate, 5);
        l.add(LevelPair::L3L2, Direction::Load, TensorClass::Activation, 7);
        l.add(LevelPair::L2L1, Direction::Load, TensorClass::Weight, 100);
        assert_eq!(l.amt(), 22);
        assert_eq!(l.activation_l2_l1(), 15);
        assert_eq!(l.pair_total(LevelPair::L2L1), 115);
        let mut m = l;
        m.merge(&l);
        assert_eq!(m.amt(), 44);
    }
}
