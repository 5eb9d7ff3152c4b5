use thiserror::Error;

use crate::model::Layout;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("layout mismatch: expected {expected}, got {actual}")]
    LayoutMismatch { expected: Layout, actual: Layout },
    #[error("invalid fused scheme: {0}")]
    Scheme(String),
    #[error("layer {index}: {reason}")]
    Chain { index: usize, reason: String },
    #[error("invalid quantization parameters: {0}")]
    Quant(String),
    #[error("invalid memory hierarchy: {0}")]
    Hierarchy(String),
    #[error("L1 overflow in `{node}`: {required} B resident, budget {budget} B")]
    L1Overflow { node: String, required: u64, budget: u64 },
    #[error("unknown tensor reference #{0}")]
    UnknownTensor(usize),
    #[error("unknown L1 buffer #{0}")]
    UnknownBuffer(usize),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("{blocks} fusion slots exceed the exhaustive-search cap of {cap}; raise the cap (--max-blocks; cost doubles per slot) or split the network")]
    SearchTooLarge { blocks: usize, cap: usize },
    #[error("unknown network `{0}` (builtins: mv1-224, mv1-128, mv1-96, mv2-224, mv2-128, dscnn)")]
    UnknownNetwork(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("oracle mismatch: {0}")]
    Oracle(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible(_) | Error::L1Overflow { .. } | Error::SearchTooLarge { .. } => 2,
            Error::Io(_) | Error::Parse(_) | Error::UnknownNetwork(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
