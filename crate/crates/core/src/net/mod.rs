//! Network graphs: the TOML graph schema and the builtin MobileNet and
//! keyword-spotting generators.

mod builtin;
mod graph;

pub use builtin::{builtin, dscnn, mobilenet_v1, mobilenet_v2, BUILTIN_NAMES};
pub use graph::{load_graph, save_graph, Layer, NetworkGraph, GRAPH_SCHEMA_VERSION};
