//! Edge entropy toolkit: label-structure metrics for node classification
//! graphs, a synthetic labeled-graph generator, and a polynomial graph-filter
//! network for measuring how much a graph helps classification.

pub mod experiment;
pub mod fixtures;
pub mod gnn;
pub mod graph;
pub mod metrics;
pub mod rng;
pub mod synthgen;

pub use graph::{Directedness, LabeledGraph};
pub use metrics::{ConnectivityMatrix, EntropyReport};
pub use rng::RngStream;
