//! Labeled graph data model.
//!
//! A [`LabeledGraph`] stores a directed adjacency structure in compressed
//! sparse row form together with one class label per node and an optional
//! dense feature matrix. Undirected inputs are stored as pairs of directed
//! edges. Self loops are kept in the adjacency but flagged per node so that
//! label statistics can skip them.

mod io;

pub use io::{load_dir, load_graph, load_graph_with, save_graph, GraphFiles, LoadOptions, Manifest, EDGE_FILE, FEATURE_FILE, LABEL_FILE, MANIFEST_FILE};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: cannot parse {token:?}")]
    Parse {
        path: PathBuf,
        line: usize,
        token: String,
    },
    #[error("node {node} has no label")]
    MissingLabel { node: usize },
    #[error("node {node} is labeled both {first} and {second}")]
    ConflictingLabel {
        node: usize,
        first: usize,
        second: usize,
    },
    #[error("node {node} has label {label} outside 0..{num_classes}")]
    InvalidLabel {
        node: usize,
        label: usize,
        num_classes: usize,
    },
    #[error("node id {node} out of range for {num_nodes} nodes")]
    NodeOutOfRange { node: usize, num_nodes: usize },
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("manifest error: {0}")]
    Manifest(String),
}

/// Whether input edges are mirrored on construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Directedness {
    Directed,
    Undirected,
}

impl Directedness {
    pub fn is_directed(self) -> bool {
        self == Directedness::Directed
    }
}

/// Where a graph came from. Carried through save/load in the manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub generator: Option<serde_json::Value>,
    /// Original external node ids, when ids were compacted on load.
    pub id_map: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    num_classes: usize,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    labels: Vec<usize>,
    self_loop: Vec<bool>,
    features: Option<Array2<f64>>,
    directedness: Directedness,
    provenance: Provenance,
}

impl LabeledGraph {
    /// Builds a graph from an edge list. Duplicate edges are dropped and, for
    /// undirected graphs, every edge is mirrored.
    pub fn from_edges(
        labels: Vec<usize>,
        num_classes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        directedness: Directedness,
    ) -> Result<Self, GraphError> {
        let n = labels.len();
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (u, v) in edges {
            for node in [u, v] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { node, num_nodes: n });
                }
            }
            lists[u].push(v);
            if !directedness.is_directed() {
                lists[v].push(u);
            }
        }
        Self::from_neighbor_lists(labels, num_classes, lists, directedness)
    }

    /// Builds a graph from per-node out-neighbor lists (sorted and
    /// deduplicated here). No mirroring is performed.
    pub fn from_neighbor_lists(
        labels: Vec<usize>,
        num_classes: usize,
        mut lists: Vec<Vec<usize>>,
        directedness: Directedness,
    ) -> Result<Self, GraphError> {
        let n = labels.len();
        if lists.len() != n {
            return Err(GraphError::ShapeMismatch {
                expected: format!("{n} neighbor lists"),
                found: lists.len().to_string(),
            });
        }
        for (node, &label) in labels.iter().enumerate() {
            if label >= num_classes {
                return Err(GraphError::InvalidLabel {
                    node,
                    label,
                    num_classes,
                });
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut targets = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        let mut self_loop = vec![false; n];
        for (u, list) in lists.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            if let Some(&v) = list.last() {
                if v >= n {
                    return Err(GraphError::NodeOutOfRange { node: v, num_nodes: n });
                }
            }
            self_loop[u] = list.binary_search(&u).is_ok();
            targets.extend_from_slice(list);
            offsets.push(targets.len());
        }
        Ok(LabeledGraph {
            num_classes,
            offsets,
            targets,
            labels,
            self_loop,
            features: None,
            directedness,
            provenance: Provenance::default(),
        })
    }

    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self, GraphError> {
        if features.nrows() != self.num_nodes() {
            return Err(GraphError::ShapeMismatch {
                expected: format!("{} feature rows", self.num_nodes()),
                found: features.nrows().to_string(),
            });
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn without_features(mut self) -> Self {
        self.features = None;
        self
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Number of stored directed edges, self loops included.
    pub fn num_edges(&self) -> usize {
        self.targets.len()
    }

    pub fn num_self_loops(&self) -> usize {
        self.self_loop.iter().filter(|&&s| s).count()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.targets[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn has_self_loop(&self, node: usize) -> bool {
        self.self_loop[node]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> Option<&Array2<f64>> {
        self.features.as_ref()
    }

    pub fn directedness(&self) -> Directedness {
        self.directedness
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// All stored directed edges `(u, v)` in row order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes()).flat_map(move |u| self.neighbors(u).iter().map(move |&v| (u, v)))
    }

    /// Directed edges excluding self loops.
    pub fn proper_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges().filter(|(u, v)| u != v)
    }

    /// Undirected simple view: neighbor lists of the symmetrized graph with
    /// self loops removed.
    pub fn symmetrized_neighbors(&self) -> Vec<Vec<usize>> {
        let n = self.num_nodes();
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (u, v) in self.proper_edges() {
            lists[u].push(v);
            lists[v].push(u);
        }
        for list in &mut lists {
            list.sort_unstable();
            list.dedup();
        }
        lists
    }

    /// Same graph with a self loop on every node.
    pub fn with_self_loops(&self) -> LabeledGraph {
        let lists = (0..self.num_nodes())
            .map(|u| {
                let mut l = self.neighbors(u).to_vec();
                l.push(u);
                l
            })
            .collect();
        let mut g = Self::from_neighbor_lists(self.labels.clone(), self.num_classes, lists, self.directedness)
            .expect("existing graph is valid");
        g.features = self.features.clone();
        g.provenance = self.provenance.clone();
        g
    }

    /// Classes in `0..M` with no nodes.
    pub fn empty_classes(&self) -> Vec<usize> {
        let hist = self.class_histogram();
        (0..self.num_classes).filter(|&c| hist[c] == 0).collect()
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0; self.num_classes];
        for &l in &self.labels {
            hist[l] += 1;
        }
        hist
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let n = self.num_nodes();
        let mut in_degree = vec![0; n];
        for &v in &self.targets {
            in_degree[v] += 1;
        }
        DegreeStats {
            out_degree: (0..n).map(|u| self.out_degree(u)).collect(),
            in_degree,
            self_loops: self.num_self_loops(),
            class_histogram: self.class_histogram(),
        }
    }
}

/// Degree summary. Out- and in-degrees count self loops; `self_loops` reports
/// them separately.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DegreeStats {
    pub out_degree: Vec<usize>,
    pub in_degree: Vec<usize>,
    pub self_loops: usize,
    pub class_histogram: Vec<usize>,
}

impl DegreeStats {
    /// Fraction of nodes in each class.
    pub fn class_weights(&self) -> Vec<f64> {
        let total: usize = self.class_histogram.iter().sum();
        if total == 0 {
            return vec![0.0; self.class_histogram.len()];
        }
        self.class_histogram.iter().map(|&c| c as f64 / total as f64).collect()
    }
}

pub fn degree_stats(g: &LabeledGraph) -> DegreeStats {
    g.degree_stats()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directed_cycle_degrees() {
        let g = LabeledGraph::from_edges(vec![0, 0, 0], 1, [(0, 1), (1, 2), (2, 0)], Directedness::Directed).unwrap();
        let s = g.degree_stats();
        assert_eq!(s.out_degree, vec![1, 1, 1]);
        assert_eq!(s.in_degree, vec![1, 1, 1]);
        assert_eq!(s.self_loops, 0);
    }

    #[test]
    fn lone_self_loop_counts_in_out_degree() {
        let g = LabeledGraph::from_edges(vec![0, 1], 2, [(0, 0)], Directedness::Directed).unwrap();
        let s = g.degree_stats();
        assert_eq!(s.out_degree[0], 1);
        assert_eq!(s.self_loops, 1);
        assert!(g.has_self_loop(0));
        assert!(!g.has_self_loop(1));
        assert_eq!(g.proper_edges().count(), 0);
    }

    #[test]
    fn balanced_two_class_histogram() {
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i >= 50)).collect();
        let g = LabeledGraph::from_edges(labels, 2, [], Directedness::Directed).unwrap();
        let s = g.degree_stats();
        assert_eq!(s.class_histogram, vec![50, 50]);
        assert_eq!(s.class_weights(), vec![0.5, 0.5]);
    }

    #[test]
    fn undirected_edges_are_mirrored_and_deduplicated() {
        let g = LabeledGraph::from_edges(vec![0, 0], 1, [(0, 1), (0, 1), (1, 0)], Directedness::Undirected).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
        assert_eq!(g.num_edges(), 2);
    }

    #[test]
    fn rejects_bad_labels_and_nodes() {
        assert!(matches!(
            LabeledGraph::from_edges(vec![0, 2], 2, [], Directedness::Directed),
            Err(GraphError::InvalidLabel { node: 1, label: 2, .. })
        ));
        assert!(matches!(
            LabeledGraph::from_edges(vec![0, 0], 1, [(0, 5)], Directedness::Directed),
            Err(GraphError::NodeOutOfRange { node: 5, .. })
        ));
    }

    #[test]
    fn feature_rows_must_match() {
        let g = LabeledGraph::from_edges(vec![0, 0], 1, [], Directedness::Directed).unwrap();
        assert!(matches!(g.with_features(Array2::zeros((3, 2))), Err(GraphError::ShapeMismatch { .. })));
    }

    #[test]
    fn empty_classes_detected() {
        let g = LabeledGraph::from_edges(vec![0, 2], 3, [], Directedness::Directed).unwrap();
        assert_eq!(g.empty_classes(), vec![1]);
    }
}
