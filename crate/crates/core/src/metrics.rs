//! Label-structure metrics: interclass connectivity, edge entropy,
//! intra-class ratio and clustering coefficient.
//!
//! All edge-based quantities are computed over directed edges with self
//! loops removed. An undirected graph contributes both directions of every
//! edge.

use crate::graph::LabeledGraph;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("class index {index} out of range for {num_classes} classes")]
    Index { index: usize, num_classes: usize },
    #[error("graph has no edges other than self loops")]
    DegenerateGraph,
}

/// Interclass edge counts and their row-normalized probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityMatrix {
    /// `counts[l][m]`: directed non-self-loop edges from class `l` to class `m`.
    pub counts: Vec<Vec<u64>>,
    /// `probs[l][m] = counts[l][m] / sum_m counts[l][m]`, all zeros on invalid rows.
    pub probs: Vec<Vec<f64>>,
    /// False when class `l` has no outgoing non-self-loop edges.
    pub row_valid: Vec<bool>,
}

impl ConnectivityMatrix {
    /// Builds the matrix from raw counts.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Self {
        let mut probs = Vec::with_capacity(counts.len());
        let mut row_valid = Vec::with_capacity(counts.len());
        for row in &counts {
            let total: u64 = row.iter().sum();
            row_valid.push(total > 0);
            probs.push(if total > 0 {
                row.iter().map(|&c| c as f64 / total as f64).collect()
            } else {
                vec![0.0; row.len()]
            });
        }
        ConnectivityMatrix {
            counts,
            probs,
            row_valid,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total_edges(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

pub fn connectivity(g: &LabeledGraph) -> ConnectivityMatrix {
    let m = g.num_classes();
    let labels = g.labels();
    // Integer tallies, so the parallel reduction is exact regardless of order.
    let flat = (0..g.num_nodes())
        .into_par_iter()
        .fold(
            || vec![0u64; m * m],
            |mut acc, u| {
                let row = labels[u] * m;
                for &v in g.neighbors(u) {
                    if v != u {
                        acc[row + labels[v]] += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; m * m],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let counts = flat.chunks(m.max(1)).take(m).map(<[u64]>::to_vec).collect();
    ConnectivityMatrix::from_counts(counts)
}

/// Entropy of a probability row in base `M`, where `M` is the row length.
///
/// Uses `0 log 0 = 0`. Rows of length 1 have entropy 0.
pub fn row_entropy(row: &[f64]) -> f64 {
    let m = row.len();
    if m <= 1 {
        return 0.0;
    }
    let log_m = (m as f64).ln();
    let h: f64 = row
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum::<f64>()
        / log_m;
    // abs turns the -0 of a certain row into 0
    h.clamp(0.0, 1.0).abs()
}

/// Per-class edge entropy `H(l)`. Invalid rows (no outgoing edges) give 0.
pub fn per_class_entropy(c: &ConnectivityMatrix, class: usize) -> Result<f64, MetricsError> {
    let num_classes = c.num_classes();
    if class >= num_classes {
        return Err(MetricsError::Index {
            index: class,
            num_classes,
        });
    }
    if !c.row_valid[class] {
        return Ok(0.0);
    }
    Ok(row_entropy(&c.probs[class]))
}

/// Class-weighted edge entropy from a connectivity matrix and class weights.
pub fn weighted_entropy(c: &ConnectivityMatrix, weights: &[f64]) -> (Vec<f64>, f64) {
    let per_class: Vec<f64> = (0..c.num_classes())
        .map(|l| per_class_entropy(c, l).expect("index in range"))
        .collect();
    let total = per_class.iter().zip(weights).map(|(h, w)| h * w).sum::<f64>();
    (per_class, total.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub edge_entropy: f64,
    pub per_class: Vec<f64>,
    pub class_weights: Vec<f64>,
    /// `None` when the graph has no non-self-loop edges.
    pub intra_class_ratio: Option<f64>,
    pub clustering_coefficient: f64,
    pub connectivity_counts: Vec<Vec<u64>>,
    pub connectivity_probs: Vec<Vec<f64>>,
}

/// Computes the full label-structure report for `g`.
pub fn edge_entropy(g: &LabeledGraph) -> EntropyReport {
    let c = connectivity(g);
    let weights = g.degree_stats().class_weights();
    let (per_class, h) = weighted_entropy(&c, &weights);
    EntropyReport {
        edge_entropy: h,
        per_class,
        class_weights: weights,
        intra_class_ratio: intra_class_ratio(g).ok(),
        clustering_coefficient: clustering_coefficient(g),
        connectivity_counts: c.counts,
        connectivity_probs: c.probs,
    }
}

/// Fraction of non-self-loop directed edges whose endpoints share a class.
pub fn intra_class_ratio(g: &LabeledGraph) -> Result<f64, MetricsError> {
    let (same, total) = g
        .proper_edges()
        .fold((0u64, 0u64), |(s, t), (u, v)| (s + u64::from(g.label(u) == g.label(v)), t + 1));
    if total == 0 {
        return Err(MetricsError::DegenerateGraph);
    }
    Ok(same as f64 / total as f64)
}

/// Nodes above this count use merge-based triangle counting instead of dense
/// adjacency bitsets.
const BITSET_NODE_LIMIT: usize = 16_384;

/// Mean local clustering coefficient of the symmetrized simple graph.
/// Nodes of degree below 2 contribute 0 and every node is averaged.
pub fn clustering_coefficient(g: &LabeledGraph) -> f64 {
    let n = g.num_nodes();
    if n == 0 {
        return 0.0;
    }
    let adj = g.symmetrized_neighbors();
    let local: Vec<f64> = if n <= BITSET_NODE_LIMIT {
        let words = n.div_ceil(64);
        let bits: Vec<Vec<u64>> = adj
            .par_iter()
            .map(|list| {
                let mut row = vec![0u64; words];
                for &v in list {
                    row[v / 64] |= 1 << (v % 64);
                }
                row
            })
            .collect();
        (0..n)
            .into_par_iter()
            .map(|v| {
                let links: u64 = adj[v]
                    .iter()
                    .map(|&u| {
                        bits[v]
                            .iter()
                            .zip(&bits[u])
                            .map(|(a, b)| u64::from((a & b).count_ones()))
                            .sum::<u64>()
                    })
                    .sum();
                local_coefficient(adj[v].len(), links / 2)
            })
            .collect()
    } else {
        (0..n)
            .into_par_iter()
            .map(|v| {
                let links: u64 = adj[v].iter().map(|&u| sorted_intersection(&adj[v], &adj[u])).sum();
                local_coefficient(adj[v].len(), links / 2)
            })
            .collect()
    };
    // sequential sum keeps the result independent of thread scheduling
    local.iter().sum::<f64>() / n as f64
}

fn local_coefficient(degree: usize, triangles: u64) -> f64 {
    if degree < 2 {
        return 0.0;
    }
    let possible = (degree * (degree - 1) / 2) as f64;
    triangles as f64 / possible
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> u64 {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}
