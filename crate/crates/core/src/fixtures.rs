//! Small two-class graphs that separate edge entropy from label-blind
//! metrics. Class 0 is "blue", class 1 is "red"; all graphs are undirected.

use crate::graph::{Directedness, LabeledGraph};
use crate::rng::RngStream;
use rand::Rng;

fn clique_edges(nodes: &[usize]) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for (i, &u) in nodes.iter().enumerate() {
        for &v in &nodes[i + 1..] {
            edges.push((u, v));
        }
    }
    edges
}

fn undirected(labels: Vec<usize>, edges: Vec<(usize, usize)>) -> LabeledGraph {
    LabeledGraph::from_edges(labels, 2, edges, Directedness::Undirected).expect("fixture is well formed")
}

/// A blue 4-clique and a disjoint red 4-clique: neighbors always share a class.
pub fn two_cliques() -> LabeledGraph {
    let mut edges = clique_edges(&[0, 1, 2, 3]);
    edges.extend(clique_edges(&[4, 5, 6, 7]));
    undirected(vec![0, 0, 0, 0, 1, 1, 1, 1], edges)
}

/// Random graph with labels drawn independently of the edges.
pub fn random_mixing(n: usize, p: f64, seed: u64) -> LabeledGraph {
    let mut rng = RngStream::new(seed, 0);
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    undirected(labels, edges)
}

/// Complete bipartite graph between 4 blue and 4 red nodes: neighbors never
/// share a class.
pub fn bipartite() -> LabeledGraph {
    let mut edges = Vec::new();
    for u in 0..4 {
        for v in 4..8 {
            edges.push((u, v));
        }
    }
    undirected(vec![0, 0, 0, 0, 1, 1, 1, 1], edges)
}

/// One 4-clique with two blue and two red nodes.
pub fn mixed_clique() -> LabeledGraph {
    undirected(vec![0, 0, 1, 1], clique_edges(&[0, 1, 2, 3]))
}

/// Disjoint 4-cliques with mixed labels, balanced so that every class sends
/// exactly half of its edges to each class. Clustering is 1, edge entropy 1.
///
/// Three cliques hold two blue and two red nodes, one is all blue and two
/// hold one blue and three red nodes.
pub fn mixed_cliques() -> LabeledGraph {
    let compositions = [2, 2, 2, 4, 1, 1];
    let mut labels = Vec::new();
    let mut edges = Vec::new();
    for blue in compositions {
        let start = labels.len();
        labels.extend((0..4).map(|i| usize::from(i >= blue)));
        edges.extend(clique_edges(&[start, start + 1, start + 2, start + 3]));
    }
    undirected(labels, edges)
}
