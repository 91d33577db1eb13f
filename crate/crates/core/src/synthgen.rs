//! Synthetic labeled graphs with a prescribed interclass connectivity.
//!
//! Nodes are split into classes of fixed sizes. Every ordered pair of
//! distinct nodes `(u, v)` receives a directed edge independently with
//! probability `sparsity * P[label(u)][label(v)]`, and every node gets a self
//! loop. Features are i.i.d. standard normal unless a class signal is asked
//! for.

use crate::graph::{Directedness, LabeledGraph, Provenance};
use crate::metrics::{self, ConnectivityMatrix};
use crate::rng::RngStream;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const LABEL_STREAM: u64 = 1;
const EDGE_STREAM: u64 = 2;
const FEATURE_STREAM: u64 = 3;

pub const DEFAULT_FEATURE_DIM: usize = 16;

/// Connectivity matrix with low edge entropy (about 0.52 for equal classes).
pub const P_LOW: [[f64; 3]; 3] = [[0.8, 0.05, 0.15], [0.05, 0.9, 0.05], [0.27, 0.03, 0.7]];

/// Connectivity matrix with high edge entropy (about 0.974 for equal
/// classes). The last row sums to 1.01; presets normalize it.
pub const P_HIGH: [[f64; 3]; 3] = [[0.4, 0.26, 0.34], [0.2, 0.5, 0.3], [0.33, 0.31, 0.37]];

pub const DENSE_SPARSITY: f64 = 0.5;
pub const SPARSE_SPARSITY: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("row {row} of the count matrix sums to zero")]
    ZeroRow { row: usize },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("graph does not match config: {0}")]
    ConfigMismatch(String),
    #[error("unknown preset {0:?} (expected dense_low, sparse_low, dense_high or sparse_high)")]
    UnknownPreset(String),
}

/// How node features are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureModel {
    /// i.i.d. standard normal, independent of labels.
    #[default]
    Noise,
    /// Standard normal noise plus `strength` times a per-class standard normal
    /// centroid.
    ClassSignal { strength: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub num_nodes: usize,
    pub class_sizes: Vec<usize>,
    pub target_p: Vec<Vec<f64>>,
    pub sparsity: f64,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    #[serde(default)]
    pub features: FeatureModel,
    pub seed: u64,
    /// Symmetrize the sampled edges after generation.
    #[serde(default)]
    pub undirected: bool,
}

fn default_feature_dim() -> usize {
    DEFAULT_FEATURE_DIM
}

/// Row-normalizes a non-negative count matrix.
pub fn normalize_t(t: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, SynthError> {
    t.iter()
        .enumerate()
        .map(|(row, r)| {
            let total: f64 = r.iter().sum();
            if r.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                return Err(SynthError::InvalidConfig(format!("row {row} has a negative or non-finite count")));
            }
            if total <= 0.0 {
                return Err(SynthError::ZeroRow { row });
            }
            Ok(r.iter().map(|&x| x / total).collect())
        })
        .collect()
}

/// Splits `n` nodes into `m` classes as evenly as possible, larger classes
/// first.
pub fn equal_class_sizes(n: usize, m: usize) -> Vec<usize> {
    (0..m).map(|i| n / m + usize::from(i < n % m)).collect()
}

impl GeneratorConfig {
    pub fn new(class_sizes: Vec<usize>, target_p: Vec<Vec<f64>>, sparsity: f64, seed: u64) -> Self {
        GeneratorConfig {
            num_nodes: class_sizes.iter().sum(),
            class_sizes,
            target_p,
            sparsity,
            feature_dim: DEFAULT_FEATURE_DIM,
            features: FeatureModel::Noise,
            seed,
            undirected: false,
        }
    }

    /// Config whose target is the row-normalized count matrix `t`.
    pub fn from_counts(class_sizes: Vec<usize>, t: &[Vec<f64>], sparsity: f64, seed: u64) -> Result<Self, SynthError> {
        Ok(Self::new(class_sizes, normalize_t(t)?, sparsity, seed))
    }

    pub fn num_classes(&self) -> usize {
        self.class_sizes.len()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let m = self.num_classes();
        let bad = |msg: String| Err(SynthError::InvalidConfig(msg));
        if m == 0 {
            return bad("at least one class is required".into());
        }
        if self.class_sizes.iter().sum::<usize>() != self.num_nodes {
            return bad(format!(
                "class sizes sum to {} but num_nodes is {}",
                self.class_sizes.iter().sum::<usize>(),
                self.num_nodes
            ));
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return bad(format!("sparsity {} outside [0, 1]", self.sparsity));
        }
        if self.target_p.len() != m || self.target_p.iter().any(|r| r.len() != m) {
            return bad(format!("target_p must be {m}x{m}"));
        }
        for (i, row) in self.target_p.iter().enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return bad(format!("target_p row {i} has an entry outside [0, 1]"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return bad(format!("target_p row {i} sums to {s}, not 1"));
            }
        }
        if let FeatureModel::ClassSignal { strength } = self.features {
            if !strength.is_finite() {
                return bad("feature signal strength must be finite".into());
            }
        }
        Ok(())
    }

    /// Expected number of non-self-loop directed edges before symmetrization.
    pub fn expected_edges(&self) -> f64 {
        let r = &self.class_sizes;
        let mut total = 0.0;
        for l in 0..r.len() {
            for m in 0..r.len() {
                let pairs = r[l] as f64 * (r[m] as f64 - if l == m { 1.0 } else { 0.0 });
                total += pairs * self.sparsity * self.target_p[l][m];
            }
        }
        total
    }

    /// Binomial variance of the non-self-loop edge count.
    pub fn edge_count_variance(&self) -> f64 {
        let r = &self.class_sizes;
        let mut total = 0.0;
        for l in 0..r.len() {
            for m in 0..r.len() {
                let pairs = r[l] as f64 * (r[m] as f64 - if l == m { 1.0 } else { 0.0 });
                let p = self.sparsity * self.target_p[l][m];
                total += pairs * p * (1.0 - p);
            }
        }
        total
    }

    /// Edge entropy implied by the target matrix and the class sizes.
    pub fn target_entropy(&self) -> f64 {
        let n = self.num_nodes.max(1) as f64;
        let weights: Vec<f64> = self.class_sizes.iter().map(|&r| r as f64 / n).collect();
        self.target_p
            .iter()
            .zip(&weights)
            .map(|(row, w)| metrics::row_entropy(row) * w)
            .sum()
    }
}

/// Named configurations: three equal classes, dense (0.5) or sparse
/// (0.1), low or high entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    DenseLow,
    SparseLow,
    DenseHigh,
    SparseHigh,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::DenseLow, Preset::SparseLow, Preset::DenseHigh, Preset::SparseHigh];

    pub fn name(self) -> &'static str {
        match self {
            Preset::DenseLow => "dense_low",
            Preset::SparseLow => "sparse_low",
            Preset::DenseHigh => "dense_high",
            Preset::SparseHigh => "sparse_high",
        }
    }

    pub fn parse(name: &str) -> Result<Preset, SynthError> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| SynthError::UnknownPreset(name.to_string()))
    }

    pub fn sparsity(self) -> f64 {
        match self {
            Preset::DenseLow | Preset::DenseHigh => DENSE_SPARSITY,
            Preset::SparseLow | Preset::SparseHigh => SPARSE_SPARSITY,
        }
    }

    pub fn target_p(self) -> Vec<Vec<f64>> {
        let raw = match self {
            Preset::DenseLow | Preset::SparseLow => P_LOW,
            Preset::DenseHigh | Preset::SparseHigh => P_HIGH,
        };
        let rows: Vec<Vec<f64>> = raw.iter().map(|r| r.to_vec()).collect();
        normalize_t(&rows).expect("preset rows are positive")
    }

    /// Config with `num_nodes` split into three equal classes.
    pub fn config(self, num_nodes: usize, seed: u64) -> GeneratorConfig {
        GeneratorConfig::new(equal_class_sizes(num_nodes, 3), self.target_p(), self.sparsity(), seed)
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub fn generate(cfg: &GeneratorConfig) -> Result<LabeledGraph, SynthError> {
    cfg.validate()?;
    let n = cfg.num_nodes;
    let root = RngStream::new(cfg.seed, 0);

    let mut labels: Vec<usize> = cfg
        .class_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &r)| std::iter::repeat_n(c, r))
        .collect();
    labels.shuffle(&mut root.derive(LABEL_STREAM));

    let probs: Vec<Vec<f64>> = cfg
        .target_p
        .iter()
        .map(|row| row.iter().map(|&p| cfg.sparsity * p).collect())
        .collect();
    // each source node draws from its own stream, so the result does not
    // depend on how rayon splits the work
    let lists: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|u| {
            let mut rng = root.derive2(EDGE_STREAM, u as u64);
            let row = &probs[labels[u]];
            let mut out = vec![u];
            for v in 0..n {
                if v != u && rng.random::<f64>() < row[labels[v]] {
                    out.push(v);
                }
            }
            out
        })
        .collect();

    let num_classes = cfg.num_classes();
    let mut g = if cfg.undirected {
        let edges = lists.iter().enumerate().flat_map(|(u, l)| l.iter().map(move |&v| (u, v)));
        LabeledGraph::from_edges(labels, num_classes, edges, Directedness::Undirected)
    } else {
        LabeledGraph::from_neighbor_lists(labels, num_classes, lists, Directedness::Directed)
    }
    .expect("generated graph is valid");

    if cfg.feature_dim > 0 {
        let x = draw_features(&mut root.derive(FEATURE_STREAM), g.labels(), num_classes, cfg.feature_dim, cfg.features);
        g = g.with_features(x).expect("feature rows match");
    }
    Ok(g.with_provenance(Provenance {
        seed: Some(cfg.seed),
        generator: Some(serde_json::to_value(cfg).expect("config serializes")),
        id_map: None,
    }))
}

/// Draws an `N x dim` feature matrix for the given labels.
pub fn draw_features(rng: &mut RngStream, labels: &[usize], num_classes: usize, dim: usize, model: FeatureModel) -> Array2<f64> {
    let centroids: Option<Array2<f64>> = match model {
        FeatureModel::Noise => None,
        FeatureModel::ClassSignal { strength } => Some(Array2::from_shape_simple_fn((num_classes, dim), || {
            strength * rng.sample::<f64, _>(StandardNormal)
        })),
    };
    let mut x = Array2::from_shape_simple_fn((labels.len(), dim), || rng.sample::<f64, _>(StandardNormal));
    if let Some(c) = centroids {
        for (mut row, &l) in x.rows_mut().into_iter().zip(labels) {
            row += &c.row(l);
        }
    }
    x
}

/// Label-independent directed `G(n, p)` with a self loop on every node.
pub fn erdos_renyi_baseline(n: usize, p: f64, labels: &[usize], num_classes: usize, seed: u64) -> Result<LabeledGraph, SynthError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SynthError::InvalidConfig(format!("edge probability {p} outside [0, 1]")));
    }
    if labels.len() != n {
        return Err(SynthError::InvalidConfig(format!("{} labels for {n} nodes", labels.len())));
    }
    let root = RngStream::new(seed, 0);
    let lists: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|u| {
            let mut rng = root.derive2(EDGE_STREAM, u as u64);
            let mut out = vec![u];
            for v in 0..n {
                if v != u && rng.random::<f64>() < p {
                    out.push(v);
                }
            }
            out
        })
        .collect();
    let g = LabeledGraph::from_neighbor_lists(labels.to_vec(), num_classes, lists, Directedness::Directed)
        .map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    Ok(g.with_provenance(Provenance {
        seed: Some(seed),
        generator: Some(serde_json::json!({ "erdos_renyi": { "n": n, "p": p } })),
        id_map: None,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationReport {
    pub target_entropy: f64,
    pub realized_entropy: f64,
    /// Largest `|P_realized - P_target|` over valid rows; `None` when no row is valid.
    pub max_deviation: Option<f64>,
    pub row_deviation: Vec<Option<f64>>,
    /// Classes with no outgoing non-self-loop edges.
    pub invalid_rows: Vec<usize>,
    pub degenerate: bool,
    pub tolerance: f64,
    pub within_tolerance: bool,
    pub weak_components: usize,
    pub realized_p: Vec<Vec<f64>>,
}

/// Compares a generated graph against the config it came from.
pub fn verify_realization(g: &LabeledGraph, cfg: &GeneratorConfig, tolerance: f64) -> Result<RealizationReport, SynthError> {
    if g.num_classes() != cfg.num_classes() {
        return Err(SynthError::ConfigMismatch(format!(
            "graph has {} classes, config {}",
            g.num_classes(),
            cfg.num_classes()
        )));
    }
    if g.num_nodes() != cfg.num_nodes {
        return Err(SynthError::ConfigMismatch(format!(
            "graph has {} nodes, config {}",
            g.num_nodes(),
            cfg.num_nodes
        )));
    }
    let c: ConnectivityMatrix = metrics::connectivity(g);
    let weights = g.degree_stats().class_weights();
    let (_, realized_entropy) = metrics::weighted_entropy(&c, &weights);
    let row_deviation: Vec<Option<f64>> = (0..c.num_classes())
        .map(|l| {
            c.row_valid[l].then(|| {
                c.probs[l]
                    .iter()
                    .zip(&cfg.target_p[l])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
        })
        .collect();
    let max_deviation = row_deviation.iter().flatten().copied().reduce(f64::max);
    let invalid_rows: Vec<usize> = (0..c.num_classes()).filter(|&l| !c.row_valid[l]).collect();
    let target_entropy = cfg.target_entropy();
    let degenerate = !invalid_rows.is_empty();
    Ok(RealizationReport {
        target_entropy,
        realized_entropy,
        max_deviation,
        row_deviation,
        degenerate,
        within_tolerance: !degenerate && (realized_entropy - target_entropy).abs() <= tolerance,
        invalid_rows,
        tolerance,
        weak_components: weak_components(g),
        realized_p: c.probs,
    })
}

/// Number of weakly connected components.
pub fn weak_components(g: &LabeledGraph) -> usize {
    let n = g.num_nodes();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = n;
    for (u, v) in g.proper_edges() {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a != b {
            parent[a.max(b)] = a.min(b);
            components -= 1;
        }
    }
    components
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        let p = normalize_t(&[vec![48.0, 2.0], vec![2.0, 48.0]]).unwrap();
        assert_eq!(p, vec![vec![0.96, 0.04], vec![0.04, 0.96]]);
        let p = normalize_t(&[vec![5.0, 0.0], vec![0.0, 5.0]]).unwrap();
        assert_eq!(p, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let p = normalize_t(&[vec![1.0; 3], vec![1.0; 3], vec![1.0; 3]]).unwrap();
        assert!(p.iter().flatten().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(normalize_t(&[vec![1.0, 1.0], vec![0.0, 0.0]]), Err(SynthError::ZeroRow { row: 1 }));
    }

    #[test]
    fn validation() {
        let mut cfg = Preset::DenseLow.config(30, 1);
        assert!(cfg.validate().is_ok());
        cfg.num_nodes = 31;
        assert!(matches!(cfg.validate(), Err(SynthError::InvalidConfig(_))));
        let mut cfg = Preset::DenseLow.config(30, 1);
        cfg.sparsity = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = Preset::DenseHigh.config(30, 1);
        cfg.target_p = P_HIGH.iter().map(|r| r.to_vec()).collect();
        assert!(cfg.validate().is_err(), "unnormalized P_HIGH row must be rejected");
    }

    #[test]
    fn identity_target_gives_pure_classes() {
        let cfg = GeneratorConfig::new(vec![10, 10], vec![vec![1.0, 0.0], vec![0.0, 1.0]], 1.0, 3);
        let g = generate(&cfg).unwrap();
        assert_eq!(metrics::intra_class_ratio(&g), Ok(1.0));
        assert_eq!(metrics::edge_entropy(&g).edge_entropy, 0.0);
        // complete within classes
        assert_eq!(g.proper_edges().count(), 2 * 10 * 9);
    }

    #[test]
    fn every_node_has_a_self_loop_and_features() {
        let g = generate(&Preset::SparseLow.config(60, 9)).unwrap();
        assert_eq!(g.num_self_loops(), 60);
        assert_eq!(g.features().unwrap().dim(), (60, DEFAULT_FEATURE_DIM));
        assert_eq!(g.class_histogram(), vec![20, 20, 20]);
    }

    #[test]
    fn deterministic() {
        let cfg = Preset::DenseHigh.config(120, 42);
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = Preset::DenseHigh.config(120, 43);
        assert_ne!(generate(&cfg).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn empty_graph_is_degenerate() {
        let mut cfg = Preset::DenseLow.config(30, 1);
        cfg.sparsity = 0.0;
        let g = generate(&cfg).unwrap();
        assert_eq!(g.num_edges(), 30);
        let r = verify_realization(&g, &cfg, 0.01).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.invalid_rows, vec![0, 1, 2]);
        assert_eq!(r.max_deviation, None);
        assert!(!r.within_tolerance);
        assert_eq!(r.weak_components, 30);
    }

    #[test]
    fn realized_p_is_a_fixed_point() {
        let cfg = Preset::DenseLow.config(90, 5);
        let g = generate(&cfg).unwrap();
        let first = verify_realization(&g, &cfg, 0.05).unwrap();
        let mut refed = cfg.clone();
        refed.target_p = first.realized_p.clone();
        let second = verify_realization(&g, &refed, 0.05).unwrap();
        assert!(second.max_deviation.unwrap() < 1e-15);
    }

    #[test]
    fn class_mismatch() {
        let cfg = Preset::DenseLow.config(30, 1);
        let g = generate(&cfg).unwrap();
        let two = GeneratorConfig::new(vec![15, 15], vec![vec![1.0, 0.0], vec![0.0, 1.0]], 0.5, 1);
        assert!(matches!(verify_realization(&g, &two, 0.01), Err(SynthError::ConfigMismatch(_))));
    }

    #[test]
    fn erdos_renyi_extremes() {
        let labels: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let empty = erdos_renyi_baseline(10, 0.0, &labels, 2, 1).unwrap();
        assert_eq!(empty.num_edges(), 10);
        assert_eq!(empty.num_self_loops(), 10);
        let full = erdos_renyi_baseline(10, 1.0, &labels, 2, 1).unwrap();
        assert_eq!(full.proper_edges().count(), 90);
        // each node sees 4 same-class and 5 other-class neighbors
        let c = metrics::connectivity(&full);
        assert_eq!(c.counts, vec![vec![20, 25], vec![25, 20]]);
        assert!(erdos_renyi_baseline(10, 1.5, &labels, 2, 1).is_err());
    }

    #[test]
    fn undirected_option_symmetrizes() {
        let mut cfg = Preset::SparseHigh.config(60, 2);
        cfg.undirected = true;
        let g = generate(&cfg).unwrap();
        for (u, v) in g.edges() {
            assert!(g.has_edge(v, u));
        }
    }

    #[test]
    fn class_signal_shifts_means() {
        let labels: Vec<usize> = (0..3000).map(|i| i % 3).collect();
        let x = draw_features(&mut RngStream::new(1, 0), &labels, 3, 4, FeatureModel::ClassSignal { strength: 2.0 });
        let class_mean = |c: usize, d: usize| (c..3000).step_by(3).map(|i| x[[i, d]]).sum::<f64>() / 1000.0;
        let gap: f64 = (0..4).map(|d| (class_mean(0, d) - class_mean(1, d)).powi(2)).sum::<f64>().sqrt();
        assert!(gap > 0.5, "gap {gap}");
        // noise model has no class structure
        let y = draw_features(&mut RngStream::new(1, 0), &labels, 3, 4, FeatureModel::Noise);
        let noise_gap: f64 = (0..4)
            .map(|d| {
                let m = |c: usize| (c..3000).step_by(3).map(|i| y[[i, d]]).sum::<f64>() / 1000.0;
                (m(0) - m(1)).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        assert!(noise_gap < 0.25, "noise gap {noise_gap}");
    }
}
