//! Reading and writing graphs as plain text files.
//!
//! Layout of a graph directory:
//!
//! * `edges.txt`: one `src dst` pair per line, `#` starts a comment
//! * `labels.txt`: one `node class` pair per line
//! * `features.csv`: optional, row `i` holds the features of node `i`
//! * `manifest.json`: node/class counts, directedness, seed and generator

use super::{Directedness, GraphError, LabeledGraph, Provenance};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const EDGE_FILE: &str = "edges.txt";
pub const LABEL_FILE: &str = "labels.txt";
pub const FEATURE_FILE: &str = "features.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone)]
pub struct GraphFiles {
    pub edges: PathBuf,
    pub labels: PathBuf,
    pub features: Option<PathBuf>,
}

impl GraphFiles {
    pub fn new(edges: impl Into<PathBuf>, labels: impl Into<PathBuf>) -> Self {
        GraphFiles {
            edges: edges.into(),
            labels: labels.into(),
            features: None,
        }
    }

    pub fn with_features(mut self, features: impl Into<PathBuf>) -> Self {
        self.features = Some(features.into());
        self
    }

    /// Standard file names inside `dir`; the feature file is included only if
    /// it exists.
    pub fn in_dir(dir: &Path) -> Self {
        let features = dir.join(FEATURE_FILE);
        GraphFiles {
            edges: dir.join(EDGE_FILE),
            labels: dir.join(LABEL_FILE),
            features: features.exists().then_some(features),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Compact sparse external ids into `0..N` and keep the original ids in
    /// the graph's provenance.
    pub remap_ids: bool,
    /// Lower bound on the class count; labels may leave high classes empty.
    pub min_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub num_nodes: usize,
    pub num_classes: usize,
    pub directed: bool,
    pub seed: Option<u64>,
    pub generator: Option<serde_json::Value>,
    /// `null` when the graph carries no features.
    pub features: Option<FeatureInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id_map: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub dim: usize,
    pub file: String,
}

/// Loads a graph from an edge list, a label list and an optional feature CSV.
pub fn load_graph(files: &GraphFiles, directedness: Directedness) -> Result<LabeledGraph, GraphError> {
    load_graph_with(files, directedness, LoadOptions::default())
}

pub fn load_graph_with(
    files: &GraphFiles,
    directedness: Directedness,
    opts: LoadOptions,
) -> Result<LabeledGraph, GraphError> {
    let raw_edges = read_pairs(&files.edges)?;
    let raw_labels = read_pairs(&files.labels)?;

    let id_map: Option<Vec<u64>> = opts.remap_ids.then(|| {
        let mut ids: Vec<u64> = raw_edges
            .iter()
            .flat_map(|&(u, v)| [u, v])
            .chain(raw_labels.iter().map(|&(u, _)| u))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    });
    let dense = |id: u64| -> usize {
        match &id_map {
            Some(map) => map.binary_search(&id).expect("id collected above"),
            None => id as usize,
        }
    };

    let num_nodes = match &id_map {
        Some(map) => map.len(),
        None => raw_edges
            .iter()
            .flat_map(|&(u, v)| [u, v])
            .chain(raw_labels.iter().map(|&(u, _)| u))
            .max()
            .map_or(0, |m| m as usize + 1),
    };

    let mut labels: Vec<Option<usize>> = vec![None; num_nodes];
    for &(node, class) in &raw_labels {
        let node = dense(node);
        let class = class as usize;
        match labels[node] {
            Some(prev) if prev != class => {
                return Err(GraphError::ConflictingLabel {
                    node,
                    first: prev,
                    second: class,
                })
            }
            _ => labels[node] = Some(class),
        }
    }
    // nodes referenced by edges are reported first
    for &(u, v) in &raw_edges {
        for node in [dense(u), dense(v)] {
            if labels[node].is_none() {
                return Err(GraphError::MissingLabel { node });
            }
        }
    }
    let labels: Vec<usize> = labels
        .into_iter()
        .enumerate()
        .map(|(node, l)| l.ok_or(GraphError::MissingLabel { node }))
        .collect::<Result<_, _>>()?;
    let num_classes = labels
        .iter()
        .max()
        .map_or(0, |&m| m + 1)
        .max(opts.min_classes);

    let edges = raw_edges.iter().map(|&(u, v)| (dense(u), dense(v)));
    let mut g = LabeledGraph::from_edges(labels, num_classes, edges, directedness)?;
    if let Some(path) = &files.features {
        g = g.with_features(read_features(path)?)?;
    }
    if id_map.is_some() {
        g = g.with_provenance(Provenance {
            id_map,
            ..Provenance::default()
        });
    }
    Ok(g)
}

/// Loads a directory written by [`save_graph`], honoring its manifest. A
/// directory without a manifest is read as an undirected graph.
pub fn load_dir(dir: &Path) -> Result<LabeledGraph, GraphError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: Option<Manifest> = if manifest_path.exists() {
        let text = fs::read_to_string(&manifest_path).map_err(|source| GraphError::Io {
            path: manifest_path.clone(),
            source,
        })?;
        Some(serde_json::from_str(&text).map_err(|e| GraphError::Manifest(format!("{}: {e}", manifest_path.display())))?)
    } else {
        None
    };
    let mut files = GraphFiles::in_dir(dir);
    let directedness = match &manifest {
        Some(m) if m.directed => Directedness::Directed,
        _ => Directedness::Undirected,
    };
    let Some(m) = manifest else {
        return load_graph(&files, directedness);
    };
    files.features = m.features.as_ref().map(|f| dir.join(&f.file));
    let g = load_graph_with(
        &files,
        directedness,
        LoadOptions {
            remap_ids: false,
            min_classes: m.num_classes,
        },
    )?;
    if g.num_nodes() != m.num_nodes {
        return Err(GraphError::ShapeMismatch {
            expected: format!("{} nodes (manifest)", m.num_nodes),
            found: g.num_nodes().to_string(),
        });
    }
    Ok(g.with_provenance(Provenance {
        seed: m.seed,
        generator: m.generator,
        id_map: m.id_map,
    }))
}

/// Writes `g` into `dir` (created if needed) in the format read by
/// [`load_dir`].
pub fn save_graph(g: &LabeledGraph, dir: &Path) -> Result<Manifest, GraphError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| GraphError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let edge_path = dir.join(EDGE_FILE);
    let mut w = BufWriter::new(fs::File::create(&edge_path).map_err(io_err(&edge_path))?);
    for (u, v) in g.edges() {
        writeln!(w, "{u} {v}").map_err(io_err(&edge_path))?;
    }
    w.flush().map_err(io_err(&edge_path))?;

    let label_path = dir.join(LABEL_FILE);
    let mut w = BufWriter::new(fs::File::create(&label_path).map_err(io_err(&label_path))?);
    for (node, label) in g.labels().iter().enumerate() {
        writeln!(w, "{node} {label}").map_err(io_err(&label_path))?;
    }
    w.flush().map_err(io_err(&label_path))?;

    let feature_path = dir.join(FEATURE_FILE);
    let features = match g.features() {
        Some(x) => {
            let mut w = BufWriter::new(fs::File::create(&feature_path).map_err(io_err(&feature_path))?);
            for row in x.rows() {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{}", line.join(",")).map_err(io_err(&feature_path))?;
            }
            w.flush().map_err(io_err(&feature_path))?;
            Some(FeatureInfo {
                dim: x.ncols(),
                file: FEATURE_FILE.to_string(),
            })
        }
        None => {
            if feature_path.exists() {
                fs::remove_file(&feature_path).map_err(io_err(&feature_path))?;
            }
            None
        }
    };

    let p = g.provenance();
    let manifest = Manifest {
        num_nodes: g.num_nodes(),
        num_classes: g.num_classes(),
        directed: g.directedness().is_directed(),
        seed: p.seed,
        generator: p.generator.clone(),
        features,
        id_map: p.id_map.clone(),
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, text + "\n").map_err(io_err(&manifest_path))?;
    Ok(manifest)
}

fn read_pairs(path: &Path) -> Result<Vec<(u64, u64)>, GraphError> {
    let text = fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let parse_err = |token: &str| GraphError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            token: token.to_string(),
        };
        if tokens.len() != 2 {
            return Err(parse_err(content.trim()));
        }
        let a = tokens[0].parse::<u64>().map_err(|_| parse_err(tokens[0]))?;
        let b = tokens[1].parse::<u64>().map_err(|_| parse_err(tokens[1]))?;
        out.push((a, b));
    }
    Ok(out)
}

fn read_features(path: &Path) -> Result<Array2<f64>, GraphError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut data = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(GraphError::ShapeMismatch {
                    expected: format!("{w} feature columns"),
                    found: format!("{} on line {line}", record.len()),
                })
            }
            _ => {}
        }
        for field in record.iter() {
            let v = field.parse::<f64>().map_err(|_| GraphError::Parse {
                path: path.to_path_buf(),
                line,
                token: field.to_string(),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, width.unwrap_or(0)), data).map_err(|e| GraphError::ShapeMismatch {
        expected: "rectangular feature matrix".into(),
        found: e.to_string(),
    })
}

fn csv_err(path: &Path, e: csv::Error) -> GraphError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => GraphError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => GraphError::Parse {
            path: path.to_path_buf(),
            line: 0,
            token: format!("{other:?}"),
        },
    }
}
