//! Monte Carlo comparison of a graph shift against a baseline shift.
//!
//! For every training fraction and trial a stratified split and an
//! initialization stream are derived from `(base_seed, trial, fraction)`.
//! Every shift mode is trained on that same split with that same
//! initialization, so the per-trial differences between modes are paired.
//! The improvement at a fraction is the mean accuracy of the first mode minus
//! the mean accuracy of the second.

use crate::gnn::{self, input_features, stratified_split, DecayMode, GnnError, NetConfig, ShiftKind, ShiftOperator, TrainOutcome};
use crate::graph::{self, GraphError, LabeledGraph};
use crate::metrics::{self, EntropyReport};
use crate::rng::{RngStream, RNG_ALGORITHM};
use crate::synthgen::{self, GeneratorConfig, Preset, SynthError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

const SPLIT_STREAM: u64 = 11;
const INIT_STREAM: u64 = 12;
const CONTROL_STREAM: u64 = 13;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("results do not share a common setup: {0}")]
    PlanMismatch(String),
    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Where the dataset of a plan comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    /// A graph directory in the `save_graph` layout.
    Path(PathBuf),
    Generate(GeneratorConfig),
    Preset {
        preset: Preset,
        num_nodes: usize,
        seed: u64,
    },
}

impl DatasetSource {
    pub fn load(&self) -> Result<LabeledGraph, ExperimentError> {
        Ok(match self {
            DatasetSource::Path(dir) => graph::load_dir(dir)?,
            DatasetSource::Generate(cfg) => synthgen::generate(cfg)?,
            DatasetSource::Preset { preset, num_nodes, seed } => synthgen::generate(&preset.config(*num_nodes, *seed))?,
        })
    }

    /// Resolves relative paths against `base`.
    fn rebase(&mut self, base: &Path) {
        if let DatasetSource::Path(p) = self {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// Graph used as the shift operator for one arm of the comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftMode {
    /// The dataset's own graph.
    Given,
    /// No graph: the identity shift.
    Identity,
    /// A label-independent random graph over the same nodes. Without `p` the
    /// edge density of the dataset graph is matched.
    ErdosRenyi { p: Option<f64>, seed: Option<u64> },
    /// Edges read from another graph directory with the same node count.
    File(PathBuf),
}

impl ShiftMode {
    pub fn label(&self) -> String {
        match self {
            ShiftMode::Given => "given".into(),
            ShiftMode::Identity => "identity".into(),
            ShiftMode::ErdosRenyi { .. } => "erdos_renyi".into(),
            ShiftMode::File(p) => format!("file:{}", p.display()),
        }
    }

    pub fn parse(text: &str) -> Result<ShiftMode, ExperimentError> {
        match text {
            "given" => Ok(ShiftMode::Given),
            "identity" => Ok(ShiftMode::Identity),
            "erdos_renyi" | "random" => Ok(ShiftMode::ErdosRenyi { p: None, seed: None }),
            other => match other.strip_prefix("file:") {
                Some(path) => Ok(ShiftMode::File(PathBuf::from(path))),
                None => Err(ExperimentError::InvalidPlan(format!("unknown shift mode {other:?}"))),
            },
        }
    }

    /// Builds the operator for this mode over `g`.
    pub fn operator(&self, g: &LabeledGraph, kind: ShiftKind, base_seed: u64) -> Result<ShiftOperator, ExperimentError> {
        let n = g.num_nodes();
        Ok(match self {
            ShiftMode::Given => ShiftOperator::from_graph(g, kind),
            ShiftMode::Identity => ShiftOperator::identity(n),
            ShiftMode::ErdosRenyi { p, seed } => {
                let p = p.unwrap_or_else(|| edge_density(g));
                let seed = seed.unwrap_or_else(|| RngStream::new(base_seed, CONTROL_STREAM).next_seed());
                let control = synthgen::erdos_renyi_baseline(n, p, g.labels(), g.num_classes(), seed)?;
                ShiftOperator::from_graph(&control, kind)
            }
            ShiftMode::File(dir) => {
                let other = graph::load_dir(dir)?;
                if other.num_nodes() != n {
                    return Err(ExperimentError::InvalidPlan(format!(
                        "shift graph {} has {} nodes, dataset has {n}",
                        dir.display(),
                        other.num_nodes()
                    )));
                }
                ShiftOperator::from_graph(&other, kind)
            }
        })
    }
}

/// Fraction of ordered node pairs joined by a non-self-loop edge.
pub fn edge_density(g: &LabeledGraph) -> f64 {
    let n = g.num_nodes() as f64;
    if n < 2.0 {
        return 0.0;
    }
    g.proper_edges().count() as f64 / (n * (n - 1.0))
}

/// Architecture and optimizer settings shared by every trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub hidden: Vec<usize>,
    pub degree: usize,
    pub learning_rate: f64,
    pub decay: f64,
    #[serde(default)]
    pub decay_mode: DecayMode,
    pub epochs: usize,
    #[serde(default)]
    pub shift_kind: ShiftKind,
}

impl Default for ModelSpec {
    /// Two layers, two filter terms, 16 hidden units, 200 epochs.
    fn default() -> Self {
        ModelSpec {
            hidden: vec![16],
            degree: 2,
            learning_rate: 0.01,
            decay: 5e-4,
            decay_mode: DecayMode::L2,
            epochs: 200,
            shift_kind: ShiftKind::Normalized,
        }
    }
}

impl ModelSpec {
    pub fn net_config(&self, input_dim: usize, num_classes: usize) -> NetConfig {
        NetConfig {
            hidden: self.hidden.clone(),
            learning_rate: self.learning_rate,
            decay: self.decay,
            decay_mode: self.decay_mode,
            epochs: self.epochs,
            ..NetConfig::two_layer(input_dim, num_classes, self.degree)
        }
    }
}

pub fn default_fractions() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

fn default_trials() -> usize {
    100
}

fn default_modes() -> Vec<ShiftMode> {
    vec![ShiftMode::Given, ShiftMode::Identity]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub name: String,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// The first two modes define the improvement; further modes are
    /// reported alongside.
    #[serde(default = "default_modes")]
    pub modes: Vec<ShiftMode>,
}

impl ExperimentPlan {
    pub fn new(name: impl Into<String>, dataset: DatasetSource) -> Self {
        ExperimentPlan {
            name: name.into(),
            dataset,
            model: ModelSpec::default(),
            fractions: default_fractions(),
            trials: default_trials(),
            base_seed: 0,
            modes: default_modes(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidPlan(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.fractions.is_empty() {
            return bad("at least one training fraction is required".into());
        }
        if self.fractions.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
            return bad(format!("fractions must lie in (0, 1): {:?}", self.fractions));
        }
        if self.fractions.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("fractions must be strictly increasing: {:?}", self.fractions));
        }
        if self.modes.len() < 2 {
            return bad("at least two shift modes are required".into());
        }
        Ok(())
    }

    /// Number of training runs the plan performs.
    pub fn total_runs(&self) -> usize {
        self.fractions.len() * self.trials * self.modes.len()
    }
}

/// Accuracy statistics of one `(fraction, mode)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub fraction: f64,
    pub mode: String,
    /// Per-trial test accuracy, `None` for diverged trials.
    pub accuracies: Vec<Option<f64>>,
    pub mean: Option<f64>,
    /// Population standard deviation over valid trials.
    pub std: Option<f64>,
    pub valid_trials: usize,
    pub diverged_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionSummary {
    pub fraction: f64,
    /// Mean accuracy of the first mode minus mean accuracy of the second.
    pub improvement: Option<f64>,
    /// Per-trial differences where both modes produced an accuracy.
    pub paired_differences: Vec<f64>,
    pub paired_mean: Option<f64>,
    pub paired_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub plan: ExperimentPlan,
    pub rng_algorithm: String,
    pub num_nodes: usize,
    pub num_classes: usize,
    pub entropy: EntropyReport,
    /// Cells in `(fraction, mode)` order.
    pub cells: Vec<CellResult>,
    pub summaries: Vec<FractionSummary>,
}

impl ExperimentResult {
    pub fn name(&self) -> &str {
        &self.plan.name
    }

    pub fn cell(&self, fraction: f64, mode: &str) -> Option<&CellResult> {
        self.cells.iter().find(|c| same_fraction(c.fraction, fraction) && c.mode == mode)
    }

    pub fn summary(&self, fraction: f64) -> Option<&FractionSummary> {
        self.summaries.iter().find(|s| same_fraction(s.fraction, fraction))
    }

    pub fn improvement_at(&self, fraction: f64) -> Option<f64> {
        self.summary(fraction).and_then(|s| s.improvement)
    }

    /// Cells without a single valid trial.
    pub fn empty_cells(&self) -> Vec<&CellResult> {
        self.cells.iter().filter(|c| c.valid_trials == 0).collect()
    }
}

fn same_fraction(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

/// Mean and population standard deviation; `None` for an empty slice.
pub fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentResult, ExperimentError> {
    plan.validate()?;
    let g = plan.dataset.load()?;
    let entropy = metrics::edge_entropy(&g);
    let x = input_features(&g);
    let config = plan.model.net_config(x.ncols(), g.num_classes());
    config.validate()?;
    let shifts: Vec<ShiftOperator> = plan
        .modes
        .iter()
        .map(|m| m.operator(&g, plan.model.shift_kind, plan.base_seed))
        .collect::<Result<_, _>>()?;

    let tasks: Vec<(usize, usize, usize)> = (0..plan.fractions.len())
        .flat_map(|fi| (0..plan.trials).flat_map(move |t| (0..plan.modes.len()).map(move |m| (fi, t, m))))
        .collect();
    // collect() on an indexed parallel iterator keeps task order
    let outcomes: Vec<TrainOutcome> = tasks
        .par_iter()
        .map(|&(fi, trial, mode)| {
            let trial_rng = RngStream::new(plan.base_seed, trial as u64);
            let mut split_rng = trial_rng.derive2(SPLIT_STREAM, fi as u64);
            let split = stratified_split(g.labels(), g.num_classes(), plan.fractions[fi], &mut split_rng)?;
            let mut init_rng = trial_rng.derive2(INIT_STREAM, fi as u64);
            let (_, outcome) = gnn::train_with_shift(&config, &shifts[mode], &x, g.labels(), &split, &mut init_rng)?;
            Ok(outcome)
        })
        .collect::<Result<_, GnnError>>()?;

    let idx = |fi: usize, t: usize, m: usize| (fi * plan.trials + t) * plan.modes.len() + m;
    let mut cells = Vec::new();
    let mut summaries = Vec::new();
    for (fi, &fraction) in plan.fractions.iter().enumerate() {
        for (m, mode) in plan.modes.iter().enumerate() {
            let accuracies: Vec<Option<f64>> = (0..plan.trials).map(|t| outcomes[idx(fi, t, m)].accuracy).collect();
            let valid: Vec<f64> = accuracies.iter().flatten().copied().collect();
            let (mean, std) = mean_std(&valid);
            cells.push(CellResult {
                fraction,
                mode: mode.label(),
                valid_trials: valid.len(),
                diverged_trials: accuracies.len() - valid.len(),
                accuracies,
                mean,
                std,
            });
        }
        let first = &cells[cells.len() - plan.modes.len()];
        let second = &cells[cells.len() - plan.modes.len() + 1];
        let improvement = first.mean.zip(second.mean).map(|(a, b)| a - b);
        let paired_differences: Vec<f64> = first
            .accuracies
            .iter()
            .zip(&second.accuracies)
            .filter_map(|(a, b)| a.zip(*b).map(|(a, b)| a - b))
            .collect();
        let (paired_mean, paired_std) = mean_std(&paired_differences);
        summaries.push(FractionSummary {
            fraction,
            improvement,
            paired_differences,
            paired_mean,
            paired_std,
        });
    }

    Ok(ExperimentResult {
        plan: plan.clone(),
        rng_algorithm: RNG_ALGORITHM.to_string(),
        num_nodes: g.num_nodes(),
        num_classes: g.num_classes(),
        entropy,
        cells,
        summaries,
    })
}

/// One row of the entropy/improvement comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub dataset: String,
    pub edge_entropy: f64,
    pub intra_class_ratio: Option<f64>,
    pub clustering_coefficient: f64,
    pub improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementTable {
    pub fraction: f64,
    /// Sorted by edge entropy, ascending.
    pub rows: Vec<TableRow>,
    /// Spearman rank correlation between edge entropy and improvement;
    /// `None` when either column is constant or fewer than two rows have an
    /// improvement.
    pub spearman: Option<f64>,
}

pub fn entropy_improvement_table(results: &[ExperimentResult], fraction: f64) -> Result<ImprovementTable, ExperimentError> {
    if results.len() < 2 {
        return Err(ExperimentError::PlanMismatch(format!(
            "a comparison table needs at least two results, got {}",
            results.len()
        )));
    }
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        let summary = r.summary(fraction).ok_or_else(|| {
            ExperimentError::PlanMismatch(format!("{} has no results at training fraction {fraction}", r.name()))
        })?;
        rows.push(TableRow {
            dataset: r.name().to_string(),
            edge_entropy: r.entropy.edge_entropy,
            intra_class_ratio: r.entropy.intra_class_ratio,
            clustering_coefficient: r.entropy.clustering_coefficient,
            improvement: summary.improvement,
        });
    }
    rows.sort_by(|a, b| a.edge_entropy.total_cmp(&b.edge_entropy));
    let (hs, imps): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| r.improvement.map(|i| (r.edge_entropy, i)))
        .unzip();
    Ok(ImprovementTable {
        fraction,
        spearman: spearman(&hs, &imps),
        rows,
    })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    pearson(&ranks(a), &ranks(b))
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

/// One line of `curves.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub dataset: String,
    pub fraction: f64,
    pub mode: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub valid_trials: usize,
    pub improvement: Option<f64>,
}

/// Accuracy curve rows, one per `(fraction, mode)`.
pub fn sweep_curves(result: &ExperimentResult) -> Vec<CurveRow> {
    result
        .cells
        .iter()
        .map(|c| CurveRow {
            dataset: result.name().to_string(),
            fraction: c.fraction,
            mode: c.mode.clone(),
            mean: c.mean,
            std: c.std,
            valid_trials: c.valid_trials,
            improvement: result.improvement_at(c.fraction),
        })
        .collect()
}

/// A set of plans sharing one model and sweep, as stored in plan files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuitePlan {
    pub datasets: Vec<NamedDataset>,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_modes")]
    pub modes: Vec<ShiftMode>,
    /// Training fraction reported in the comparison table.
    #[serde(default)]
    pub table_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedDataset {
    pub name: String,
    pub source: DatasetSource,
}

impl SuitePlan {
    pub fn from_file(path: &Path) -> Result<SuitePlan, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut suite: SuitePlan =
            serde_json::from_str(&text).map_err(|e| ExperimentError::InvalidPlan(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut suite.datasets {
            d.source.rebase(base);
        }
        for m in &mut suite.modes {
            if let ShiftMode::File(p) = m {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(suite)
    }

    pub fn plans(&self) -> Vec<ExperimentPlan> {
        self.datasets
            .iter()
            .map(|d| ExperimentPlan {
                name: d.name.clone(),
                dataset: d.source.clone(),
                model: self.model.clone(),
                fractions: self.fractions.clone(),
                trials: self.trials,
                base_seed: self.base_seed,
                modes: self.modes.clone(),
            })
            .collect()
    }

    /// Fraction used for the comparison table: the configured one, else
    /// 0.3 when swept, else the first fraction.
    pub fn table_fraction(&self) -> f64 {
        self.table_fraction.unwrap_or_else(|| {
            self.fractions
                .iter()
                .copied()
                .find(|&f| same_fraction(f, 0.3))
                .unwrap_or(self.fractions[0])
        })
    }

    /// The four synthetic presets at the given scale.
    pub fn presets(num_nodes: usize, trials: usize, fractions: Vec<f64>, base_seed: u64) -> SuitePlan {
        SuitePlan {
            datasets: Preset::ALL
                .iter()
                .enumerate()
                .map(|(i, &preset)| NamedDataset {
                    name: preset.name().to_string(),
                    source: DatasetSource::Preset {
                        preset,
                        num_nodes,
                        seed: base_seed + i as u64,
                    },
                })
                .collect(),
            model: ModelSpec::default(),
            fractions,
            trials,
            base_seed,
            modes: default_modes(),
            table_fraction: Some(0.3),
        }
    }
}

trait NextSeed {
    fn next_seed(self) -> u64;
}

impl NextSeed for RngStream {
    fn next_seed(mut self) -> u64 {
        rand::RngCore::next_u64(&mut self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_monotone_and_ties() {
        assert_eq!(spearman(&[0.1, 0.5, 0.9], &[30.0, 20.0, 10.0]), Some(-1.0));
        assert_eq!(spearman(&[0.1, 0.5, 0.9], &[1.0, 2.0, 3.0]), Some(1.0));
        assert_eq!(spearman(&[0.5, 0.5], &[1.0, 1.0]), None);
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn mean_std_single_value() {
        assert_eq!(mean_std(&[0.4]), (Some(0.4), Some(0.0)));
        assert_eq!(mean_std(&[]), (None, None));
    }

    #[test]
    fn plan_validation() {
        let mut plan = ExperimentPlan::new("x", DatasetSource::Preset { preset: Preset::DenseLow, num_nodes: 30, seed: 0 });
        assert!(plan.validate().is_ok());
        plan.fractions = vec![0.5, 0.3];
        assert!(plan.validate().is_err());
        plan.fractions = vec![0.0, 0.3];
        assert!(plan.validate().is_err());
        plan.fractions = vec![0.3];
        plan.trials = 0;
        assert!(plan.validate().is_err());
        plan.trials = 1;
        plan.modes = vec![ShiftMode::Given];
        assert!(plan.validate().is_err());
    }

    #[test]
    fn shift_mode_parsing() {
        assert_eq!(ShiftMode::parse("given").unwrap(), ShiftMode::Given);
        assert_eq!(ShiftMode::parse("file:/tmp/g").unwrap(), ShiftMode::File("/tmp/g".into()));
        assert!(ShiftMode::parse("laplacian").is_err());
    }

    #[test]
    fn plan_json_shape() {
        let text = r#"{
            "datasets": [{"name": "a", "source": {"preset": {"preset": "dense_low", "num_nodes": 30, "seed": 1}}}],
            "fractions": [0.3],
            "trials": 2,
            "modes": ["given", "identity", {"erdos_renyi": {"p": 0.1, "seed": 4}}]
        }"#;
        let suite: SuitePlan = serde_json::from_str(text).unwrap();
        assert_eq!(suite.modes.len(), 3);
        assert_eq!(suite.model, ModelSpec::default());
        assert_eq!(suite.table_fraction(), 0.3);
        assert_eq!(suite.plans()[0].trials, 2);
    }
}
