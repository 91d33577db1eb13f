//! Full-graph training with Adam and masked evaluation.

use super::adam::Adam;
use super::net::{argmax_rows, DecayMode, FilterNet, NetConfig};
use super::shift::{ShiftKind, ShiftOperator};
use super::GnnError;
use crate::graph::LabeledGraph;
use crate::rng::RngStream;
use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::borrow::Cow;

/// Disjoint train/test node masks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<bool>,
    pub test: Vec<bool>,
}

impl Split {
    pub fn new(train: Vec<bool>, test: Vec<bool>) -> Result<Self, GnnError> {
        if train.len() != test.len() {
            return Err(GnnError::ShapeMismatch(format!("train mask {} vs test mask {}", train.len(), test.len())));
        }
        if train.iter().zip(&test).any(|(a, b)| *a && *b) {
            return Err(GnnError::InvalidConfig("train and test masks overlap".into()));
        }
        if !train.contains(&true) || !test.contains(&true) {
            return Err(GnnError::EmptyMask);
        }
        Ok(Split { train, test })
    }

    pub fn train_count(&self) -> usize {
        self.train.iter().filter(|&&m| m).count()
    }

    pub fn test_count(&self) -> usize {
        self.test.iter().filter(|&&m| m).count()
    }
}

/// Random split taking `round(fraction * n_c)` training nodes from every
/// class `c`; the remaining nodes form the test set. Classes with at least two
/// nodes keep one node on each side.
pub fn stratified_split(labels: &[usize], num_classes: usize, fraction: f64, rng: &mut RngStream) -> Result<Split, GnnError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(GnnError::InvalidConfig(format!("training fraction {fraction} outside (0, 1)")));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (node, &l) in labels.iter().enumerate() {
        members[l].push(node);
    }
    let mut train = vec![false; labels.len()];
    for nodes in &mut members {
        let n = nodes.len();
        if n == 0 {
            continue;
        }
        nodes.shuffle(rng);
        let mut take = (fraction * n as f64).round() as usize;
        if n >= 2 {
            take = take.clamp(1, n - 1);
        }
        for &node in &nodes[..take] {
            train[node] = true;
        }
    }
    let test = train.iter().map(|t| !t).collect();
    Split::new(train, test)
}

/// Node features of `g`, or one-hot identity features when it has none.
pub fn input_features(g: &LabeledGraph) -> Cow<'_, Array2<f64>> {
    match g.features() {
        Some(x) => Cow::Borrowed(x),
        None => Cow::Owned(Array2::eye(g.num_nodes())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    /// Test accuracy; `None` when training diverged.
    pub accuracy: Option<f64>,
    pub train_accuracy: Option<f64>,
    pub loss_curve: Vec<f64>,
    pub diverged: bool,
}

/// Fraction of masked nodes whose argmax logit equals the label.
pub fn masked_accuracy(logits: &Array2<f64>, labels: &[usize], mask: &[bool]) -> f64 {
    let pred = argmax_rows(logits);
    let (hit, total) = pred
        .iter()
        .zip(labels)
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0usize, 0usize), |(h, t), ((p, l), _)| (h + usize::from(p == l), t + 1));
    if total == 0 {
        return 0.0;
    }
    hit as f64 / total as f64
}

/// Trains a freshly initialized network on `g` using the given shift kind.
pub fn train(config: &NetConfig, g: &LabeledGraph, shift: ShiftKind, split: &Split, rng: &mut RngStream) -> Result<(FilterNet, TrainOutcome), GnnError> {
    let s = ShiftOperator::from_graph(g, shift);
    let x = input_features(g);
    train_with_shift(config, &s, &x, g.labels(), split, rng)
}

/// Trains a freshly initialized network with an explicit shift operator and
/// feature matrix. Deterministic given `rng` and inputs.
pub fn train_with_shift(
    config: &NetConfig,
    s: &ShiftOperator,
    x: &Array2<f64>,
    labels: &[usize],
    split: &Split,
    rng: &mut RngStream,
) -> Result<(FilterNet, TrainOutcome), GnnError> {
    if split.train.len() != labels.len() || labels.len() != s.num_nodes() {
        return Err(GnnError::ShapeMismatch(format!(
            "{} labels, {} mask entries, shift over {} nodes",
            labels.len(),
            split.train.len(),
            s.num_nodes()
        )));
    }
    let mut net = FilterNet::init(config.clone(), rng)?;
    let mut opt = Adam::new(net.parameter_count(), config.beta1, config.beta2, config.adam_eps);
    let mut loss_curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let (loss, grads) = match net.loss_and_grad(s, x, labels, &split.train) {
            Ok(v) => v,
            Err(GnnError::Numerical { .. }) => return Ok((net, diverged(loss_curve))),
            Err(e) => return Err(e),
        };
        if !loss.is_finite() {
            loss_curve.push(loss);
            return Ok((net, diverged(loss_curve)));
        }
        loss_curve.push(loss);
        let lr = match config.decay_mode {
            DecayMode::L2 => config.learning_rate,
            DecayMode::LrSchedule => config.learning_rate / (1.0 + config.decay * epoch as f64),
        };
        opt.update(net.values_mut(), grads.iter().flat_map(|l| l.values()), lr);
    }

    let logits = match net.forward(s, x) {
        Ok((logits, _)) => logits,
        Err(GnnError::Numerical { .. }) => return Ok((net, diverged(loss_curve))),
        Err(e) => return Err(e),
    };
    let outcome = TrainOutcome {
        accuracy: Some(masked_accuracy(&logits, labels, &split.test)),
        train_accuracy: Some(masked_accuracy(&logits, labels, &split.train)),
        loss_curve,
        diverged: false,
    };
    Ok((net, outcome))
}

fn diverged(loss_curve: Vec<f64>) -> TrainOutcome {
    TrainOutcome {
        accuracy: None,
        train_accuracy: None,
        loss_curve,
        diverged: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_stratified_and_disjoint() {
        let labels: Vec<usize> = (0..100).map(|i| i % 3).collect();
        let split = stratified_split(&labels, 3, 0.3, &mut RngStream::new(1, 0)).unwrap();
        let per_class = |c: usize| (0..100).filter(|&i| labels[i] == c && split.train[i]).count();
        assert_eq!(per_class(0), 10); // round(0.3 * 34)
        assert_eq!(per_class(1), 10);
        assert_eq!(per_class(2), 10);
        assert!(split.train.iter().zip(&split.test).all(|(a, b)| a != b));
    }

    #[test]
    fn split_keeps_both_sides_nonempty() {
        let labels = vec![0, 0, 1, 1];
        let split = stratified_split(&labels, 2, 0.05, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(split.train_count(), 2);
        assert!(stratified_split(&labels, 2, 1.0, &mut RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn split_validation() {
        assert!(matches!(Split::new(vec![true, false], vec![false, false]), Err(GnnError::EmptyMask)));
        assert!(Split::new(vec![true, true], vec![true, false]).is_err());
    }

    #[test]
    fn accuracy_counts_only_masked_rows() {
        let logits = ndarray::array![[2.0, 0.0], [0.0, 1.0], [5.0, 0.0]];
        assert_eq!(masked_accuracy(&logits, &[0, 0, 1], &[true, true, false]), 0.5);
    }
}
