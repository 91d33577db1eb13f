//! Polynomial graph-filter network: layers, forward pass, loss and exact
//! gradients.

use super::shift::{shift_powers_apply, ShiftOperator};
use super::GnnError;
use crate::rng::RngStream;
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// How the decay coefficient is used during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayMode {
    /// Adds `decay / 2 * sum ||W||^2` to the loss.
    #[default]
    L2,
    /// Learning rate at step `t` is `lr / (1 + decay * t)`; no penalty term.
    LrSchedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub input_dim: usize,
    /// Hidden widths; the network has `hidden.len() + 1` filter layers.
    pub hidden: Vec<usize>,
    pub num_classes: usize,
    /// Number of polynomial terms per layer (`S^0 .. S^{degree-1}`).
    pub degree: usize,
    pub learning_rate: f64,
    pub decay: f64,
    #[serde(default)]
    pub decay_mode: DecayMode,
    pub epochs: usize,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub adam_eps: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl NetConfig {
    /// Two filter layers, 16 hidden units, Adam at 0.01 with 5e-4 decay,
    /// 200 epochs.
    pub fn two_layer(input_dim: usize, num_classes: usize, degree: usize) -> Self {
        NetConfig {
            input_dim,
            hidden: vec![16],
            num_classes,
            degree,
            learning_rate: 0.01,
            decay: 5e-4,
            decay_mode: DecayMode::L2,
            epochs: 200,
            beta1: default_beta1(),
            beta2: default_beta2(),
            adam_eps: default_eps(),
        }
    }

    pub fn validate(&self) -> Result<(), GnnError> {
        let bad = |m: &str| Err(GnnError::InvalidConfig(m.to_string()));
        if self.degree == 0 {
            return bad("degree must be at least 1");
        }
        if self.input_dim == 0 || self.num_classes == 0 || self.hidden.contains(&0) {
            return bad("layer widths must be positive");
        }
        let rates_ok = self.learning_rate > 0.0 && self.decay >= 0.0;
        if !rates_ok {
            return bad("learning rate must be positive and decay non-negative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input_dim];
        widths.extend(&self.hidden);
        widths.push(self.num_classes);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_dims()
            .iter()
            .map(|&(i, o)| self.degree * i * o + o)
            .sum()
    }
}

/// One filter `Y = sum_k S^k X W_k + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterLayer {
    pub weights: Vec<Array2<f64>>,
    pub bias: Array1<f64>,
}

impl FilterLayer {
    pub fn zeros(degree: usize, fan_in: usize, fan_out: usize) -> Self {
        FilterLayer {
            weights: (0..degree).map(|_| Array2::zeros((fan_in, fan_out))).collect(),
            bias: Array1::zeros(fan_out),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(degree: usize, fan_in: usize, fan_out: usize, rng: &mut RngStream) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        FilterLayer {
            weights: (0..degree)
                .map(|_| Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-limit..limit)))
                .collect(),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn degree(&self) -> usize {
        self.weights.len()
    }

    pub fn fan_in(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.bias.len()
    }

    /// Output of the filter given precomputed shifted inputs.
    pub fn apply(&self, powers: &[Array2<f64>]) -> Array2<f64> {
        let mut out = powers[0].dot(&self.weights[0]);
        for (p, w) in powers.iter().zip(&self.weights).skip(1) {
            out += &p.dot(w);
        }
        out += &self.bias;
        out
    }

    /// Every parameter, weights in order then bias.
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().flat_map(|w| w.iter()).chain(self.bias.iter())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().flat_map(|w| w.iter_mut()).chain(self.bias.iter_mut())
    }
}

/// Activations kept from the forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Shifted inputs `[H, S H, ...]` of every layer.
    pub powers: Vec<Vec<Array2<f64>>>,
    /// Pre-activation output of every layer; the last entry is the logits.
    pub pre_activations: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterNet {
    pub config: NetConfig,
    pub layers: Vec<FilterLayer>,
}

/// Gradients share the layout of the network parameters.
pub type Gradients = Vec<FilterLayer>;

impl FilterNet {
    pub fn zeros(config: NetConfig) -> Result<Self, GnnError> {
        config.validate()?;
        let layers = config
            .layer_dims()
            .into_iter()
            .map(|(i, o)| FilterLayer::zeros(config.degree, i, o))
            .collect();
        Ok(FilterNet { config, layers })
    }

    pub fn init(config: NetConfig, rng: &mut RngStream) -> Result<Self, GnnError> {
        config.validate()?;
        let layers = config
            .layer_dims()
            .into_iter()
            .map(|(i, o)| FilterLayer::glorot(config.degree, i, o, rng))
            .collect();
        Ok(FilterNet { config, layers })
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.values().count()).sum()
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(FilterLayer::values)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(FilterLayer::values_mut)
    }

    /// Logits and cached activations. Hidden layers use a rectifier.
    pub fn forward(&self, s: &ShiftOperator, x: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache), GnnError> {
        if x.ncols() != self.config.input_dim {
            return Err(GnnError::ShapeMismatch(format!(
                "features have {} columns, network expects {}",
                x.ncols(),
                self.config.input_dim
            )));
        }
        let mut cache = ForwardCache {
            powers: Vec::with_capacity(self.layers.len()),
            pre_activations: Vec::with_capacity(self.layers.len()),
        };
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (idx, layer) in self.layers.iter().enumerate() {
            let powers = shift_powers_apply(s, &h, layer.degree())?;
            let z = layer.apply(&powers);
            if z.iter().any(|v| !v.is_finite()) {
                return Err(GnnError::Numerical { layer: idx });
            }
            if idx < last {
                h = z.mapv(|v| v.max(0.0));
            }
            cache.powers.push(powers);
            cache.pre_activations.push(z);
        }
        let logits = cache.pre_activations[last].clone();
        Ok((logits, cache))
    }

    /// Penalty term `decay / 2 * sum ||W_k||^2` (biases excluded), zero when
    /// decay acts on the learning rate instead.
    pub fn decay_penalty(&self) -> f64 {
        if self.config.decay_mode != DecayMode::L2 {
            return 0.0;
        }
        let sq: f64 = self
            .layers
            .iter()
            .flat_map(|l| l.weights.iter())
            .map(|w| w.iter().map(|v| v * v).sum::<f64>())
            .sum();
        0.5 * self.config.decay * sq
    }

    /// Mean masked softmax cross-entropy plus the decay penalty, with exact
    /// gradients for every parameter.
    pub fn loss_and_grad(
        &self,
        s: &ShiftOperator,
        x: &Array2<f64>,
        labels: &[usize],
        mask: &[bool],
    ) -> Result<(f64, Gradients), GnnError> {
        let (logits, cache) = self.forward(s, x)?;
        let (data_loss, mut delta) = masked_cross_entropy(&logits, labels, mask)?;

        let mut grads: Gradients = Vec::with_capacity(self.layers.len());
        for idx in (0..self.layers.len()).rev() {
            let layer = &self.layers[idx];
            let powers = &cache.powers[idx];
            let mut grad = FilterLayer {
                weights: powers.iter().map(|p| p.t().dot(&delta)).collect(),
                bias: delta.sum_axis(Axis(0)),
            };
            if self.config.decay_mode == DecayMode::L2 && self.config.decay > 0.0 {
                for (gw, w) in grad.weights.iter_mut().zip(&layer.weights) {
                    gw.scaled_add(self.config.decay, w);
                }
            }
            grads.push(grad);
            if idx == 0 {
                break;
            }
            // d/dH of sum_k S^k H W_k, accumulated Horner-style:
            // G = dP_{d-1}; G = S^T G + dP_k for k = d-2 .. 0
            let d = layer.degree();
            let mut g = delta.dot(&layer.weights[d - 1].t());
            for k in (0..d - 1).rev() {
                g = s.apply_transpose(&g)?;
                g += &delta.dot(&layer.weights[k].t());
            }
            let z_prev = &cache.pre_activations[idx - 1];
            g.zip_mut_with(z_prev, |gv, &zv| {
                if zv <= 0.0 {
                    *gv = 0.0;
                }
            });
            delta = g;
        }
        grads.reverse();
        Ok((data_loss + self.decay_penalty(), grads))
    }
}

/// Mean softmax cross-entropy over masked rows and its gradient with respect
/// to the logits.
pub fn masked_cross_entropy(logits: &Array2<f64>, labels: &[usize], mask: &[bool]) -> Result<(f64, Array2<f64>), GnnError> {
    let n = logits.nrows();
    if labels.len() != n || mask.len() != n {
        return Err(GnnError::ShapeMismatch(format!(
            "{} logit rows, {} labels, {} mask entries",
            n,
            labels.len(),
            mask.len()
        )));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(GnnError::EmptyMask);
    }
    let inv = 1.0 / count as f64;
    let mut delta = Array2::zeros(logits.dim());
    let mut loss = 0.0;
    for (i, row) in logits.outer_iter().enumerate() {
        if !mask[i] {
            continue;
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += log_z - row[labels[i]];
        for (j, v) in row.iter().enumerate() {
            let p = (v - log_z).exp();
            delta[[i, j]] = (p - if j == labels[i] { 1.0 } else { 0.0 }) * inv;
        }
    }
    Ok((loss * inv, delta))
}

/// Index of the largest entry of every row; ties go to the lower index.
pub fn argmax_rows(logits: &Array2<f64>) -> Vec<usize> {
    logits
        .outer_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (j, &v)| if v > best.1 { (j, v) } else { best })
                .0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::ShiftKind;
    use crate::graph::{Directedness, LabeledGraph};
    use ndarray::array;

    fn tiny_config(degree: usize, hidden: Vec<usize>) -> NetConfig {
        NetConfig {
            hidden,
            ..NetConfig::two_layer(3, 2, degree)
        }
    }

    #[test]
    fn zero_weights_give_zero_logits() {
        let net = FilterNet::zeros(tiny_config(2, vec![4])).unwrap();
        let x = Array2::from_elem((5, 3), 1.5);
        let (logits, _) = net.forward(&ShiftOperator::identity(5), &x).unwrap();
        assert!(logits.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_linear_layer() {
        let mut net = FilterNet::zeros(tiny_config(1, vec![])).unwrap();
        net.layers[0].weights[0] = array![[1.0, 2.0], [0.0, -1.0], [0.5, 0.5]];
        net.layers[0].bias = array![0.25, -0.25];
        let x = array![[1.0, 2.0, 3.0], [0.0, 1.0, 0.0]];
        let (logits, _) = net.forward(&ShiftOperator::identity(2), &x).unwrap();
        let expected = x.dot(&net.layers[0].weights[0]) + &net.layers[0].bias;
        assert_eq!(logits, expected);
    }

    #[test]
    fn uniform_logits_loss_is_log_m() {
        let mut cfg = tiny_config(1, vec![]);
        cfg.num_classes = 4;
        let mut net = FilterNet::zeros(cfg).unwrap();
        net.layers[0].weights[0].fill(0.0);
        let x = Array2::from_elem((3, 3), 1.0);
        let (loss, _) = net
            .loss_and_grad(&ShiftOperator::identity(3), &x, &[0, 1, 3], &[true, true, false])
            .unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-15);

        // with nonzero weights the decay term is added on top
        net.layers[0].weights[0].fill(0.0);
        net.layers[0].weights[0][[0, 0]] = 2.0;
        let x = Array2::zeros((3, 3));
        let (loss, _) = net
            .loss_and_grad(&ShiftOperator::identity(3), &x, &[0, 1, 3], &[true, true, false])
            .unwrap();
        assert!((loss - (4f64.ln() + 0.5 * 5e-4 * 4.0)).abs() < 1e-15);
    }

    #[test]
    fn empty_mask_rejected() {
        let net = FilterNet::zeros(tiny_config(1, vec![])).unwrap();
        let x = Array2::zeros((2, 3));
        assert!(matches!(
            net.loss_and_grad(&ShiftOperator::identity(2), &x, &[0, 1], &[false, false]),
            Err(GnnError::EmptyMask)
        ));
    }

    #[test]
    fn duplicated_nodes_leave_mean_unchanged() {
        // nodes 0 and 1 are exact copies (same features, label and neighbors)
        let g = LabeledGraph::from_edges(vec![0, 0, 1], 2, [(0, 2), (1, 2), (2, 2)], Directedness::Directed).unwrap();
        let s = ShiftOperator::from_graph(&g, ShiftKind::Normalized);
        let x = array![[1.0, -1.0, 0.5], [1.0, -1.0, 0.5], [0.0, 2.0, 1.0]];
        let mut cfg = tiny_config(2, vec![3]);
        cfg.decay = 0.0;
        let net = FilterNet::init(cfg, &mut RngStream::new(3, 0)).unwrap();
        let (one, _) = net.loss_and_grad(&s, &x, g.labels(), &[true, false, false]).unwrap();
        let (two, _) = net.loss_and_grad(&s, &x, g.labels(), &[true, true, false]).unwrap();
        assert!((one - two).abs() < 1e-15);
    }

    #[test]
    fn parameter_count_matches_config() {
        let cfg = NetConfig::two_layer(16, 3, 2);
        let net = FilterNet::init(cfg.clone(), &mut RngStream::new(0, 0)).unwrap();
        assert_eq!(net.parameter_count(), cfg.parameter_count());
        assert_eq!(cfg.parameter_count(), 2 * 16 * 16 + 16 + 2 * 16 * 3 + 3);
    }

    #[test]
    fn non_finite_activation_names_layer() {
        let mut net = FilterNet::zeros(tiny_config(1, vec![2])).unwrap();
        net.layers[1].bias[0] = f64::NAN;
        let x = Array2::zeros((2, 3));
        assert!(matches!(
            net.forward(&ShiftOperator::identity(2), &x),
            Err(GnnError::Numerical { layer: 1 })
        ));
    }

    #[test]
    fn argmax_ties_prefer_lower_index() {
        assert_eq!(argmax_rows(&array![[1.0, 1.0], [0.0, 2.0]]), vec![0, 1]);
    }
}
