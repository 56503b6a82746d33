//! Dense softmax classifier trained by federated full-batch gradients.
//!
//! The architecture is a plain multilayer perceptron — rectified-linear
//! hidden layers, linear output read through a softmax — built from the
//! same [`Dense`] blocks as the policy networks, so gradients come from
//! explicit layer-by-layer backpropagation.

use ndarray::{Array2, ArrayViewD, ArrayViewMutD};
use rand_chacha::ChaCha8Rng;

use super::data::Dataset;
use super::FlError;
use crate::nn::{relu, relu_backward, zeros_like, Dense, TensorSet};

// ---------------------------------------------------------------------------
// Model

/// Feed-forward classifier: `dims[0] → … → dims.last()` with ReLU
/// between layers and softmax applied to the final logits.
#[derive(Debug, Clone)]
pub struct Classifier {
    layers: Vec<Dense>,
}

impl Classifier {
    /// Builds a classifier with the given layer widths (at least input
    /// and output) and fan-in uniform initialization.
    pub fn new(dims: &[usize], rng: &mut ChaCha8Rng) -> Classifier {
        assert!(dims.len() >= 2, "need input and output dims");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense::new(&format!("fl.l{i}"), w[0], w[1], rng))
            .collect();
        Classifier { layers }
    }

    /// Input dimension `d`.
    pub fn input_dim(&self) -> usize {
        self.layers.first().unwrap().in_dim()
    }

    /// Class count `C`.
    pub fn num_classes(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    /// Raw (pre-softmax) scores, `B × C`.
    pub fn logits(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h);
            if i < last {
                h = relu(&h);
            }
        }
        h
    }

    /// Mean cross-entropy loss over the batch (nats).
    pub fn loss(&self, x: &Array2<f64>, labels: &[usize]) -> f64 {
        let logits = self.logits(x);
        mean_cross_entropy(&logits, labels)
    }

    /// Mean cross-entropy loss and its full-batch average gradient
    /// (Eq. 3-style local objective: `(1/B)·Σ ∇ℓ`).
    pub fn loss_and_grad(
        &self,
        x: &Array2<f64>,
        labels: &[usize],
    ) -> (f64, Classifier) {
        let batch = x.nrows();
        assert_eq!(batch, labels.len(), "feature/label count mismatch");
        let last = self.layers.len() - 1;

        // Forward, caching each layer's input and pre-activation.
        let mut inputs: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        let mut pre: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            inputs.push(h.clone());
            let z = layer.forward(&h);
            pre.push(z.clone());
            h = if i < last { relu(&z) } else { z };
        }

        let loss = mean_cross_entropy(&h, labels);

        // Softmax cross-entropy head: dz = (softmax − onehot) / B.
        let mut dz = softmax(&h);
        for (row, &label) in labels.iter().enumerate() {
            dz[[row, label]] -= 1.0;
        }
        dz.mapv_inplace(|v| v / batch as f64);

        // Backward through the stack.
        let mut grads = zeros_like(self);
        for i in (0..self.layers.len()).rev() {
            let dx = self.layers[i].backward(&inputs[i], &dz, &mut grads.layers[i]);
            if i > 0 {
                dz = relu_backward(&pre[i - 1], &dx);
            }
        }
        (loss, grads)
    }

    /// Fraction of samples whose argmax logit matches the label (ties
    /// resolve to the lowest class index).
    pub fn accuracy(&self, x: &Array2<f64>, labels: &[usize]) -> f64 {
        let logits = self.logits(x);
        let mut correct = 0usize;
        for (row, &label) in labels.iter().enumerate() {
            let mut best = 0usize;
            for c in 1..logits.ncols() {
                if logits[[row, c]] > logits[[row, best]] {
                    best = c;
                }
            }
            if best == label {
                correct += 1;
            }
        }
        correct as f64 / labels.len() as f64
    }

    /// Global update (Eq. 4): `θ ← θ − lr·ĝ` with `ĝ` flattened in
    /// [`crate::nn::flatten`] order.
    pub fn apply_flat_update(&mut self, gradient: &[f64], lr: f64) {
        let mut offset = 0usize;
        for (_, mut tensor) in self.tensors_mut() {
            for value in tensor.iter_mut() {
                *value -= lr * gradient[offset];
                offset += 1;
            }
        }
        assert_eq!(offset, gradient.len(), "gradient length mismatch");
    }
}

impl TensorSet for Classifier {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        self.layers.iter().flat_map(Dense::tensors).collect()
    }

    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        self.layers.iter_mut().flat_map(Dense::tensors_mut).collect()
    }
}

// ---------------------------------------------------------------------------
// Softmax head

/// Row-wise stable softmax.
fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::MIN, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Mean of `−log softmax(logits)[label]` via a log-sum-exp that never
/// exponentiates large values.
fn mean_cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (row, &label) in labels.iter().enumerate() {
        let r = logits.row(row);
        let max = r.iter().cloned().fold(f64::MIN, f64::max);
        let lse = max + r.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        total += lse - r[label];
    }
    total / labels.len() as f64
}

/// Convenience for the federated loop: one client's full-batch loss and
/// flat gradient over its shard.
pub fn local_gradient(model: &Classifier, shard: &Dataset) -> Result<(f64, Vec<f64>), FlError> {
    if shard.is_empty() {
        return Err(FlError::TooSmall("gradient over an empty shard".into()));
    }
    let (loss, grads) = model.loss_and_grad(&shard.features, &shard.labels);
    if !loss.is_finite() {
        return Err(FlError::NonFinite(format!("local loss = {loss}")));
    }
    Ok((loss, crate::nn::flatten(&grads)))
}

// ---------------------------------------------------------------------------
