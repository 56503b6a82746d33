//! Fully connected layer with explicit forward and backward passes.

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::TensorSet;

/// An affine map `y = x·W + b` over row-major batches (`x` is
/// `batch × in`, `W` is `in × out`).
#[derive(Debug, Clone)]
pub struct Dense {
    /// Stable name used for checkpointing and diagnostics.
    pub name: String,
    /// Weights, shape `(in, out)`.
    pub w: Array2<f64>,
    /// Bias, shape `(out,)`.
    pub b: Array1<f64>,
}

impl Dense {
    /// Fan-in uniform initialization: entries in `±1/sqrt(in)`, zero bias.
    pub fn new(name: &str, in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Dense {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let w = Array2::from_shape_fn((in_dim, out_dim), |_| rng.random_range(-bound..bound));
        Dense {
            name: name.to_string(),
            w,
            b: Array1::zeros(out_dim),
        }
    }

    /// Input width.
    pub fn in_dim(&self) -> usize {
        self.w.nrows()
    }

    /// Output width.
    pub fn out_dim(&self) -> usize {
        self.w.ncols()
    }

    /// Forward pass for a batch.
    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        debug_assert_eq!(x.ncols(), self.in_dim());
        x.dot(&self.w) + &self.b
    }

    /// Backward pass: accumulates parameter gradients into `grads` (same
    /// structure as `self`) and returns the gradient with respect to `x`.
    pub fn backward(&self, x: &Array2<f64>, dy: &Array2<f64>, grads: &mut Dense) -> Array2<f64> {
        debug_assert_eq!(dy.ncols(), self.out_dim());
        grads.w += &x.t().dot(dy);
        grads.b += &dy.sum_axis(Axis(0));
        dy.dot(&self.w.t())
    }
}

impl TensorSet for Dense {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        vec![
            (format!("{}.w", self.name), self.w.view().into_dyn()),
            (format!("{}.b", self.name), self.b.view().into_dyn()),
        ]
    }
    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        vec![
            (format!("{}.w", self.name), self.w.view_mut().into_dyn()),
            (format!("{}.b", self.name), self.b.view_mut().into_dyn()),
        ]
    }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{finite_difference_grad, flatten, max_relative_error, zeros_like};
    use crate::seeds;
    use ndarray::array;

    #[test]
    fn forward_matches_hand_computation() {
        let layer = Dense {
            name: "t".into(),
            w: array![[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]],
            b: array![0.5, -0.5],
        };
        let x = array![[1.0, 2.0, 3.0]];
        let y = layer.forward(&x);
        assert_eq!(y, array![[1.0 + 3.0 + 0.5, 4.0 + 3.0 - 0.5]]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = seeds::stream(1, "dense-fd");
        let layer = Dense::new("t", 3, 2, &mut rng);
        let x = Array2::from_shape_fn((4, 3), |_| rng.random_range(-1.0..1.0));
        let proj = Array2::from_shape_fn((4, 2), |_| rng.random_range(-1.0..1.0));

        // Scalar objective: sum(proj ⊙ forward(x)).
        let objective = |l: &Dense| (l.forward(&x) * &proj).sum();

        let mut grads = zeros_like(&layer);
        let dx = layer.backward(&x, &proj, &mut grads);
        let fd = finite_difference_grad(&layer, objective, 1e-6);
        assert!(max_relative_error(&flatten(&grads), &fd, 1e-8) < 1e-7);

        // Input gradient: same objective as a function of x.
        for r in 0..4 {
            for c in 0..3 {
                let mut xp = x.clone();
                xp[[r, c]] += 1e-6;
                let mut xm = x.clone();
                xm[[r, c]] -= 1e-6;
                let fd = ((layer.forward(&xp) * &proj).sum() - (layer.forward(&xm) * &proj).sum())
                    / 2e-6;
                assert!((dx[[r, c]] - fd).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn initialization_is_fan_in_bounded() {
        let mut rng = seeds::stream(2, "dense-init");
        let layer = Dense::new("t", 16, 8, &mut rng);
        let bound = 1.0 / 4.0;
        assert!(layer.w.iter().all(|v| v.abs() < bound));
        assert!(layer.b.iter().all(|&v| v == 0.0));
    }
}
