//! LSTM cell with explicit backpropagation through time.
//!
//! Gate layout inside the fused `4H`-wide projection, by column blocks:
//! input `i`, forget `f`, candidate `g`, output `o`:
//!
//! ```text
//! z_t = x_t·Wx + h_{t−1}·Wh + b
//! i = σ(z_i)   f = σ(z_f)   g = tanh(z_g)   o = σ(z_o)
//! c_t = f ⊙ c_{t−1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```
//!
//! The forget-gate bias starts at 1 so early training does not truncate
//! memory; all weights use fan-in uniform initialization.

use ndarray::{s, Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{sigmoid, TensorSet};

/// One recurrent cell; processes a whole window of steps per call.
#[derive(Debug, Clone)]
pub struct LstmCell {
    /// Stable name used for checkpointing and diagnostics.
    pub name: String,
    /// Input projection, shape `(in, 4·hidden)`.
    pub wx: Array2<f64>,
    /// Recurrent projection, shape `(hidden, 4·hidden)`.
    pub wh: Array2<f64>,
    /// Gate bias, shape `(4·hidden,)`.
    pub b: Array1<f64>,
}

/// Per-step intermediate values needed by the backward pass.
struct StepCache {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    tanh_c: Array2<f64>,
}

/// Forward-pass record for one window.
pub struct LstmCache {
    steps: Vec<StepCache>,
    hidden: usize,
}

impl LstmCell {
    /// Fan-in uniform initialization with forget bias 1.
    pub fn new(name: &str, in_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> LstmCell {
        let bx = 1.0 / (in_dim as f64).sqrt();
        let bh = 1.0 / (hidden as f64).sqrt();
        let wx = Array2::from_shape_fn((in_dim, 4 * hidden), |_| rng.random_range(-bx..bx));
        let wh = Array2::from_shape_fn((hidden, 4 * hidden), |_| rng.random_range(-bh..bh));
        let mut b = Array1::zeros(4 * hidden);
        b.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        LstmCell {
            name: name.to_string(),
            wx,
            wh,
            b,
        }
    }

    /// Input width.
    pub fn in_dim(&self) -> usize {
        self.wx.nrows()
    }

    /// Hidden-state width.
    pub fn hidden(&self) -> usize {
        self.wh.nrows()
    }

    /// Runs the cell over a window of inputs (each `batch × in`), starting
    /// from zero state. Returns the final hidden state (`batch × hidden`)
    /// and the cache for the backward pass.
    pub fn forward_seq(&self, xs: &[Array2<f64>]) -> (Array2<f64>, LstmCache) {
        assert!(!xs.is_empty(), "LSTM window must be nonempty");
        let hidden = self.hidden();
        let batch = xs[0].nrows();
        let mut h = Array2::zeros((batch, hidden));
        let mut c = Array2::zeros((batch, hidden));
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            debug_assert_eq!(x.ncols(), self.in_dim());
            debug_assert_eq!(x.nrows(), batch);
            let z = x.dot(&self.wx) + h.dot(&self.wh) + &self.b;
            let i = z.slice(s![.., 0..hidden]).mapv(sigmoid);
            let f = z.slice(s![.., hidden..2 * hidden]).mapv(sigmoid);
            let g = z.slice(s![.., 2 * hidden..3 * hidden]).mapv(f64::tanh);
            let o = z.slice(s![.., 3 * hidden..4 * hidden]).mapv(sigmoid);
            let c_new = &f * &c + &i * &g;
            let tanh_c = c_new.mapv(f64::tanh);
            let h_new = &o * &tanh_c;
            steps.push(StepCache {
                x: x.clone(),
                h_prev: h,
                c_prev: c,
                i,
                f,
                g,
                o,
                tanh_c,
            });
            h = h_new;
            c = c_new;
        }
        (h, LstmCache { steps, hidden })
    }

    /// Backpropagation through time from a gradient on the final hidden
    /// state. Accumulates parameter gradients into `grads` and returns the
    /// gradient with respect to each window input.
    pub fn backward_seq(
        &self,
        cache: &LstmCache,
        dh_last: &Array2<f64>,
        grads: &mut LstmCell,
    ) -> Vec<Array2<f64>> {
        let hidden = cache.hidden;
        let batch = dh_last.nrows();
        let mut dh = dh_last.clone();
        let mut dc = Array2::zeros((batch, hidden));
        let mut dxs = vec![Array2::zeros((0, 0)); cache.steps.len()];
        for (t, step) in cache.steps.iter().enumerate().rev() {
            let d_o = &dh * &step.tanh_c;
            dc = dc + &dh * &step.o * step.tanh_c.mapv(|v| 1.0 - v * v);
            let d_i = &dc * &step.g;
            let d_g = &dc * &step.i;
            let d_f = &dc * &step.c_prev;
            let dc_prev = &dc * &step.f;

            let mut dz = Array2::zeros((batch, 4 * hidden));
            dz.slice_mut(s![.., 0..hidden])
                .assign(&(&d_i * &step.i * step.i.mapv(|v| 1.0 - v)));
            dz.slice_mut(s![.., hidden..2 * hidden])
                .assign(&(&d_f * &step.f * step.f.mapv(|v| 1.0 - v)));
            dz.slice_mut(s![.., 2 * hidden..3 * hidden])
                .assign(&(&d_g * step.g.mapv(|v| 1.0 - v * v)));
            dz.slice_mut(s![.., 3 * hidden..4 * hidden])
                .assign(&(&d_o * &step.o * step.o.mapv(|v| 1.0 - v)));

            grads.wx += &step.x.t().dot(&dz);
            grads.wh += &step.h_prev.t().dot(&dz);
            grads.b += &dz.sum_axis(Axis(0));

            dxs[t] = dz.dot(&self.wx.t());
            dh = dz.dot(&self.wh.t());
            dc = dc_prev;
        }
        dxs
    }
}

impl TensorSet for LstmCell {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        vec![
            (format!("{}.wx", self.name), self.wx.view().into_dyn()),
            (format!("{}.wh", self.name), self.wh.view().into_dyn()),
            (format!("{}.b", self.name), self.b.view().into_dyn()),
        ]
    }
    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        vec![
            (format!("{}.wx", self.name), self.wx.view_mut().into_dyn()),
            (format!("{}.wh", self.name), self.wh.view_mut().into_dyn()),
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
    fn single_step_matches_hand_computation() {
        // One unit, one input, handpicked weights: verify the cell against
        // a scalar recomputation of the gate algebra.
        let cell = LstmCell {
            name: "t".into(),
            wx: array![[0.5, -0.25, 1.0, 0.75]],
            wh: array![[0.0, 0.0, 0.0, 0.0]],
            b: array![0.1, 1.0, -0.2, 0.3],
        };
        let x = array![[2.0]];
        let (h, _) = cell.forward_seq(&[x]);

        let i = sigmoid(0.5 * 2.0 + 0.1);
        let f = sigmoid(-0.25 * 2.0 + 1.0);
        let g = (1.0 * 2.0 - 0.2_f64).tanh();
        let o = sigmoid(0.75 * 2.0 + 0.3);
        let c = f * 0.0 + i * g;
        let expect = o * c.tanh();
        assert!((h[[0, 0]] - expect).abs() < 1e-15);
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let mut rng = seeds::stream(3, "lstm-init");
        let cell = LstmCell::new("t", 3, 4, &mut rng);
        let b = &cell.b;
        assert!(b.slice(s![0..4]).iter().all(|&v| v == 0.0));
        assert!(b.slice(s![4..8]).iter().all(|&v| v == 1.0));
        assert!(b.slice(s![8..16]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let mut rng = seeds::stream(5, "lstm-fd");
        let cell = LstmCell::new("t", 2, 3, &mut rng);
        let window: Vec<Array2<f64>> = (0..3)
            .map(|_| Array2::from_shape_fn((2, 2), |_| rng.random_range(-1.0..1.0)))
            .collect();
        let proj = Array2::from_shape_fn((2, 3), |_| rng.random_range(-1.0..1.0));

        // Scalar objective on the final hidden state.
        let objective = |c: &LstmCell| (c.forward_seq(&window).0 * &proj).sum();

        let (_, cache) = cell.forward_seq(&window);
        let mut grads = zeros_like(&cell);
        let dxs = cell.backward_seq(&cache, &proj, &mut grads);

        let fd = finite_difference_grad(&cell, objective, 1e-6);
        assert!(
            max_relative_error(&flatten(&grads), &fd, 1e-6) < 1e-4,
            "parameter gradients deviate from finite differences"
        );

        // Input gradients for every step of the window.
        for (t, dx) in dxs.iter().enumerate() {
            for r in 0..2 {
                for c_idx in 0..2 {
                    let mut wp = window.clone();
                    wp[t][[r, c_idx]] += 1e-6;
                    let mut wm = window.clone();
                    wm[t][[r, c_idx]] -= 1e-6;
                    let fd = ((cell.forward_seq(&wp).0 * &proj).sum()
                        - (cell.forward_seq(&wm).0 * &proj).sum())
                        / 2e-6;
                    assert!((dx[[r, c_idx]] - fd).abs() < 1e-6);
                }
            }
        }
    }
}
