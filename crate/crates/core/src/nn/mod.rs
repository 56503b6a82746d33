//! Minimal neural-network toolkit with explicit forward/backward passes.
//!
//! Everything the learners need — dense layers, an LSTM cell, Adam, soft
//! target updates, finite-difference verification — implemented directly
//! on [`ndarray`] types in 64-bit floats. No autodiff: every layer returns
//! a cache from its forward pass and exposes a hand-derived backward pass,
//! which keeps gradients auditable and lets tests compare them against
//! central finite differences.
//!
//! Parameter containers implement [`TensorSet`], a named-tensor visitation
//! trait that powers the generic optimizer, soft updates, checkpoint
//! serialization and flattening.

pub mod dense;
pub mod lstm;

pub use dense::Dense;
pub use lstm::LstmCell;

use ndarray::{Array2, ArrayD, ArrayViewD, ArrayViewMutD};

/// Named access to every parameter tensor of a container, in a fixed
/// deterministic order. Gradient containers reuse the parameter type, so
/// one implementation serves both.
pub trait TensorSet {
    /// Immutable views of all tensors with stable names.
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)>;
    /// Mutable views of all tensors, same order and names as [`tensors`].
    ///
    /// [`tensors`]: TensorSet::tensors
    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)>;
}

/// Returns a structural copy with every tensor zeroed — the natural
/// gradient accumulator for a parameter set.
pub fn zeros_like<T: TensorSet + Clone>(params: &T) -> T {
    let mut out = params.clone();
    for (_, mut t) in out.tensors_mut() {
        t.fill(0.0);
    }
    out
}

/// Total number of scalar parameters.
pub fn param_count<T: TensorSet>(params: &T) -> usize {
    params.tensors().iter().map(|(_, t)| t.len()).sum()
}

/// Flattens all tensors into one vector (visitation order).
pub fn flatten<T: TensorSet>(params: &T) -> Vec<f64> {
    let mut out = Vec::new();
    for (_, t) in params.tensors() {
        out.extend(t.iter());
    }
    out
}

/// Blends online parameters into a target copy: `target ← tau·online +
/// (1−tau)·target`, tensor by tensor. Panics on shape or name mismatch.
pub fn soft_update<T: TensorSet>(target: &mut T, online: &T, tau: f64) {
    let online_tensors = online.tensors();
    let mut target_tensors = target.tensors_mut();
    assert_eq!(online_tensors.len(), target_tensors.len(), "tensor count mismatch");
    for ((on_name, on), (tg_name, tg)) in online_tensors.iter().zip(target_tensors.iter_mut()) {
        assert_eq!(on_name, tg_name, "tensor name mismatch");
        assert_eq!(on.shape(), tg.shape(), "tensor shape mismatch for {on_name}");
        tg.zip_mut_with(on, |t, &o| *t = tau * o + (1.0 - tau) * *t);
    }
}

/// Rectified-linear activation.
pub fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Gradient of [`relu`] given the pre-activation input.
pub fn relu_backward(pre: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
    let mut dx = dy.clone();
    dx.zip_mut_with(pre, |d, &p| {
        if p <= 0.0 {
            *d = 0.0;
        }
    });
    dx
}

/// Logistic sigmoid.
pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

// ---------------------------------------------------------------------------
// Adam

/// Adaptive-moment-estimation optimizer over a [`TensorSet`].
#[derive(Debug, Clone)]
pub struct Adam {
    /// Step size.
    pub lr: f64,
    /// First-moment decay (default 0.9).
    pub beta1: f64,
    /// Second-moment decay (default 0.999).
    pub beta2: f64,
    /// Denominator stabilizer (default 1e-8).
    pub eps: f64,
    t: u64,
    m: Vec<ArrayD<f64>>,
    v: Vec<ArrayD<f64>>,
}

impl Adam {
    /// Creates an optimizer with zeroed moments matching `params`.
    pub fn new<T: TensorSet>(lr: f64, params: &T) -> Adam {
        let m = params
            .tensors()
            .iter()
            .map(|(_, t)| ArrayD::zeros(t.shape().to_vec()))
            .collect::<Vec<_>>();
        let v = m.clone();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m,
            v,
        }
    }

    /// Applies one update: `p ← p − lr·m̂/(√v̂ + eps)` with bias-corrected
    /// moments. `grads` must have the same structure as `params`.
    pub fn step<T: TensorSet>(&mut self, params: &mut T, grads: &T) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let grad_tensors = grads.tensors();
        let mut param_tensors = params.tensors_mut();
        assert_eq!(grad_tensors.len(), param_tensors.len(), "tensor count mismatch");
        assert_eq!(param_tensors.len(), self.m.len(), "optimizer built for another structure");
        for (i, ((name, g), (pname, p))) in grad_tensors
            .iter()
            .zip(param_tensors.iter_mut())
            .enumerate()
        {
            assert_eq!(name, pname, "tensor name mismatch");
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            m.zip_mut_with(g, |m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            v.zip_mut_with(g, |v, &g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            ndarray::Zip::from(p)
                .and(&*m)
                .and(&*v)
                .for_each(|p, &m, &v| {
                    let mhat = m / bc1;
                    let vhat = v / bc2;
                    *p -= self.lr * mhat / (vhat.sqrt() + self.eps);
                });
        }
    }
}

// ---------------------------------------------------------------------------
// Finite-difference verification

/// Central finite-difference gradient of `f` with respect to every scalar
/// parameter, in visitation order. Intended for miniature shapes: cost is
/// two evaluations of `f` per parameter.
pub fn finite_difference_grad<T, F>(params: &T, mut f: F, h: f64) -> Vec<f64>
where
    T: TensorSet + Clone,
    F: FnMut(&T) -> f64,
{
    let n = param_count(params);
    let mut grads = Vec::with_capacity(n);
    for idx in 0..n {
        let mut plus = params.clone();
        nudge(&mut plus, idx, h);
        let mut minus = params.clone();
        nudge(&mut minus, idx, -h);
        grads.push((f(&plus) - f(&minus)) / (2.0 * h));
    }
    grads
}

/// Adds `delta` to the flat parameter at `idx`.
fn nudge<T: TensorSet>(params: &mut T, idx: usize, delta: f64) {
    let mut offset = 0;
    for (_, mut t) in params.tensors_mut() {
        let len = t.len();
        if idx < offset + len {
            let slice = t.as_slice_mut().expect("parameter tensors are contiguous");
            slice[idx - offset] += delta;
            return;
        }
        offset += len;
    }
    panic!("flat index {idx} out of range");
}

/// Largest relative deviation between an analytic and a finite-difference
/// gradient, with an absolute floor that keeps near-zero entries from
/// dominating: `|a−b| / max(|a|, |b|, floor)`.
pub fn max_relative_error(analytic: &[f64], fd: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), fd.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(fd)
        .map(|(&a, &b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
