//! Actor/critic network containers with explicit backward passes.
//!
//! A [`Network`] is a backbone followed by `hidden_layers` rectified-linear
//! dense layers and a linear output layer, optionally squashed entrywise
//! with tanh (the actor's box constraint). The backbone is either an LSTM
//! cell consuming the whole observation window, or — for the
//! recurrence-free ablation — a single rectified-linear dense layer that
//! sees only the final window step.
//!
//! Forward passes return a cache; backward passes accumulate parameter
//! gradients into a structural twin (see [`crate::nn::zeros_like`]) and
//! return the gradient with respect to the final window input, which the
//! policy update needs to reach the action columns of the critic input.

use ndarray::{Array2, ArrayViewD, ArrayViewMutD};
use rand_chacha::ChaCha8Rng;

use crate::nn::{relu, relu_backward, Dense, LstmCell, TensorSet};
use crate::nn::lstm::LstmCache;

use super::AgentConfig;

// ---------------------------------------------------------------------------
// Backbone

/// First stage of a network: recurrent over the window, or flat.
#[derive(Debug, Clone)]
pub enum Backbone {
    /// LSTM cell over every step of the window.
    Recurrent(LstmCell),
    /// Dense + rectifier on the final window step only (ablation).
    Flat(Dense),
}

/// Forward cache for [`Backbone`].
pub enum BackboneCache {
    /// Per-step LSTM intermediates.
    Recurrent(LstmCache),
    /// Final-step input and pre-activation.
    Flat { x: Array2<f64>, pre: Array2<f64> },
}

impl Backbone {
    fn forward(&self, xs: &[Array2<f64>]) -> (Array2<f64>, BackboneCache) {
        match self {
            Backbone::Recurrent(cell) => {
                let (h, cache) = cell.forward_seq(xs);
                (h, BackboneCache::Recurrent(cache))
            }
            Backbone::Flat(dense) => {
                let x = xs.last().expect("window must be nonempty").clone();
                let pre = dense.forward(&x);
                (relu(&pre), BackboneCache::Flat { x, pre })
            }
        }
    }

    /// Returns the gradient with respect to the final window input.
    fn backward(
        &self,
        cache: &BackboneCache,
        dfeat: &Array2<f64>,
        grads: &mut Backbone,
    ) -> Array2<f64> {
        match (self, cache, grads) {
            (Backbone::Recurrent(cell), BackboneCache::Recurrent(c), Backbone::Recurrent(g)) => {
                let mut dxs = cell.backward_seq(c, dfeat, g);
                dxs.pop().expect("window must be nonempty")
            }
            (Backbone::Flat(dense), BackboneCache::Flat { x, pre }, Backbone::Flat(g)) => {
                let d = relu_backward(pre, dfeat);
                dense.backward(x, &d, g)
            }
            _ => panic!("backbone, cache and gradient twin must agree in kind"),
        }
    }
}

impl TensorSet for Backbone {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        match self {
            Backbone::Recurrent(cell) => cell.tensors(),
            Backbone::Flat(dense) => dense.tensors(),
        }
    }
    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        match self {
            Backbone::Recurrent(cell) => cell.tensors_mut(),
            Backbone::Flat(dense) => dense.tensors_mut(),
        }
    }
}

// ---------------------------------------------------------------------------
// Network

/// Backbone → rectified-linear hidden stack → linear output
/// (→ entrywise tanh when `squash`).
#[derive(Debug, Clone)]
pub struct Network {
    /// Window-consuming first stage.
    pub backbone: Backbone,
    /// Hidden dense layers, each followed by a rectifier.
    pub hidden: Vec<Dense>,
    /// Output projection.
    pub out: Dense,
    /// Entrywise tanh on the output (actor) or identity (critic).
    pub squash: bool,
}

/// Forward cache for [`Network`].
pub struct NetCache {
    backbone: BackboneCache,
    /// Input to each hidden layer.
    hidden_in: Vec<Array2<f64>>,
    /// Pre-activation output of each hidden layer.
    hidden_pre: Vec<Array2<f64>>,
    /// Input to the output layer.
    out_in: Array2<f64>,
    /// Final output (after squashing if any).
    output: Array2<f64>,
}

impl Network {
    /// Builds a network with fan-in uniform initialization. `name`
    /// prefixes every tensor name, so checkpoints stay unambiguous.
    pub fn new(
        name: &str,
        in_dim: usize,
        out_dim: usize,
        cfg: &AgentConfig,
        squash: bool,
        rng: &mut ChaCha8Rng,
    ) -> Network {
        let width = cfg.hidden_width;
        let backbone = if cfg.recurrent {
            Backbone::Recurrent(LstmCell::new(&format!("{name}.lstm"), in_dim, width, rng))
        } else {
            Backbone::Flat(Dense::new(&format!("{name}.flat"), in_dim, width, rng))
        };
        let hidden = (0..cfg.hidden_layers)
            .map(|i| Dense::new(&format!("{name}.h{i}"), width, width, rng))
            .collect();
        let out = Dense::new(&format!("{name}.out"), width, out_dim, rng);
        Network {
            backbone,
            hidden,
            out,
            squash,
        }
    }

    /// Input width expected at every window step.
    pub fn in_dim(&self) -> usize {
        match &self.backbone {
            Backbone::Recurrent(cell) => cell.in_dim(),
            Backbone::Flat(dense) => dense.in_dim(),
        }
    }

    /// Output width.
    pub fn out_dim(&self) -> usize {
        self.out.out_dim()
    }

    /// Runs the network over a window of inputs (each `batch × in`) and
    /// returns the output for the final step (`batch × out`) plus the
    /// cache for [`Network::backward`].
    pub fn forward_window(&self, xs: &[Array2<f64>]) -> (Array2<f64>, NetCache) {
        let (mut a, backbone) = self.backbone.forward(xs);
        let mut hidden_in = Vec::with_capacity(self.hidden.len());
        let mut hidden_pre = Vec::with_capacity(self.hidden.len());
        for layer in &self.hidden {
            let pre = layer.forward(&a);
            hidden_in.push(a);
            hidden_pre.push(pre.clone());
            a = relu(&pre);
        }
        let out_in = a;
        let mut y = self.out.forward(&out_in);
        if self.squash {
            y.mapv_inplace(f64::tanh);
        }
        let cache = NetCache {
            backbone,
            hidden_in,
            hidden_pre,
            out_in,
            output: y.clone(),
        };
        (y, cache)
    }

    /// Backpropagates `dy` (gradient on the output), accumulating
    /// parameter gradients into `grads` and returning the gradient with
    /// respect to the final window input.
    pub fn backward(&self, cache: &NetCache, dy: &Array2<f64>, grads: &mut Network) -> Array2<f64> {
        let mut d = if self.squash {
            let mut d = dy.clone();
            d.zip_mut_with(&cache.output, |g, &y| *g *= 1.0 - y * y);
            d
        } else {
            dy.clone()
        };
        d = self.out.backward(&cache.out_in, &d, &mut grads.out);
        for i in (0..self.hidden.len()).rev() {
            d = relu_backward(&cache.hidden_pre[i], &d);
            d = self.hidden[i].backward(&cache.hidden_in[i], &d, &mut grads.hidden[i]);
        }
        self.backbone.backward(&cache.backbone, &d, &mut grads.backbone)
    }
}

impl TensorSet for Network {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = self.backbone.tensors();
        for layer in &self.hidden {
            out.extend(layer.tensors());
        }
        out.extend(self.out.tensors());
        out
    }
    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut out = self.backbone.tensors_mut();
        for layer in &mut self.hidden {
            out.extend(layer.tensors_mut());
        }
        out.extend(self.out.tensors_mut());
        out
    }
}

// ---------------------------------------------------------------------------
