//! Residual approximator: a small step-conditioned MLP blended with an anchor.
//!
//! Given a noisy embedding and the step it sits at, the network predicts the
//! clean embedding. The prediction is a convex blend
//! `delta * mlp(noisy, step) + (1 - delta) * anchor`: the anchor supplies a
//! residual shortcut (during training the noisy input itself, during inference
//! the stored source embedding), and `delta` sets how much the network is
//! trusted over it. `delta = 1` disables the shortcut entirely; `delta = 0` is
//! the identity limit used as a reference point in tests.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::time_embed;
use crate::error::{Error, Result};
use crate::scalar::{axpy, Scalar};
use crate::seeds::SeedBank;

/// Which anchor the reverse chain feeds to the approximator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorPolicy {
    /// Anchor on the current noisy vector, mirroring how training anchors on
    /// the corrupted input.
    TrainNoisyInput,
    /// Anchor on the stored source embedding (the default inference behaviour).
    InferSourceEmbedding,
}

/// One dense layer: weights are row-major `[out_dim x in_dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl<T: Scalar> Layer<T> {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Layer {
            weight: vec![T::zero(); in_dim * out_dim],
            bias: vec![T::zero(); out_dim],
            in_dim,
            out_dim,
        }
    }

    fn init_uniform<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        // Xavier-style bound keeps activations in tanh's responsive range.
        let bound = T::cast((6.0 / (in_dim + out_dim) as f64).sqrt());
        let mut layer = Layer::zeros(in_dim, out_dim);
        for w in &mut layer.weight {
            *w = rng.gen_range(-bound..=bound);
        }
        layer
    }

    fn apply(&self, input: &[T], out: &mut Vec<T>) {
        debug_assert_eq!(input.len(), self.in_dim);
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
            out.push(crate::scalar::dot(row, input) + self.bias[o]);
        }
    }
}

/// Layer-by-layer activations kept around for the backward pass.
///
/// `post[l]` is the output of layer `l` after its nonlinearity; the network
/// input itself is stored separately by the caller.
#[derive(Debug, Clone)]
pub struct MlpActivations<T> {
    pub post: Vec<Vec<T>>,
}

impl<T> MlpActivations<T> {
    /// The network output (the last layer is linear).
    pub fn output(&self) -> &[T] {
        self.post.last().expect("network has at least one layer")
    }
}

/// Gradient buffers for the approximator: one per layer plus the blend weight.
#[derive(Debug, Clone)]
pub struct ApproxGrads<T> {
    pub layers: Vec<Layer<T>>,
    pub delta: T,
}

impl<T: Scalar> ApproxGrads<T> {
    pub fn zeros_like(approx: &ResidualApproximator<T>) -> Self {
        ApproxGrads {
            layers: approx
                .layers
                .iter()
                .map(|l| Layer::zeros(l.in_dim, l.out_dim))
                .collect(),
            delta: T::zero(),
        }
    }

    pub fn reset(&mut self) {
        for layer in &mut self.layers {
            for w in &mut layer.weight {
                *w = T::zero();
            }
            for b in &mut layer.bias {
                *b = T::zero();
            }
        }
        self.delta = T::zero();
    }
}

/// The step-conditioned residual network.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualApproximator<T> {
    layers: Vec<Layer<T>>,
    dim: usize,
    step_dim: usize,
    hidden: usize,
    delta: T,
    anchor_policy: AnchorPolicy,
}

/// Depths the architecture supports.
pub const SUPPORTED_DEPTHS: [usize; 4] = [1, 2, 4, 8];

impl<T: Scalar> ResidualApproximator<T> {
    /// Build a fresh network: `depth` dense layers from `dim + step_dim` inputs
    /// to `dim` outputs through `hidden`-wide tanh layers (the output layer is
    /// linear), seeded initialisation, blend weight `delta` in `[0, 1]`.
    pub fn new(
        dim: usize,
        step_dim: usize,
        depth: usize,
        hidden: usize,
        delta: T,
        anchor_policy: AnchorPolicy,
        seed: u64,
    ) -> Result<Self> {
        if !SUPPORTED_DEPTHS.contains(&depth) {
            return Err(Error::invalid(
                "depth",
                format!("{depth} not one of {SUPPORTED_DEPTHS:?}"),
            ));
        }
        if !(8..=4096).contains(&hidden) {
            return Err(Error::invalid(
                "hidden width",
                format!("{hidden} outside [8, 4096]"),
            ));
        }
        if step_dim < 2 || step_dim % 2 != 0 {
            return Err(Error::invalid(
                "step embedding width",
                format!("{step_dim} is not an even number >= 2"),
            ));
        }
        if dim == 0 {
            return Err(Error::invalid("dim", "embedding width must be positive"));
        }
        if !(delta >= T::zero() && delta <= T::one()) {
            return Err(Error::invalid("delta", format!("{delta} outside [0, 1]")));
        }
        let mut rng = SeedBank::new(seed).rng(crate::seeds::labels::INIT);
        let in_dim = dim + step_dim;
        let mut layers = Vec::with_capacity(depth);
        if depth == 1 {
            layers.push(Layer::init_uniform(in_dim, dim, &mut rng));
        } else {
            layers.push(Layer::init_uniform(in_dim, hidden, &mut rng));
            for _ in 0..depth - 2 {
                layers.push(Layer::init_uniform(hidden, hidden, &mut rng));
            }
            layers.push(Layer::init_uniform(hidden, dim, &mut rng));
        }
        Ok(ResidualApproximator {
            layers,
            dim,
            step_dim,
            hidden,
            delta,
            anchor_policy,
        })
    }

    /// The identity limit: `delta = 0` with a zeroed single layer, so every
    /// prediction returns its anchor exactly. Useful as a reference model.
    pub fn passthrough(dim: usize, step_dim: usize) -> Self {
        ResidualApproximator {
            layers: vec![Layer::zeros(dim + step_dim, dim)],
            dim,
            step_dim,
            hidden: 8,
            delta: T::zero(),
            anchor_policy: AnchorPolicy::InferSourceEmbedding,
        }
    }

    /// Rebuild from stored parts (deserialization); same validation as `new`
    /// except the layer shapes are taken as given.
    pub fn from_parts(
        layers: Vec<Layer<T>>,
        dim: usize,
        step_dim: usize,
        hidden: usize,
        delta: T,
        anchor_policy: AnchorPolicy,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("layers", "network needs at least one layer"));
        }
        if layers[0].in_dim != dim + step_dim {
            return Err(Error::DimensionMismatch {
                context: "first layer input width",
                expected: dim + step_dim,
                got: layers[0].in_dim,
            });
        }
        if layers.last().unwrap().out_dim != dim {
            return Err(Error::DimensionMismatch {
                context: "last layer output width",
                expected: dim,
                got: layers.last().unwrap().out_dim,
            });
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::DimensionMismatch {
                    context: "consecutive layer widths",
                    expected: pair[0].out_dim,
                    got: pair[1].in_dim,
                });
            }
        }
        if !(delta >= T::zero() && delta <= T::one()) {
            return Err(Error::invalid("delta", format!("{delta} outside [0, 1]")));
        }
        Ok(ResidualApproximator {
            layers,
            dim,
            step_dim,
            hidden,
            delta,
            anchor_policy,
        })
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    /// Mutable layer access for optimizers. Callers must keep the per-layer
    /// shapes intact; only the values are theirs to change.
    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step_dim(&self) -> usize {
        self.step_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn anchor_policy(&self) -> AnchorPolicy {
        self.anchor_policy
    }

    /// Replace the blend weight (used by ablations that disable the shortcut).
    pub fn set_delta(&mut self, delta: T) -> Result<()> {
        if !(delta >= T::zero() && delta <= T::one()) {
            return Err(Error::invalid("delta", format!("{delta} outside [0, 1]")));
        }
        self.delta = delta;
        Ok(())
    }

    pub fn set_anchor_policy(&mut self, policy: AnchorPolicy) {
        self.anchor_policy = policy;
    }

    /// Concatenate a noisy embedding with its step embedding.
    pub fn assemble_input(&self, e_noisy: &[T], t: usize) -> Result<Vec<T>> {
        if e_noisy.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "noisy embedding width",
                expected: self.dim,
                got: e_noisy.len(),
            });
        }
        let mut input = Vec::with_capacity(self.dim + self.step_dim);
        input.extend_from_slice(e_noisy);
        input.extend(time_embed::<T>(t, self.step_dim)?);
        Ok(input)
    }

    /// Run the network, keeping every layer's output for a later backward pass.
    /// Hidden layers apply tanh; the output layer is linear.
    pub fn forward_cached(&self, input: &[T]) -> MlpActivations<T> {
        let mut post = Vec::with_capacity(self.layers.len());
        let mut current = input.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.apply(&current, &mut z);
            if l < last {
                for v in &mut z {
                    *v = v.tanh();
                }
            }
            post.push(z.clone());
            current = z;
        }
        MlpActivations { post }
    }

    /// Predict the clean embedding from a noisy one:
    /// `delta * mlp(noisy, t) + (1 - delta) * anchor`.
    pub fn predict_e0(&self, e_noisy: &[T], t: usize, anchor: &[T]) -> Result<Vec<T>> {
        if anchor.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "anchor width",
                expected: self.dim,
                got: anchor.len(),
            });
        }
        let input = self.assemble_input(e_noisy, t)?;
        let acts = self.forward_cached(&input);
        let keep = T::one() - self.delta;
        Ok(acts
            .output()
            .iter()
            .zip(anchor)
            .map(|(&f, &a)| self.delta * f + keep * a)
            .collect())
    }

    /// Backpropagate `d_output` (the loss gradient at the network output)
    /// through the layers, accumulating parameter gradients scaled by `scale`
    /// and returning the gradient at the network input.
    pub fn backward(
        &self,
        input: &[T],
        acts: &MlpActivations<T>,
        d_output: &[T],
        scale: T,
        grads: &mut ApproxGrads<T>,
    ) -> Vec<T> {
        debug_assert_eq!(grads.layers.len(), self.layers.len());
        let last = self.layers.len() - 1;
        let mut d_post = d_output.to_vec();
        for l in (0..self.layers.len()).rev() {
            // Undo the nonlinearity: the output layer is linear, hidden layers
            // need tanh'(z) = 1 - tanh(z)^2 read off the stored activation.
            let mut d_z = d_post;
            if l < last {
                for (dz, &a) in d_z.iter_mut().zip(&acts.post[l]) {
                    *dz = *dz * (T::one() - a * a);
                }
            }
            let layer = &self.layers[l];
            let layer_input: &[T] = if l == 0 { input } else { &acts.post[l - 1] };
            let grad_layer = &mut grads.layers[l];
            let mut d_input = vec![T::zero(); layer.in_dim];
            for o in 0..layer.out_dim {
                let g = d_z[o];
                grad_layer.bias[o] += scale * g;
                let w_row = &layer.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                let gw_row = &mut grad_layer.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                axpy(gw_row, scale * g, layer_input);
                axpy(&mut d_input, g, w_row);
            }
            d_post = d_input;
        }
        d_post
    }
}
