use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use super::activation::Activation;
use crate::config::InputTransform;
use crate::error::{Error, Result};
use crate::rate::PowerAllocation;

/// Floor on the per-feature standard deviation.
pub const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out x in`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Per-feature standardization, fitted on training inputs only.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub transform: InputTransform,
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize, transform: InputTransform) -> Self {
        Normalizer {
            transform,
            mean: Array1::zeros(dim),
            std: Array1::ones(dim),
        }
    }

    fn raw(transform: InputTransform, beta: f64) -> f64 {
        match transform {
            InputTransform::Log => 10.0 * beta.log10(),
            InputTransform::Linear => beta,
        }
    }

    /// Fits mean and (population) standard deviation over the rows of `raw`.
    pub fn fit(raw: ArrayView2<'_, f64>, transform: InputTransform) -> Result<Self> {
        let n = raw.nrows();
        if n == 0 {
            return Err(Error::Config("cannot fit a normalizer on zero samples".into()));
        }
        let transformed = raw.mapv(|b| Self::raw(transform, b));
        let mean = transformed.sum_axis(Axis(0)) / n as f64;
        let mut var = Array1::<f64>::zeros(raw.ncols());
        for row in transformed.rows() {
            for ((v, x), mu) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - mu) * (x - mu);
            }
        }
        let std = var.mapv(|v| (v / n as f64).sqrt().max(STD_FLOOR));
        Ok(Normalizer { transform, mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Maps rows of raw `beta` vectors to standardized features.
    pub fn apply(&self, raw: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = raw.mapv(|b| Self::raw(self.transform, b));
        for mut row in out.rows_mut() {
            for ((x, mu), sd) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *x = (*x - mu) / sd;
            }
        }
        out
    }
}

/// Fully connected power-control network `{MK, MK, K, M, K}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub num_aps: usize,
    pub num_users: usize,
    pub layers: Vec<DenseLayer>,
    pub normalizer: Normalizer,
}

/// Gradient (or any tensor) shaped like the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    pub fn zeros_like(model: &Mlp) -> Self {
        Gradients {
            layers: model
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.len())))
                .collect(),
        }
    }

    /// Flat coordinate in the same order as [`Mlp::param`].
    pub fn get(&self, index: usize) -> f64 {
        let mut i = index;
        for (w, b) in &self.layers {
            if i < w.len() {
                return w.as_slice().expect("standard layout")[i];
            }
            i -= w.len();
            if i < b.len() {
                return b[i];
            }
            i -= b.len();
        }
        panic!("gradient index {index} out of range");
    }

    pub(crate) fn shape_matches(&self, model: &Mlp) -> bool {
        self.layers.len() == model.layers.len()
            && self
                .layers
                .iter()
                .zip(&model.layers)
                .all(|((w, b), l)| w.dim() == l.weights.dim() && b.len() == l.bias.len())
    }
}

/// Pre- and post-activation values for every layer of a batch.
pub(crate) struct ForwardCache {
    pub input: Array2<f64>,
    pub pre: Vec<Array2<f64>>,
    pub post: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.post.last().expect("at least one layer")
    }
}

impl Mlp {
    /// Layers `MK→MK→K→M→K` with eLU, eLU, eLU, sigmoid. Weights are
    /// uniform in `±√(6 / (fan_in + fan_out))`, biases zero.
    pub fn build(num_aps: usize, num_users: usize, seed: u64) -> Self {
        Self::build_with(num_aps, num_users, seed, InputTransform::default())
    }

    pub fn build_with(num_aps: usize, num_users: usize, seed: u64, transform: InputTransform) -> Self {
        let mk = num_aps * num_users;
        let widths = [mk, mk, num_users, num_aps, num_users];
        let activations = [
            Activation::Elu,
            Activation::Elu,
            Activation::Elu,
            Activation::Sigmoid,
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = widths
            .windows(2)
            .zip(activations)
            .map(|(w, activation)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
                DenseLayer {
                    weights: Array2::from_shape_simple_fn((fan_out, fan_in), || dist.sample(&mut rng)),
                    bias: Array1::zeros(fan_out),
                    activation,
                }
            })
            .collect();
        Mlp {
            num_aps,
            num_users,
            layers,
            normalizer: Normalizer::identity(mk, transform),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.num_aps * self.num_users
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(DenseLayer::output_dim));
        w
    }

    /// Power allocation for one flattened (AP-major) `beta` vector.
    pub fn forward(&self, beta: &[f64]) -> Result<PowerAllocation> {
        if beta.len() != self.input_dim() {
            return Err(Error::dimension("network input", self.input_dim(), beta.len()));
        }
        let mut x: Array1<f64> = beta
            .iter()
            .zip(self.normalizer.mean.iter().zip(&self.normalizer.std))
            .map(|(&b, (mean, std))| (Normalizer::raw(self.normalizer.transform, b) - mean) / std)
            .collect();
        for layer in &self.layers {
            let mut z = layer.weights.dot(&x);
            z += &layer.bias;
            z.mapv_inplace(|v| layer.activation.apply(v));
            x = z;
        }
        PowerAllocation::new(x.to_vec())
    }

    /// Power allocations for rows of raw `beta` vectors.
    pub fn forward_batch(&self, raw: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if raw.ncols() != self.input_dim() {
            return Err(Error::dimension("network input", self.input_dim(), raw.ncols()));
        }
        Ok(self.forward_features(self.normalizer.apply(raw).view()))
    }

    /// Forward pass over rows of already-normalized features.
    pub fn forward_features(&self, features: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut x = features.to_owned();
        for layer in &self.layers {
            let mut z = x.dot(&layer.weights.t());
            z += &layer.bias;
            z.mapv_inplace(|v| layer.activation.apply(v));
            x = z;
        }
        x
    }

    pub(crate) fn forward_cached(&self, features: Array2<f64>) -> ForwardCache {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let x = post.last().unwrap_or(&features);
            let mut z = x.dot(&layer.weights.t());
            z += &layer.bias;
            let a = z.mapv(|v| layer.activation.apply(v));
            pre.push(z);
            post.push(a);
        }
        ForwardCache {
            input: features,
            pre,
            post,
        }
    }

    /// Reverse pass given `d loss / d output` for every row of the batch.
    pub(crate) fn backward(&self, cache: &ForwardCache, d_output: Array2<f64>) -> Gradients {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut d_post = d_output;
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let mut d_pre = d_post;
            ndarray::Zip::from(&mut d_pre)
                .and(&cache.pre[l])
                .and(&cache.post[l])
                .for_each(|d, &z, &a| *d *= layer.activation.derivative(z, a));
            let input = if l == 0 { &cache.input } else { &cache.post[l - 1] };
            let d_weights = d_pre.t().dot(input);
            let d_bias = d_pre.sum_axis(Axis(0));
            d_post = if l > 0 { d_pre.dot(&layer.weights) } else { Array2::zeros((0, 0)) };
            grads.push((d_weights, d_bias));
        }
        grads.reverse();
        Gradients { layers: grads }
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::num_params).sum()
    }

    fn locate(&self, index: usize) -> (usize, Option<usize>, usize) {
        let mut i = index;
        for (l, layer) in self.layers.iter().enumerate() {
            if i < layer.weights.len() {
                return (l, Some(i), 0);
            }
            i -= layer.weights.len();
            if i < layer.bias.len() {
                return (l, None, i);
            }
            i -= layer.bias.len();
        }
        panic!("parameter index {index} out of range");
    }

    /// Flat parameter access: per layer, weights row-major then bias.
    pub fn param(&self, index: usize) -> f64 {
        match self.locate(index) {
            (l, Some(w), _) => self.layers[l].weights.as_slice().expect("standard layout")[w],
            (l, None, b) => self.layers[l].bias[b],
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        match self.locate(index) {
            (l, Some(w), _) => {
                self.layers[l].weights.as_slice_mut().expect("standard layout")[w] = value
            }
            (l, None, b) => self.layers[l].bias[b] = value,
        }
    }
}
