//! Fully connected ReLU network with a softmax output.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{softmax_into, ProbVector};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    /// `weights[l]` has shape `(dims[l], dims[l + 1])`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Parameter gradients (also used for momentum buffers).
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Activations kept from a batched forward pass.
pub(crate) struct ForwardCache {
    /// Input to each layer (the batch itself for layer 0).
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each hidden layer.
    pre: Vec<Array2<f64>>,
    pub logits: Array2<f64>,
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::Configuration(format!(
            "network needs input and output sizes, got {dims:?}"
        )));
    }
    if dims.contains(&0) {
        return Err(Error::Configuration(format!(
            "layer sizes must be positive, got {dims:?}"
        )));
    }
    Ok(())
}

impl MlpModel {
    /// Weights uniform in `+-sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn init(dims: &[usize], seed: u64) -> Result<Self> {
        check_dims(dims)?;
        let mut r = rng::stream(seed, 0);
        let weights = dims
            .windows(2)
            .map(|w| {
                let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
                Array2::from_shape_simple_fn((w[0], w[1]), || r.random_range(-bound..bound))
            })
            .collect();
        let biases = dims[1..].iter().map(|&n| Array1::zeros(n)).collect();
        Ok(MlpModel { weights, biases })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        Ok(MlpModel {
            weights: dims.windows(2).map(|w| Array2::zeros((w[0], w[1]))).collect(),
            biases: dims[1..].iter().map(|&n| Array1::zeros(n)).collect(),
        })
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.weights[0].nrows()];
        dims.extend(self.weights.iter().map(|w| w.ncols()));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.weights.last().map_or(0, |w| w.ncols())
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Logits and class probabilities for one input.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ProbVector)> {
        self.check_input(x)?;
        let batch = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        let logits = self.forward_cached(batch).logits.row(0).to_vec();
        let mut probs = vec![0.0; logits.len()];
        softmax_into(&logits, &mut probs);
        Ok((logits, ProbVector::new(probs)?))
    }

    /// Gradients of a scalar objective whose gradient with respect to the
    /// logits at input `x` is `grad_logits`.
    pub fn backward(&self, x: &[f64], grad_logits: &[f64]) -> Result<Gradients> {
        self.check_input(x)?;
        if grad_logits.len() != self.num_classes() {
            return Err(Error::DimensionMismatch {
                expected: self.num_classes(),
                actual: grad_logits.len(),
            });
        }
        if grad_logits.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidInput("non-finite logit gradient".into()));
        }
        let batch = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        let cache = self.forward_cached(batch);
        let dz = Array2::from_shape_vec((1, grad_logits.len()), grad_logits.to_vec()).expect("row vector");
        Ok(self.backward_cached(&cache, dz))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite input".into()));
        }
        Ok(())
    }

    pub(crate) fn forward_cached(&self, x: ArrayView2<'_, f64>) -> ForwardCache {
        let n_layers = self.weights.len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre = Vec::with_capacity(n_layers - 1);
        let mut a = x.to_owned();
        for l in 0..n_layers {
            let z = a.dot(&self.weights[l]) + &self.biases[l];
            inputs.push(a);
            if l + 1 == n_layers {
                return ForwardCache { inputs, pre, logits: z };
            }
            a = z.mapv(|v| v.max(0.0));
            pre.push(z);
        }
        unreachable!("network has at least one layer")
    }

    /// Logits for a batch of inputs (rows).
    pub fn logits_batch(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.forward_cached(x).logits
    }

    pub(crate) fn backward_cached(&self, cache: &ForwardCache, mut dz: Array2<f64>) -> Gradients {
        let n_layers = self.weights.len();
        let mut weights = vec![Array2::zeros((0, 0)); n_layers];
        let mut biases = vec![Array1::zeros(0); n_layers];
        for l in (0..n_layers).rev() {
            weights[l] = cache.inputs[l].t().dot(&dz);
            biases[l] = dz.sum_axis(Axis(0));
            if l > 0 {
                let mut da = dz.dot(&self.weights[l].t());
                da.zip_mut_with(&cache.pre[l - 1], |g, &z| {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                });
                dz = da;
            }
        }
        Gradients { weights, biases }
    }

    /// All parameters, layer by layer, weights (row-major) before biases.
    pub fn to_flat(&self) -> Vec<f64> {
        flatten(&self.weights, &self.biases)
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                actual: values.len(),
            });
        }
        let mut it = values.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().for_each(|v| *v = it.next().expect("length checked"));
            b.iter_mut().for_each(|v| *v = it.next().expect("length checked"));
        }
        Ok(())
    }
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Gradients {
            weights: model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: model.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    /// Same ordering as [`MlpModel::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        flatten(&self.weights, &self.biases)
    }
}

fn flatten(weights: &[Array2<f64>], biases: &[Array1<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for (w, b) in weights.iter().zip(biases) {
        out.extend(w.iter());
        out.extend(b.iter());
    }
    out
}
