//! Feedforward Q-network with flat parameter storage and hand-derived
//! backpropagation.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Rng;

/// Multi-layer perceptron mapping a feature vector to one value per action.
///
/// Parameters are stored in one flat vector, layer by layer: the weight
/// matrix (row-major, `out x in`) followed by the bias vector. Hidden layers
/// use ReLU; the output layer is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpQNetwork {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[0]` is the input; `activations[l + 1]` is the output of
    /// layer `l` after its nonlinearity.
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache holds the input")
    }
}

impl MlpQNetwork {
    /// All-zero network with the given layer sizes (input first).
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&n| n == 0) {
            return Err(Error::invalid(format!("invalid layer sizes {sizes:?}")));
        }
        let n = sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum();
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; n],
        })
    }

    /// Weights and biases uniform in `±1/sqrt(fan_in)`.
    pub fn new(sizes: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let mut offset = 0;
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            let len = w[1] * w[0] + w[1];
            for p in &mut net.params[offset..offset + len] {
                *p = rng.gen_range(-bound..bound);
            }
            offset += len;
        }
        Ok(net)
    }

    /// `input -> width -> width -> n_actions`.
    pub fn two_hidden(input: usize, width: usize, n_actions: usize, rng: &mut Rng) -> Result<Self> {
        Self::new(&[input, width, width, n_actions], rng)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Rebuilds a network from a shape manifest and flat parameters.
    pub fn from_parts(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(Error::DimensionMismatch {
                expected: net.params.len(),
                actual: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite network parameter"));
        }
        net.params = params;
        Ok(net)
    }

    /// Offsets of (weights, biases) of layer `l` in the flat vector.
    pub(crate) fn layer_offsets(&self, layer: usize) -> (usize, usize) {
        let mut offset = 0;
        for w in self.sizes.windows(2).take(layer) {
            offset += w[1] * w[0] + w[1];
        }
        let (fan_in, fan_out) = (self.sizes[layer], self.sizes[layer + 1]);
        (offset, offset + fan_in * fan_out)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut current = x.to_vec();
        for l in 0..self.n_layers() {
            current = self.layer(l, &current);
        }
        Ok(current)
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.sizes.len());
        activations.push(x.to_vec());
        for l in 0..self.n_layers() {
            let next = self.layer(l, activations.last().unwrap());
            activations.push(next);
        }
        Ok(ForwardCache { activations })
    }

    fn layer(&self, l: usize, input: &[f64]) -> Vec<f64> {
        let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
        let (w_off, b_off) = self.layer_offsets(l);
        let hidden = l + 1 < self.n_layers();
        (0..fan_out)
            .map(|o| {
                let row = &self.params[w_off + o * fan_in..w_off + (o + 1) * fan_in];
                let z = self.params[b_off + o] + dot(row, input);
                if hidden {
                    z.max(0.0)
                } else {
                    z
                }
            })
            .collect()
    }

    /// Accumulates `d output · d params` for the output gradient `d_out`
    /// into `grad` (same layout as the parameters).
    pub fn backward(&self, cache: &ForwardCache, d_out: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        debug_assert_eq!(d_out.len(), self.output_dim());
        let mut delta = d_out.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w_off, b_off) = self.layer_offsets(l);
            let input = &cache.activations[l];
            for o in 0..fan_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                grad[b_off + o] += d;
                let g = &mut grad[w_off + o * fan_in..w_off + (o + 1) * fan_in];
                for (gi, xi) in g.iter_mut().zip(input) {
                    *gi += d * xi;
                }
            }
            if l == 0 {
                break;
            }
            let mut prev = vec![0.0; fan_in];
            for o in 0..fan_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &self.params[w_off + o * fan_in..w_off + (o + 1) * fan_in];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            // ReLU derivative, taken as 0 at the kink.
            for (p, a) in prev.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }

    /// Flat JSON document `{"sizes": [...], "params": [...]}`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: MlpQNetwork = serde_json::from_str(text)?;
        Self::from_parts(&raw.sizes, raw.params)
    }
}

/// Free-function form of [`MlpQNetwork::forward`].
pub fn mlp_forward(net: &MlpQNetwork, x: &[f64]) -> Result<Vec<f64>> {
    net.forward(x)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
