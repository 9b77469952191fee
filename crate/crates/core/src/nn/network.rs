use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{all_finite, Scalar};

/// Fully connected network: tanh on hidden layers, identity on the output layer.
///
/// Parameters live in one flat buffer. Layer `l` stores its weight matrix
/// (`layer_dims[l+1]` rows by `layer_dims[l]` columns, row-major) followed by
/// its bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    layer_dims: Vec<usize>,
    params: Vec<T>,
    offsets: Vec<usize>,
}

/// Per-layer activations recorded by [`Network::forward`].
///
/// `activations[0]` is the input and `activations[l + 1]` is the output of
/// layer `l` after its activation function.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache<T> {
    activations: Vec<Vec<T>>,
}

impl<T> ForwardCache<T> {
    pub fn output(&self) -> &[T] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

fn layer_offsets(dims: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(dims.len());
    let mut acc = 0;
    offsets.push(0);
    for w in dims.windows(2) {
        acc += w[0] * w[1] + w[1];
        offsets.push(acc);
    }
    offsets
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::Config(format!(
            "network needs at least an input and an output layer, got {dims:?}"
        )));
    }
    if dims.contains(&0) {
        return Err(Error::Config(format!("layer sizes must be positive, got {dims:?}")));
    }
    Ok(())
}

impl<T: Scalar> Network<T> {
    /// Builds a network with weights drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` and zero biases.
    pub fn new(layer_dims: &[usize], seed: u64) -> Result<Self> {
        validate_dims(layer_dims)?;
        let offsets = layer_offsets(layer_dims);
        let mut params = vec![T::zero(); *offsets.last().unwrap()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in 0..layer_dims.len() - 1 {
            let fan_in = layer_dims[l];
            let bound = 1.0 / (fan_in as f64).sqrt();
            let start = offsets[l];
            let n_weights = fan_in * layer_dims[l + 1];
            for w in &mut params[start..start + n_weights] {
                *w = T::lit(rng.gen_range(-bound..=bound));
            }
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            params,
            offsets,
        })
    }

    /// Rebuilds a network from a flat parameter vector (see the type-level layout).
    pub fn from_params(layer_dims: &[usize], params: Vec<T>) -> Result<Self> {
        validate_dims(layer_dims)?;
        let offsets = layer_offsets(layer_dims);
        let expected = *offsets.last().unwrap();
        if params.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} parameters for {layer_dims:?}, got {}",
                params.len()
            )));
        }
        if !all_finite(&params) {
            return Err(Error::Numeric("non-finite network parameter".into()));
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            params,
            offsets,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn weight_range(&self, layer: usize) -> std::ops::Range<usize> {
        let start = self.offsets[layer];
        start..start + self.layer_dims[layer] * self.layer_dims[layer + 1]
    }

    fn bias_range(&self, layer: usize) -> std::ops::Range<usize> {
        let end = self.offsets[layer + 1];
        end - self.layer_dims[layer + 1]..end
    }

    /// Row-major weight matrix of `layer` (`out` rows, `in` columns).
    pub fn weights(&self, layer: usize) -> &[T] {
        &self.params[self.weight_range(layer)]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [T] {
        let r = self.weight_range(layer);
        &mut self.params[r]
    }

    pub fn biases(&self, layer: usize) -> &[T] {
        &self.params[self.bias_range(layer)]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [T] {
        let r = self.bias_range(layer);
        &mut self.params[r]
    }

    /// Same layout as [`Network::params`], used for gradients and optimizer moments.
    pub fn zeros_like(&self) -> Vec<T> {
        vec![T::zero(); self.params.len()]
    }

    /// Evaluates the network and records what backpropagation needs.
    pub fn forward(&self, input: &[T]) -> Result<(Vec<T>, ForwardCache<T>)> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "network input has length {}, expected {}",
                input.len(),
                self.input_dim()
            )));
        }
        if !all_finite(input) {
            return Err(Error::Numeric("non-finite network input".into()));
        }
        let mut activations = Vec::with_capacity(self.layer_dims.len());
        activations.push(input.to_vec());
        let last = self.num_layers() - 1;
        for l in 0..self.num_layers() {
            let n_in = self.layer_dims[l];
            let w = self.weights(l);
            let b = self.biases(l);
            let x = &activations[l];
            let out: Vec<T> = b
                .iter()
                .zip(w.chunks_exact(n_in))
                .map(|(&bias, row)| {
                    let z = row.iter().zip(x).fold(bias, |acc, (&wi, &xi)| acc + wi * xi);
                    if l == last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            activations.push(out);
        }
        let output = activations.last().unwrap().clone();
        Ok((output, ForwardCache { activations }))
    }

    /// Output only, without keeping the cache.
    pub fn predict(&self, input: &[T]) -> Result<Vec<T>> {
        self.forward(input).map(|(out, _)| out)
    }

    /// Backpropagates `grad_output` (dL/d output) and returns dL/d params in the flat layout.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_output: &[T]) -> Result<Vec<T>> {
        let mut grads = self.zeros_like();
        self.accumulate_backward(cache, grad_output, &mut grads)?;
        Ok(grads)
    }

    /// Like [`Network::backward`] but adds into an existing gradient buffer.
    pub fn accumulate_backward(
        &self,
        cache: &ForwardCache<T>,
        grad_output: &[T],
        grads: &mut [T],
    ) -> Result<()> {
        let shapes_match = cache.activations.len() == self.layer_dims.len()
            && cache
                .activations
                .iter()
                .zip(&self.layer_dims)
                .all(|(a, &d)| a.len() == d);
        if !shapes_match {
            return Err(Error::Shape("forward cache does not match network shape".into()));
        }
        if grad_output.len() != self.output_dim() {
            return Err(Error::Shape(format!(
                "output gradient has length {}, expected {}",
                grad_output.len(),
                self.output_dim()
            )));
        }
        if grads.len() != self.params.len() {
            return Err(Error::Shape("gradient buffer has wrong length".into()));
        }

        // delta holds dL/dz for the current layer's pre-activations.
        let mut delta = grad_output.to_vec();
        for l in (0..self.num_layers()).rev() {
            let n_in = self.layer_dims[l];
            let x = &cache.activations[l];
            let wr = self.weight_range(l);
            let br = self.bias_range(l);
            for (j, &d) in delta.iter().enumerate() {
                grads[br.start + j] += d;
                let row = &mut grads[wr.start + j * n_in..wr.start + (j + 1) * n_in];
                for (g, &xi) in row.iter_mut().zip(x) {
                    *g += d * xi;
                }
            }
            if l == 0 {
                break;
            }
            // Propagate to the previous layer's tanh outputs.
            let w = self.weights(l);
            let mut prev = vec![T::zero(); n_in];
            for (j, &d) in delta.iter().enumerate() {
                for (p, &wji) in prev.iter_mut().zip(&w[j * n_in..(j + 1) * n_in]) {
                    *p += d * wji;
                }
            }
            for (p, &a) in prev.iter_mut().zip(x) {
                *p *= T::one() - a * a;
            }
            delta = prev;
        }
        Ok(())
    }
}
