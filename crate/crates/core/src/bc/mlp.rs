use rand::Rng;
use serde::{Deserialize, Serialize};

/// Fully connected network with tanh hidden layers and a linear output.
///
/// Parameters live in one flat vector, layer by layer: a row-major
/// `out x in` weight block followed by `out` biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Per-layer activations from a forward pass; `layers[0]` is the input.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    layers: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("cache holds the input")
    }
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0));
        let count = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; count],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = rng.random_range(-limit..limit);
            }
            offset += fan_in * fan_out + fan_out;
        }
        net
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Option<Self> {
        let net = Self::zeros(sizes);
        (net.params.len() == params.len()).then(|| Self {
            sizes: sizes.to_vec(),
            params,
        })
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

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) {
        self.params.copy_from_slice(params);
    }

    /// `(weights, biases)` slices of each layer.
    pub fn layers(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        let mut offset = 0;
        self.sizes.windows(2).map(move |w| {
            let nw = w[0] * w[1];
            let weights = &self.params[offset..offset + nw];
            let biases = &self.params[offset + nw..offset + nw + w[1]];
            offset += nw + w[1];
            (weights, biases)
        })
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).layers.pop().unwrap()
    }

    pub fn forward_cached(&self, x: &[f64]) -> ForwardCache {
        assert_eq!(x.len(), self.input_dim(), "network input dimension");
        let last = self.sizes.len() - 2;
        let mut layers = Vec::with_capacity(self.sizes.len());
        layers.push(x.to_vec());
        for (l, (weights, biases)) in self.layers().enumerate() {
            let input = &layers[l];
            let out: Vec<f64> = biases
                .iter()
                .zip(weights.chunks(input.len()))
                .map(|(b, row)| {
                    let z = b + row.iter().zip(input).map(|(w, v)| w * v).sum::<f64>();
                    if l == last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            layers.push(out);
        }
        ForwardCache { layers }
    }

    /// Accumulates `d(grad_out . output) / d params` into `grad`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &[f64], grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len());
        let n_layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for w in self.sizes.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }
        // delta holds dL/dz for the current layer's pre-activations
        let mut delta = grad_out.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let input = &cache.layers[l];
            let off = offsets[l];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                for (g, v) in row.iter_mut().zip(input) {
                    *g += d * v;
                }
                grad[off + n_in * n_out + o] += d;
            }
            if l == 0 {
                break;
            }
            let weights = &self.params[off..off + n_in * n_out];
            let mut prev = vec![0.0; n_in];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for (p, w) in prev.iter_mut().zip(&weights[o * n_in..(o + 1) * n_in]) {
                    *p += d * w;
                }
            }
            // previous layer is a tanh hidden layer: dtanh = 1 - a^2
            for (p, a) in prev.iter_mut().zip(&cache.layers[l]) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
    }

    /// Rows `d output_j / d params` for each output `j`.
    pub fn output_jacobian(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let cache = self.forward_cached(x);
        let k = self.output_dim();
        let rows = (0..k)
            .map(|j| {
                let mut e = vec![0.0; k];
                e[j] = 1.0;
                let mut g = vec![0.0; self.params.len()];
                self.backward(&cache, &e, &mut g);
                g
            })
            .collect();
        (cache.output().to_vec(), rows)
    }
}
