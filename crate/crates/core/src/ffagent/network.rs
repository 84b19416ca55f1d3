//! A small fully connected network with ReLU hidden layers and a linear
//! output layer, plus the Adam optimizer used to fit it.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out x in`, row-major.
    pub weights: Array2<f32>,
    pub bias: Array1<f32>,
}

impl Dense {
    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

type Grads = Vec<(Array2<f32>, Array1<f32>)>;

impl Mlp {
    /// He-uniform initialised network with the given layer widths
    /// (`sizes[0]` inputs, `sizes[last]` outputs).
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output widths");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / fan_in as f32).sqrt();
                let weights =
                    Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-bound..bound));
                Dense { weights, bias: Array1::zeros(fan_out) }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| Dense { weights: Array2::zeros((w[1], w[0])), bias: Array1::zeros(w[1]) })
            .collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self, String> {
        if layers.is_empty() {
            return Err("network has no layers".into());
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(format!("layer {i}: bias length {} != rows {}", l.bias.len(), l.outputs()));
            }
            if l.weights.iter().chain(l.bias.iter()).any(|x| !x.is_finite()) {
                return Err(format!("layer {i}: non-finite parameter"));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(format!(
                    "layer {} outputs {} but layer {} expects {}",
                    i,
                    pair[0].outputs(),
                    i + 1,
                    pair[1].inputs()
                ));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs()
    }

    pub fn forward(&self, x: &[f32]) -> Vec<f32> {
        let mut h = Array1::from(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.weights.dot(&h) + &layer.bias;
            if i < last {
                h.mapv_inplace(relu);
            }
        }
        h.to_vec()
    }

    /// Forward pass over a `batch x in` matrix.
    pub fn forward_batch(&self, x: ArrayView2<f32>) -> Array2<f32> {
        let mut h = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = h.dot(&layer.weights.t()) + &layer.bias;
            if i < last {
                h.mapv_inplace(relu);
            }
        }
        h
    }

    /// Mean squared error between output `actions[b]` of row `b` and
    /// `targets[b]`, and its gradients with respect to every parameter.
    pub fn mse_gradients(
        &self,
        x: ArrayView2<f32>,
        actions: &[usize],
        targets: &[f32],
    ) -> (f32, Grads) {
        let batch = x.nrows();
        debug_assert_eq!(actions.len(), batch);
        debug_assert_eq!(targets.len(), batch);
        let last = self.layers.len() - 1;

        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut h = activations[i].dot(&layer.weights.t()) + &layer.bias;
            if i < last {
                h.mapv_inplace(relu);
            }
            activations.push(h);
        }

        let out = &activations[last + 1];
        let mut delta = Array2::<f32>::zeros(out.raw_dim());
        let mut loss = 0.0f32;
        for b in 0..batch {
            let err = out[[b, actions[b]]] - targets[b];
            loss += err * err;
            delta[[b, actions[b]]] = 2.0 * err / batch as f32;
        }
        loss /= batch as f32;

        let mut grads: Grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let input = &activations[i];
            let gw = delta.t().dot(input);
            let gb = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut prev = delta.dot(&self.layers[i].weights);
                prev.zip_mut_with(input, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = prev;
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        (loss, grads)
    }
}

fn relu(x: f32) -> f32 {
    x.max(0.0)
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    /// Gradients are rescaled so their global L2 norm never exceeds this.
    pub max_grad_norm: f32,
    step: i32,
    m: Grads,
    v: Grads,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f32) -> Self {
        let zeros: Grads = net
            .layers
            .iter()
            .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.len())))
            .collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_grad_norm: 10.0,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn apply(&mut self, net: &mut Mlp, mut grads: Grads) {
        let norm = grads
            .iter()
            .map(|(w, b)| w.iter().chain(b.iter()).map(|g| g * g).sum::<f32>())
            .sum::<f32>()
            .sqrt();
        if norm > self.max_grad_norm {
            let scale = self.max_grad_norm / norm;
            for (w, b) in grads.iter_mut() {
                w.mapv_inplace(|g| g * scale);
                b.mapv_inplace(|g| g * scale);
            }
        }

        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let step_size = self.lr * c2.sqrt() / c1;
        for ((layer, (gw, gb)), ((mw, mb), (vw, vb))) in net
            .layers
            .iter_mut()
            .zip(grads.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            update(&mut layer.weights, gw, mw, vw, b1, b2, eps, step_size);
            update(&mut layer.bias, gb, mb, vb, b1, b2, eps, step_size);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn update<D: ndarray::Dimension>(
    param: &mut ndarray::Array<f32, D>,
    grad: &ndarray::Array<f32, D>,
    m: &mut ndarray::Array<f32, D>,
    v: &mut ndarray::Array<f32, D>,
    b1: f32,
    b2: f32,
    eps: f32,
    step_size: f32,
) {
    ndarray::Zip::from(param).and(grad).and(m).and(v).for_each(|p, &g, m, v| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= step_size * *m / (v.sqrt() + eps);
    });
}
