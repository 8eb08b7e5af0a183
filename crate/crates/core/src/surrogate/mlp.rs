//! Fully connected network with tanh hidden layers and a linear output.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    /// `weights[l]` has shape `(sizes[l + 1], sizes[l])`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Parameter-shaped buffers: gradients and optimizer moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Gradients {
        Gradients {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|&v| v == 0.0)) && self.biases.iter().all(|b| b.iter().all(|&v| v == 0.0))
    }
}

/// Activations kept from a forward pass for the backward pass.
pub struct ForwardCache {
    /// `acts[0]` is the input, `acts[L]` the output.
    acts: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("at least the input")
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new_random<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Mlp> {
        let mut net = Mlp::zeros(sizes)?;
        for w in &mut net.weights {
            let (out, inp) = w.dim();
            let lim = (6.0 / (inp + out) as f64).sqrt();
            w.mapv_inplace(|_| rng.random_range(-lim..lim));
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize]) -> Result<Mlp> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("layer sizes {sizes:?} need at least two non-zero entries")));
        }
        let weights = sizes.windows(2).map(|p| Array2::zeros((p[1], p[0]))).collect();
        let biases = sizes[1..].iter().map(|&n| Array1::zeros(n)).collect();
        Ok(Mlp { sizes: sizes.to_vec(), weights, biases })
    }

    /// Builds from explicit parameters, checking that the shapes chain.
    pub fn from_parts(weights: Vec<Array2<f64>>, biases: Vec<Array1<f64>>) -> Result<Mlp> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Config("need one bias vector per weight matrix".into()));
        }
        let mut sizes = vec![weights[0].ncols()];
        for (w, b) in weights.iter().zip(&biases) {
            if w.ncols() != *sizes.last().expect("non-empty") || w.nrows() != b.len() {
                return Err(Error::Config("layer shapes do not chain".into()));
            }
            sizes.push(w.nrows());
        }
        let net = Mlp { sizes, weights, biases };
        if !net.is_finite() {
            return Err(Error::Numerical("network parameters are not finite".into()));
        }
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    pub fn n_parameters(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite())) && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_size() {
            return Err(Error::Config(format!("input has {} values, network expects {}", input.len(), self.input_size())));
        }
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        Ok(self.forward_batch(x).into_raw_vec_and_offset().0)
    }

    /// Rows of `x` are samples.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut a = x.to_owned();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = a.dot(&w.t());
            z += b;
            if l < last {
                z.mapv_inplace(f64::tanh);
            }
            a = z;
        }
        a
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> ForwardCache {
        let mut acts = Vec::with_capacity(self.weights.len() + 1);
        acts.push(x.to_owned());
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[l].dot(&w.t());
            z += b;
            if l < last {
                z.mapv_inplace(f64::tanh);
            }
            acts.push(z);
        }
        ForwardCache { acts }
    }

    /// Gradients of a loss given its derivative `d_out` with respect to the output rows.
    pub fn backward_from(&self, cache: &ForwardCache, d_out: Array2<f64>) -> Gradients {
        let n = self.weights.len();
        let mut g = Gradients::zeros_like(self);
        let mut delta = d_out;
        for l in (0..n).rev() {
            let a_prev = &cache.acts[l];
            g.weights[l] = delta.t().dot(a_prev);
            g.biases[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut next = delta.dot(&self.weights[l]);
                Zip::from(&mut next).and(a_prev).for_each(|d, &a| *d *= 1.0 - a * a);
                delta = next;
            }
        }
        g
    }

    /// Mean squared error over all outputs of the batch and its gradients.
    pub fn loss_and_grad(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> (f64, Gradients) {
        let cache = self.forward_cached(x);
        let diff = cache.output() - &y;
        let count = diff.len() as f64;
        let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;
        let d_out = diff * (2.0 / count);
        (loss, self.backward_from(&cache, d_out))
    }

    /// Single-sample loss and gradients.
    pub fn backward(&self, input: &[f64], target: &[f64]) -> Result<(f64, Gradients)> {
        if input.len() != self.input_size() || target.len() != self.output_size() {
            return Err(Error::Config("input or target length does not match the network".into()));
        }
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        let y = ArrayView2::from_shape((1, target.len()), target).expect("row vector");
        Ok(self.loss_and_grad(x, y))
    }
}

/// Adam optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Gradients,
    pub v: Gradients,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(net: &Mlp, lr: f64) -> AdamState {
        AdamState {
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam update of `net` in place.
pub fn adam_step(net: &mut Mlp, grads: &Gradients, state: &mut AdamState) {
    state.t += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let step = state.lr;
    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let mh = *m / c1;
        let vh = *v / c2;
        *p -= step * mh / (vh.sqrt() + eps);
    };
    for l in 0..net.weights.len() {
        Zip::from(&mut net.weights[l])
            .and(&grads.weights[l])
            .and(&mut state.m.weights[l])
            .and(&mut state.v.weights[l])
            .for_each(|p, &g, m, v| update(p, g, m, v));
        Zip::from(&mut net.biases[l])
            .and(&grads.biases[l])
            .and(&mut state.m.biases[l])
            .and(&mut state.v.biases[l])
            .for_each(|p, &g, m, v| update(p, g, m, v));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use ndarray::array;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[3, 4, 2]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_affine_layer() {
        let net = Mlp::from_parts(vec![array![[2.0]]], vec![array![1.0]]).unwrap();
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![7.0]);
        assert!(net.forward(&[3.0, 1.0]).is_err());
    }

    #[test]
    fn output_shape() {
        let net = Mlp::new_random(&[4, 300, 300, 2], &mut stream(1, &[])).unwrap();
        assert_eq!(net.forward(&[0.1, 0.2, 0.3, 0.4]).unwrap().len(), 2);
        assert_eq!(net.n_parameters(), 4 * 300 + 300 + 300 * 300 + 300 + 300 * 2 + 2);
    }

    #[test]
    fn mismatched_parts_rejected() {
        assert!(Mlp::from_parts(vec![array![[1.0, 2.0]], array![[1.0, 2.0]]], vec![array![0.0], array![0.0]]).is_err());
    }

    #[test]
    fn loss_is_mean_squared_gap() {
        let net = Mlp::new_random(&[2, 3, 2], &mut stream(2, &[])).unwrap();
        let (x, y) = ([0.3, -0.7], [0.5, 1.5]);
        let out = net.forward(&x).unwrap();
        let expected = ((out[0] - y[0]).powi(2) + (out[1] - y[1]).powi(2)) / 2.0;
        let (loss, _) = net.backward(&x, &y).unwrap();
        assert!((loss - expected).abs() < 1e-15);
    }

    #[test]
    fn perfect_prediction_has_zero_gradient() {
        let net = Mlp::new_random(&[2, 3, 2], &mut stream(3, &[])).unwrap();
        let x = [0.1, 0.2];
        let y = net.forward(&x).unwrap();
        let (loss, g) = net.backward(&x, &y).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.is_zero());
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut net = Mlp::from_parts(vec![array![[0.5, -0.5]]], vec![array![0.0]]).unwrap();
        let mut st = AdamState::new(&net, 1e-3);
        let g = Gradients { weights: vec![array![[2.0, -0.25]]], biases: vec![array![0.0]] };
        adam_step(&mut net, &g, &mut st);
        assert_eq!(st.t, 1);
        assert!((net.weights[0][[0, 0]] - (0.5 - 1e-3)).abs() < 1e-9);
        assert!((net.weights[0][[0, 1]] - (-0.5 + 1e-3)).abs() < 1e-9);
        // zero gradient leaves the bias alone
        assert_eq!(net.biases[0][0], 0.0);
        let before = net.weights[0][[0, 0]];
        adam_step(&mut net, &g, &mut st);
        assert!(net.weights[0][[0, 0]] < before);
        assert_eq!(st.t, 2);
    }
}
