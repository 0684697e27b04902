//! Fully connected Q-network with hand-rolled backpropagation and ADAM.
//!
//! Everything runs in double precision: it removes numeric drift from the
//! reproduction and lets the finite-difference gradient checks use tight
//! tolerances. Hidden layers are rectified; the output layer is linear.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("non-finite loss (training diverged)")]
    NonFiniteLoss,
}

/// One affine layer, weights stored row-major (out x in).
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Dense {
    fn new(in_dim: usize, out_dim: usize, rng: &mut ChaCha12Rng) -> Dense {
        // Uniform fan-in init: U(-1/sqrt(in), 1/sqrt(in)).
        let bound = 1.0 / (in_dim as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        let biases = (0..out_dim).map(|_| rng.gen_range(-bound..bound)).collect();
        Dense { weights, biases, in_dim, out_dim }
    }

    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.biases[o];
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            out.push(acc);
        }
    }
}

/// Multilayer perceptron; `dims` is input..output, e.g. [10, 256, 256, 3].
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    pub fn new(dims: &[usize], rng: &mut ChaCha12Rng) -> Mlp {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let layers = dims
            .windows(2)
            .map(|pair| Dense::new(pair[0], pair[1], rng))
            .collect();
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map(|l| l.in_dim).unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.out_dim));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        debug_assert_eq!(input.len(), self.input_dim());
        let mut current = input.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.affine(&current, &mut next);
            if i != last {
                for v in &mut next {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut current, &mut next);
        }
        current
    }

    /// Forward pass retaining per-layer pre-activations and activations
    /// (activations[0] is the input), for backpropagation.
    fn forward_cached(&self, input: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut activations = vec![input.to_vec()];
        let mut preacts = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.affine(activations.last().unwrap(), &mut z);
            preacts.push(z.clone());
            if i != last {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            }
            activations.push(z);
        }
        (activations, preacts)
    }
}

/// Gradient (or moment) buffers shaped like an [`Mlp`].
#[derive(Clone, Debug)]
pub struct ParamGrads {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl ParamGrads {
    pub fn zeros_like(net: &Mlp) -> ParamGrads {
        ParamGrads {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.biases.len()]))
                .collect(),
        }
    }
}

/// Mean-squared error on the taken-action outputs only; other outputs get
/// zero gradient. Returns the pre-update loss and parameter gradients.
pub fn q_loss_and_grads(
    net: &Mlp,
    inputs: &[Vec<f64>],
    actions: &[usize],
    targets: &[f64],
) -> (f64, ParamGrads) {
    assert_eq!(inputs.len(), actions.len());
    assert_eq!(inputs.len(), targets.len());
    let batch = inputs.len() as f64;
    let mut grads = ParamGrads::zeros_like(net);
    let mut loss = 0.0;
    let last = net.layers.len() - 1;

    for ((input, &action), &target) in inputs.iter().zip(actions).zip(targets) {
        let (activations, preacts) = net.forward_cached(input);
        let output = activations.last().unwrap();
        let err = output[action] - target;
        loss += err * err / batch;

        // dL/dq on the taken action only.
        let mut delta = vec![0.0; net.layers[last].out_dim];
        delta[action] = 2.0 * err / batch;

        for layer_idx in (0..net.layers.len()).rev() {
            let layer = &net.layers[layer_idx];
            let input_act = &activations[layer_idx];
            let (gw, gb) = &mut grads.layers[layer_idx];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                let row = &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, x) in row.iter_mut().zip(input_act) {
                    *g += d * x;
                }
            }
            if layer_idx == 0 {
                break;
            }
            // Propagate through the weights, then the previous relu.
            let prev_pre = &preacts[layer_idx - 1];
            let mut prev_delta = vec![0.0; layer.in_dim];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (pd, w) in prev_delta.iter_mut().zip(row) {
                    *pd += d * w;
                }
            }
            for (pd, z) in prev_delta.iter_mut().zip(prev_pre) {
                if *z <= 0.0 {
                    *pd = 0.0;
                }
            }
            delta = prev_delta;
        }
    }
    (loss, grads)
}

/// ADAM with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub m: ParamGrads,
    pub v: ParamGrads,
}

impl Adam {
    pub fn new(net: &Mlp, beta1: f64, beta2: f64, epsilon: f64) -> Adam {
        Adam {
            beta1,
            beta2,
            epsilon,
            step: 0,
            m: ParamGrads::zeros_like(net),
            v: ParamGrads::zeros_like(net),
        }
    }

    pub fn update(&mut self, net: &mut Mlp, grads: &ParamGrads, alpha: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (layer_idx, layer) in net.layers.iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[layer_idx];
            let (mw, mb) = &mut self.m.layers[layer_idx];
            let (vw, vb) = &mut self.v.layers[layer_idx];
            let apply = |param: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *param -= alpha * m_hat / (v_hat.sqrt() + self.epsilon);
            };
            for ((p, &g), (m, v)) in layer
                .weights
                .iter_mut()
                .zip(gw)
                .zip(mw.iter_mut().zip(vw.iter_mut()))
            {
                apply(p, g, m, v);
            }
            for ((p, &g), (m, v)) in
                layer.biases.iter_mut().zip(gb).zip(mb.iter_mut().zip(vb.iter_mut()))
            {
                apply(p, g, m, v);
            }
        }
    }
}

/// One optimization step on a minibatch. Returns the pre-update loss;
/// a non-finite loss aborts training.
pub fn sgd_step(
    net: &mut Mlp,
    adam: &mut Adam,
    inputs: &[Vec<f64>],
    actions: &[usize],
    targets: &[f64],
    alpha: f64,
) -> Result<f64, NnError> {
    let (loss, grads) = q_loss_and_grads(net, inputs, actions, targets);
    if !loss.is_finite() {
        return Err(NnError::NonFiniteLoss);
    }
    adam.update(net, &grads, alpha);
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    #[test]
    fn forward_is_deterministic() {
        let net = Mlp::new(&[10, 16, 16, 3], &mut rng(3));
        let net2 = Mlp::new(&[10, 16, 16, 3], &mut rng(3));
        let obs: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        assert_eq!(net.forward(&obs), net2.forward(&obs));
    }

    #[test]
    fn zeroed_output_layer_yields_biases() {
        let mut net = Mlp::new(&[4, 8, 3], &mut rng(1));
        let last = net.layers.len() - 1;
        for w in &mut net.layers[last].weights {
            *w = 0.0;
        }
        net.layers[last].biases = vec![0.5, -1.0, 2.0];
        let q = net.forward(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(q, vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn single_hidden_unit_hand_computed_forward() {
        // input [0.5] -> relu(2*0.5 + 0.1) = 1.1 -> out = W*1.1 + b.
        let mut net = Mlp::new(&[1, 1, 3], &mut rng(0));
        net.layers[0].weights = vec![2.0];
        net.layers[0].biases = vec![0.1];
        net.layers[1].weights = vec![3.0, -1.0, 0.0];
        net.layers[1].biases = vec![0.5, 0.0, -0.2];
        let q = net.forward(&[0.5]);
        assert!((q[0] - 3.8).abs() < 1e-12);
        assert!((q[1] - (-1.1)).abs() < 1e-12);
        assert!((q[2] - (-0.2)).abs() < 1e-12);
    }

    /// Central finite differences over every parameter of a small net.
    fn finite_diff_check(seed: u64) -> f64 {
        let mut r = rng(seed);
        let mut net = Mlp::new(&[4, 6, 5, 3], &mut r);
        let batch = 5;
        let inputs: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..4).map(|_| r.gen_range(-1.0..1.0)).collect())
            .collect();
        let actions: Vec<usize> = (0..batch).map(|_| r.gen_range(0..3)).collect();
        let targets: Vec<f64> = (0..batch).map(|_| r.gen_range(-2.0..2.0)).collect();

        let (_, grads) = q_loss_and_grads(&net, &inputs, &actions, &targets);
        let mut worst: f64 = 0.0;
        for layer_idx in 0..net.layers.len() {
            let n_w = net.layers[layer_idx].weights.len();
            let n_b = net.layers[layer_idx].biases.len();
            for param_idx in 0..n_w + n_b {
                let read = |net: &Mlp| -> f64 {
                    if param_idx < n_w {
                        net.layers[layer_idx].weights[param_idx]
                    } else {
                        net.layers[layer_idx].biases[param_idx - n_w]
                    }
                };
                let write = |net: &mut Mlp, v: f64| {
                    if param_idx < n_w {
                        net.layers[layer_idx].weights[param_idx] = v;
                    } else {
                        net.layers[layer_idx].biases[param_idx - n_w] = v;
                    }
                };
                let original = read(&net);
                let h = 1e-5 * original.abs().max(1.0);
                write(&mut net, original + h);
                let (loss_plus, _) = q_loss_and_grads(&net, &inputs, &actions, &targets);
                write(&mut net, original - h);
                let (loss_minus, _) = q_loss_and_grads(&net, &inputs, &actions, &targets);
                write(&mut net, original);
                let numeric = (loss_plus - loss_minus) / (2.0 * h);
                let analytic = if param_idx < n_w {
                    grads.layers[layer_idx].0[param_idx]
                } else {
                    grads.layers[layer_idx].1[param_idx - n_w]
                };
                let denom = (numeric.abs() + analytic.abs()).max(1e-6);
                worst = worst.max((numeric - analytic).abs() / denom);
            }
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            let worst = finite_diff_check(seed);
            assert!(worst < 1e-4, "seed {seed}: worst relative error {worst:e}");
        }
    }

    #[test]
    fn zero_error_batch_keeps_loss_zero() {
        let net0 = Mlp::new(&[4, 6, 3], &mut rng(11));
        let inputs: Vec<Vec<f64>> = vec![vec![0.1, -0.2, 0.4, 0.9]];
        let actions = vec![1];
        let targets = vec![net0.forward(&inputs[0])[1]];
        let (loss, grads) = q_loss_and_grads(&net0, &inputs, &actions, &targets);
        assert!(loss.abs() < 1e-24);
        for (gw, gb) in &grads.layers {
            assert!(gw.iter().all(|g| g.abs() < 1e-18));
            assert!(gb.iter().all(|g| g.abs() < 1e-18));
        }
    }

    #[test]
    fn sgd_descends_on_repeated_single_transition() {
        let mut r = rng(5);
        let mut net = Mlp::new(&[4, 8, 3], &mut r);
        let mut adam = Adam::new(&net, 0.9, 0.999, 1e-8);
        let inputs = vec![vec![0.3, 0.7, -0.1, 0.5]];
        let actions = vec![2];
        let targets = vec![1.5];
        let first = sgd_step(&mut net, &mut adam, &inputs, &actions, &targets, 1e-3).unwrap();
        let mut last = first;
        for _ in 0..50 {
            last = sgd_step(&mut net, &mut adam, &inputs, &actions, &targets, 1e-3).unwrap();
        }
        assert!(last < first, "loss did not decrease: {first} -> {last}");
    }

    #[test]
    fn non_finite_loss_aborts() {
        let mut net = Mlp::new(&[2, 3, 3], &mut rng(0));
        let mut adam = Adam::new(&net, 0.9, 0.999, 1e-8);
        let result = sgd_step(
            &mut net,
            &mut adam,
            &[vec![f64::INFINITY, 0.0]],
            &[0],
            &[0.0],
            1e-3,
        );
        assert!(matches!(result, Err(NnError::NonFiniteLoss)));
    }
}
