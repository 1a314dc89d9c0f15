use rand::Rng;

use crate::math::Scalar;

use super::FlowError;

/// Fully-connected network with tanh hidden activations and a linear output
/// layer. Small enough that hand-written backprop beats pulling in a
/// framework, and the training loop needs exact parameter gradients anyway.
#[derive(Clone, Debug)]
pub struct Mlp<S> {
    widths: Vec<usize>,
    /// Per layer, row-major `[out][in]`.
    weights: Vec<Vec<S>>,
    biases: Vec<Vec<S>>,
}

/// Post-activation values per layer, including the input; enough to run the
/// backward pass (tanh' is recovered from the activation itself).
#[derive(Clone, Debug)]
pub struct MlpTrace<S> {
    pub activations: Vec<Vec<S>>,
}

/// Parameter gradients with the same shapes as the network.
#[derive(Clone, Debug)]
pub struct MlpGrads<S> {
    pub weights: Vec<Vec<S>>,
    pub biases: Vec<Vec<S>>,
}

impl<S: Scalar> MlpGrads<S> {
    pub fn zeros_like(net: &Mlp<S>) -> Self {
        Self {
            weights: net.weights.iter().map(|w| vec![S::zero(); w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![S::zero(); b.len()]).collect(),
        }
    }

    pub fn accumulate(&mut self, other: &Self) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, factor: S) {
        for w in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            for x in w {
                *x *= factor;
            }
        }
    }
}

impl<S: Scalar> Mlp<S> {
    /// Xavier-uniform initialization; the output layer is shrunk so a fresh
    /// flow starts close to (but not exactly at) the identity coupling.
    pub fn init<R: Rng>(widths: &[usize], rng: &mut R) -> Self {
        assert!(widths.len() >= 2, "Mlp needs input and output widths");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let last = widths.len() - 2;
        for (k, pair) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let mut limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            if k == last {
                limit *= 0.1;
            }
            let w: Vec<S> = (0..fan_in * fan_out)
                .map(|_| S::c(rng.gen_range(-limit..limit)))
                .collect();
            weights.push(w);
            biases.push(vec![S::zero(); fan_out]);
        }
        Self {
            widths: widths.to_vec(),
            weights,
            biases,
        }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_len(&self) -> usize {
        self.widths[0]
    }

    pub fn output_len(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Mutable references to every parameter in canonical order
    /// (per layer: weights then biases).
    pub fn params_mut(&mut self) -> Vec<&mut S> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.extend(w.iter_mut());
            out.extend(b.iter_mut());
        }
        out
    }

    pub fn params(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(self.biases.iter()) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn forward(&self, input: &[S]) -> Result<Vec<S>, FlowError> {
        self.check_input(input)?;
        let mut current = input.to_vec();
        let last = self.layer_count() - 1;
        for k in 0..self.weights.len() {
            current = self.layer_forward(k, &current, k < last);
        }
        Ok(current)
    }

    /// Forward pass keeping per-layer activations for the backward pass.
    pub fn forward_trace(&self, input: &[S]) -> Result<(Vec<S>, MlpTrace<S>), FlowError> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.layer_count() + 1);
        activations.push(input.to_vec());
        let last = self.layer_count() - 1;
        for k in 0..self.weights.len() {
            let next = self.layer_forward(k, activations.last().unwrap(), k < last);
            activations.push(next);
        }
        let out = activations.last().unwrap().clone();
        Ok((out, MlpTrace { activations }))
    }

    fn check_input(&self, input: &[S]) -> Result<(), FlowError> {
        if input.len() != self.input_len() {
            return Err(FlowError::Contract(format!(
                "input length {} does not match net input width {}",
                input.len(),
                self.input_len()
            )));
        }
        Ok(())
    }

    fn layer_forward(&self, k: usize, input: &[S], activate: bool) -> Vec<S> {
        let n_in = self.widths[k];
        let w = &self.weights[k];
        let mut out = self.biases[k].clone();
        for (o, out_v) in out.iter_mut().enumerate() {
            let row = &w[o * n_in..(o + 1) * n_in];
            let mut acc = *out_v;
            for (wi, xi) in row.iter().zip(input) {
                acc += *wi * *xi;
            }
            *out_v = if activate { acc.tanh() } else { acc };
        }
        out
    }

    /// Accumulates parameter gradients for `d(loss)/d(output) = grad_out` and
    /// returns the gradient with respect to the input.
    pub fn backward(
        &self,
        trace: &MlpTrace<S>,
        grad_out: &[S],
        grads: &mut MlpGrads<S>,
    ) -> Result<Vec<S>, FlowError> {
        if grad_out.len() != self.output_len() {
            return Err(FlowError::Contract(format!(
                "gradient length {} does not match net output width {}",
                grad_out.len(),
                self.output_len()
            )));
        }
        let mut g = grad_out.to_vec();
        for k in (0..self.weights.len()).rev() {
            let n_in = self.widths[k];
            let input_act = &trace.activations[k];
            let w = &self.weights[k];
            let gw = &mut grads.weights[k];
            for (o, go) in g.iter().enumerate() {
                let row = &mut gw[o * n_in..(o + 1) * n_in];
                for (gwi, xi) in row.iter_mut().zip(input_act) {
                    *gwi += *go * *xi;
                }
                grads.biases[k][o] += *go;
            }
            // Gradient w.r.t. this layer's input.
            let mut g_prev = vec![S::zero(); n_in];
            for (o, go) in g.iter().enumerate() {
                let row = &w[o * n_in..(o + 1) * n_in];
                for (gp, wi) in g_prev.iter_mut().zip(row) {
                    *gp += *go * *wi;
                }
            }
            if k > 0 {
                // input_act holds tanh outputs of the previous layer.
                for (gp, a) in g_prev.iter_mut().zip(input_act) {
                    *gp *= S::one() - *a * *a;
                }
            }
            g = g_prev;
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io_core::seeded_rng;

    fn loss_and_grads(net: &Mlp<f64>, input: &[f64], target: &[f64]) -> (f64, MlpGrads<f64>, Vec<f64>) {
        let (out, trace) = net.forward_trace(input).unwrap();
        let loss: f64 = out
            .iter()
            .zip(target)
            .map(|(o, t)| 0.5 * (o - t).powi(2))
            .sum();
        let grad_out: Vec<f64> = out.iter().zip(target).map(|(o, t)| o - t).collect();
        let mut grads = MlpGrads::zeros_like(net);
        let grad_in = net.backward(&trace, &grad_out, &mut grads).unwrap();
        (loss, grads, grad_in)
    }

    fn loss_only(net: &Mlp<f64>, input: &[f64], target: &[f64]) -> f64 {
        let out = net.forward(input).unwrap();
        out.iter()
            .zip(target)
            .map(|(o, t)| 0.5 * (o - t).powi(2))
            .sum()
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let mut rng = seeded_rng(11, "mlp-gradcheck");
        let mut net = Mlp::<f64>::init(&[3, 8, 8, 2], &mut rng);
        // Perturb away from the shrunk output init so gradients are generic.
        for p in net.params_mut() {
            *p += 0.05;
        }
        let input = [0.3, -0.7, 0.9];
        let target = [0.2, -0.1];
        let (_, grads, _) = loss_and_grads(&net, &input, &target);

        let flat_grads: Vec<f64> = grads
            .weights
            .iter()
            .zip(&grads.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied().collect::<Vec<_>>())
            .collect();

        let h = 1e-5;
        let n = net.param_count();
        for idx in 0..n {
            let base = {
                let mut params = net.params_mut();
                let old = *params[idx];
                *params[idx] = old + h;
                old
            };
            let lp = loss_only(&net, &input, &target);
            {
                let mut params = net.params_mut();
                *params[idx] = base - h;
            }
            let lm = loss_only(&net, &input, &target);
            {
                let mut params = net.params_mut();
                *params[idx] = base;
            }
            let fd = (lp - lm) / (2.0 * h);
            let g = flat_grads[idx];
            let denom = fd.abs().max(g.abs()).max(1e-8);
            assert!(
                (fd - g).abs() / denom < 1e-4,
                "param {idx}: analytic {g}, fd {fd}"
            );
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = seeded_rng(13, "mlp-input-grad");
        let net = Mlp::<f64>::init(&[4, 6, 3], &mut rng);
        let input = [0.1, 0.4, -0.2, 0.8];
        let target = [0.0, 0.5, -0.5];
        let (_, _, grad_in) = loss_and_grads(&net, &input, &target);
        let h = 1e-6;
        for i in 0..input.len() {
            let mut ip = input;
            let mut im = input;
            ip[i] += h;
            im[i] -= h;
            let fd = (loss_only(&net, &ip, &target) - loss_only(&net, &im, &target)) / (2.0 * h);
            assert!((fd - grad_in[i]).abs() < 1e-6, "input {i}: {} vs {fd}", grad_in[i]);
        }
    }

    #[test]
    fn zero_input_zero_bias_gives_zero_output() {
        let mut rng = seeded_rng(17, "mlp-odd");
        let net = Mlp::<f64>::init(&[3, 16, 16, 3], &mut rng);
        let out = net.forward(&[0.0, 0.0, 0.0]).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let mut rng = seeded_rng(19, "mlp-const");
        let net = Mlp::<f64>::init(&[2, 4, 2], &mut rng);
        let (_, trace) = net.forward_trace(&[0.3, -0.2]).unwrap();
        let mut grads = MlpGrads::zeros_like(&net);
        net.backward(&trace, &[0.0, 0.0], &mut grads).unwrap();
        assert!(grads.weights.iter().flatten().all(|g| *g == 0.0));
        assert!(grads.biases.iter().flatten().all(|g| *g == 0.0));
    }

    #[test]
    fn shape_mismatch_is_contract_violation() {
        let mut rng = seeded_rng(23, "mlp-shape");
        let net = Mlp::<f64>::init(&[3, 4, 2], &mut rng);
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(FlowError::Contract(_))
        ));
    }
}
