//! Real-NVP normalizing flow over 6D oriented points: exact log-likelihood,
//! inversion, sampling, and likelihood-maximization training with
//! hand-implemented gradients.

mod mlp;
mod train;

use rand::Rng;
use thiserror::Error;

use crate::io_core::rng::standard_normal;
use crate::math::{vec6_is_finite, Scalar, Vec6};

pub use mlp::{Mlp, MlpGrads, MlpTrace};
pub use train::{
    mean_log_prob, nll_and_grads, train_flow, AdamState, FlowTrainConfig, TrainReport,
};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("flow configuration error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
}

/// Natural log of (2*pi)^3, the 6D standard-normal normalization constant.
pub const LOG_NORM_6D: f64 = 5.513_631_199_228_036;

/// Per-dimension affine whitening applied before the coupling stack;
/// its log-determinant is part of the model likelihood.
#[derive(Clone, Debug)]
pub struct Normalizer<S> {
    pub shift: Vec6<S>,
    pub scale: Vec6<S>,
}

impl<S: Scalar> Normalizer<S> {
    pub fn identity() -> Self {
        Self {
            shift: [S::zero(); 6],
            scale: [S::one(); 6],
        }
    }

    /// Whitening transform fitted to a dataset (mean and standard deviation
    /// per dimension, with a small floor on the deviation).
    pub fn fit(data: &[Vec6<S>]) -> Result<Self, FlowError> {
        if data.is_empty() {
            return Err(FlowError::Config("cannot fit normalizer to empty data".into()));
        }
        let n = S::c(data.len() as f64);
        let mut mean = [S::zero(); 6];
        for x in data {
            for d in 0..6 {
                mean[d] += x[d];
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = [S::zero(); 6];
        for x in data {
            for d in 0..6 {
                let c = x[d] - mean[d];
                var[d] += c * c;
            }
        }
        let floor = S::c(1e-6);
        let mut scale = [S::zero(); 6];
        for d in 0..6 {
            scale[d] = (var[d] / n).sqrt().max(floor);
        }
        Ok(Self { shift: mean, scale })
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        if self.scale.iter().any(|s| !(*s > S::zero()) || !s.is_finite()) {
            return Err(FlowError::Config("normalizer scales must be positive".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn forward(&self, x: &Vec6<S>) -> Vec6<S> {
        let mut u = [S::zero(); 6];
        for d in 0..6 {
            u[d] = (x[d] - self.shift[d]) / self.scale[d];
        }
        u
    }

    #[inline]
    pub fn inverse(&self, u: &Vec6<S>) -> Vec6<S> {
        let mut x = [S::zero(); 6];
        for d in 0..6 {
            x[d] = u[d] * self.scale[d] + self.shift[d];
        }
        x
    }

    /// log|det d(forward)/dx| = -sum(ln scale).
    pub fn logdet(&self) -> S {
        -self
            .scale
            .iter()
            .fold(S::zero(), |acc, s| acc + s.ln())
    }
}

/// Affine coupling layer: dimensions flagged in `mask` pass through and
/// condition the scale/translation applied to the rest.
#[derive(Clone, Debug)]
pub struct CouplingLayer<S> {
    mask: [bool; 6],
    scale_net: Mlp<S>,
    translate_net: Mlp<S>,
    scale_clamp: S,
}

/// Cached forward state of one coupling layer for the backward pass.
pub struct CouplingTrace<S> {
    input: Vec6<S>,
    /// tanh(raw_s / clamp) per transformed dim.
    tanh_ratio: Vec<S>,
    exp_s: Vec<S>,
    scale_trace: MlpTrace<S>,
    translate_trace: MlpTrace<S>,
}

impl<S: Scalar> CouplingLayer<S> {
    pub fn new(
        mask: [bool; 6],
        scale_net: Mlp<S>,
        translate_net: Mlp<S>,
        scale_clamp: S,
    ) -> Result<Self, FlowError> {
        let n_pass = mask.iter().filter(|m| **m).count();
        if n_pass == 0 || n_pass == 6 {
            return Err(FlowError::Config(
                "coupling mask needs at least one set and one clear bit".into(),
            ));
        }
        if !(scale_clamp > S::zero()) {
            return Err(FlowError::Config("scale_clamp must be positive".into()));
        }
        let n_trans = 6 - n_pass;
        for (net, name) in [(&scale_net, "scale"), (&translate_net, "translate")] {
            if net.input_len() != n_pass || net.output_len() != n_trans {
                return Err(FlowError::Config(format!(
                    "{name} net shape {}->{} does not match mask {}->{}",
                    net.input_len(),
                    net.output_len(),
                    n_pass,
                    n_trans
                )));
            }
        }
        Ok(Self {
            mask,
            scale_net,
            translate_net,
            scale_clamp,
        })
    }

    pub fn mask(&self) -> [bool; 6] {
        self.mask
    }

    pub fn scale_net(&self) -> &Mlp<S> {
        &self.scale_net
    }

    pub fn translate_net(&self) -> &Mlp<S> {
        &self.translate_net
    }

    pub fn scale_clamp(&self) -> S {
        self.scale_clamp
    }

    fn passthrough(&self, x: &Vec6<S>) -> Vec<S> {
        (0..6).filter(|d| self.mask[*d]).map(|d| x[d]).collect()
    }

    fn transformed_dims(&self) -> impl Iterator<Item = usize> + '_ {
        (0..6).filter(|d| !self.mask[*d])
    }

    /// Raw net outputs mapped through the tanh clamp.
    fn nets(&self, cond: &[S]) -> Result<(Vec<S>, Vec<S>, Vec<S>), FlowError> {
        let raw_s = self.scale_net.forward(cond)?;
        let t = self.translate_net.forward(cond)?;
        let c = self.scale_clamp;
        let tanh_ratio: Vec<S> = raw_s.iter().map(|r| (*r / c).tanh()).collect();
        let s: Vec<S> = tanh_ratio.iter().map(|tr| *tr * c).collect();
        Ok((s, t, tanh_ratio))
    }

    pub fn forward(&self, x: &Vec6<S>) -> Result<(Vec6<S>, S), FlowError> {
        let cond = self.passthrough(x);
        let (s, t, _) = self.nets(&cond)?;
        let mut y = *x;
        let mut logdet = S::zero();
        for (j, d) in self.transformed_dims().enumerate() {
            y[d] = x[d] * s[j].exp() + t[j];
            logdet += s[j];
        }
        Ok((y, logdet))
    }

    pub fn inverse(&self, y: &Vec6<S>) -> Result<Vec6<S>, FlowError> {
        let cond = self.passthrough(y);
        let (s, t, _) = self.nets(&cond)?;
        let mut x = *y;
        for (j, d) in self.transformed_dims().enumerate() {
            x[d] = (y[d] - t[j]) * (-s[j]).exp();
        }
        Ok(x)
    }

    fn forward_trace(&self, x: &Vec6<S>) -> Result<(Vec6<S>, S, CouplingTrace<S>), FlowError> {
        let cond = self.passthrough(x);
        let (raw_s, scale_trace) = self.scale_net.forward_trace(&cond)?;
        let (t, translate_trace) = self.translate_net.forward_trace(&cond)?;
        let c = self.scale_clamp;
        let tanh_ratio: Vec<S> = raw_s.iter().map(|r| (*r / c).tanh()).collect();
        let mut y = *x;
        let mut logdet = S::zero();
        let mut exp_s = Vec::with_capacity(tanh_ratio.len());
        for (j, d) in self.transformed_dims().enumerate() {
            let s = tanh_ratio[j] * c;
            let es = s.exp();
            y[d] = x[d] * es + t[j];
            logdet += s;
            exp_s.push(es);
        }
        Ok((
            y,
            logdet,
            CouplingTrace {
                input: *x,
                tanh_ratio,
                exp_s,
                scale_trace,
                translate_trace,
            },
        ))
    }

    /// Backward through the coupling given d(loss)/d(output) and the weight of
    /// the loss on this layer's log-determinant (-1 per sample for NLL).
    fn backward(
        &self,
        trace: &CouplingTrace<S>,
        grad_y: &Vec6<S>,
        logdet_weight: S,
        grads: &mut CouplingGrads<S>,
    ) -> Result<Vec6<S>, FlowError> {
        let n_trans = trace.exp_s.len();
        let mut grad_raw_s = vec![S::zero(); n_trans];
        let mut grad_t = vec![S::zero(); n_trans];
        let mut grad_x = [S::zero(); 6];
        for (j, d) in self.transformed_dims().enumerate() {
            let gy = grad_y[d];
            let gs = gy * trace.input[d] * trace.exp_s[j] + logdet_weight;
            let sech2 = S::one() - trace.tanh_ratio[j] * trace.tanh_ratio[j];
            grad_raw_s[j] = gs * sech2;
            grad_t[j] = gy;
            grad_x[d] = gy * trace.exp_s[j];
        }
        let ga_s = self
            .scale_net
            .backward(&trace.scale_trace, &grad_raw_s, &mut grads.scale)?;
        let ga_t =
            self.translate_net
                .backward(&trace.translate_trace, &grad_t, &mut grads.translate)?;
        for (i, d) in (0..6).filter(|d| self.mask[*d]).enumerate() {
            grad_x[d] = grad_y[d] + ga_s[i] + ga_t[i];
        }
        Ok(grad_x)
    }
}

/// Gradients for one coupling layer.
#[derive(Clone, Debug)]
pub struct CouplingGrads<S> {
    pub scale: MlpGrads<S>,
    pub translate: MlpGrads<S>,
}

/// Gradients for the whole flow, in the canonical parameter order.
#[derive(Clone, Debug)]
pub struct FlowGrads<S> {
    pub layers: Vec<CouplingGrads<S>>,
}

impl<S: Scalar> FlowGrads<S> {
    pub fn zeros_like(model: &FlowModel<S>) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| CouplingGrads {
                    scale: MlpGrads::zeros_like(&l.scale_net),
                    translate: MlpGrads::zeros_like(&l.translate_net),
                })
                .collect(),
        }
    }

    pub fn accumulate(&mut self, other: &Self) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.scale.accumulate(&b.scale);
            a.translate.accumulate(&b.translate);
        }
    }

    pub fn scale(&mut self, factor: S) {
        for l in &mut self.layers {
            l.scale.scale(factor);
            l.translate.scale(factor);
        }
    }

    /// Flattened view in the same order as [`FlowModel::flat_params`].
    pub fn flat(&self) -> Vec<S> {
        let mut out = Vec::new();
        for l in &self.layers {
            for g in [&l.scale, &l.translate] {
                for (w, b) in g.weights.iter().zip(&g.biases) {
                    out.extend_from_slice(w);
                    out.extend_from_slice(b);
                }
            }
        }
        out
    }
}

/// Architecture of the coupling stack.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FlowArch {
    /// Number of coupling layers (at least 2 so every dim is transformed).
    pub n_layers: usize,
    /// Hidden width of the scale/translate nets.
    pub hidden: usize,
    /// Hidden layer count of each net.
    pub n_hidden_layers: usize,
    /// Tanh clamp applied to raw scale outputs before exponentiation.
    pub scale_clamp: f64,
}

impl Default for FlowArch {
    fn default() -> Self {
        Self {
            n_layers: 4,
            hidden: 128,
            n_hidden_layers: 2,
            scale_clamp: 5.0,
        }
    }
}

/// Default mask schedule: alternate position/direction splits, then
/// interleaved patterns, so every dimension is transformed.
pub fn mask_schedule(layer: usize) -> [bool; 6] {
    match layer % 4 {
        0 => [true, true, true, false, false, false],
        1 => [false, false, false, true, true, true],
        2 => [true, false, true, false, true, false],
        _ => [false, true, false, true, false, true],
    }
}

/// Stack of affine coupling layers mapping oriented points to and from a 6D
/// standard Gaussian.
#[derive(Clone, Debug)]
pub struct FlowModel<S> {
    normalizer: Normalizer<S>,
    layers: Vec<CouplingLayer<S>>,
}

impl<S: Scalar> FlowModel<S> {
    /// Randomly initialized model with the default mask schedule.
    pub fn init<R: Rng>(arch: &FlowArch, normalizer: Normalizer<S>, rng: &mut R) -> Result<Self, FlowError> {
        if arch.n_layers < 2 {
            return Err(FlowError::Config(
                "flow needs at least 2 coupling layers".into(),
            ));
        }
        if arch.hidden == 0 || arch.n_hidden_layers == 0 {
            return Err(FlowError::Config("net architecture must be non-trivial".into()));
        }
        let mut layers = Vec::with_capacity(arch.n_layers);
        for k in 0..arch.n_layers {
            let mask = mask_schedule(k);
            let n_pass = mask.iter().filter(|m| **m).count();
            let n_trans = 6 - n_pass;
            let mut widths = vec![n_pass];
            widths.extend(std::iter::repeat(arch.hidden).take(arch.n_hidden_layers));
            widths.push(n_trans);
            let scale_net = Mlp::init(&widths, rng);
            let translate_net = Mlp::init(&widths, rng);
            layers.push(CouplingLayer::new(
                mask,
                scale_net,
                translate_net,
                S::c(arch.scale_clamp),
            )?);
        }
        Self::from_parts(normalizer, layers)
    }

    pub fn from_parts(
        normalizer: Normalizer<S>,
        layers: Vec<CouplingLayer<S>>,
    ) -> Result<Self, FlowError> {
        normalizer.validate()?;
        if layers.len() < 2 {
            return Err(FlowError::Config(
                "flow needs at least 2 coupling layers".into(),
            ));
        }
        let mut transformed = [false; 6];
        for l in &layers {
            for d in 0..6 {
                transformed[d] |= !l.mask[d];
            }
        }
        if transformed.iter().any(|t| !t) {
            return Err(FlowError::Config(
                "mask schedule leaves some dimension untransformed".into(),
            ));
        }
        Ok(Self { normalizer, layers })
    }

    pub fn layers(&self) -> &[CouplingLayer<S>] {
        &self.layers
    }

    pub fn normalizer(&self) -> &Normalizer<S> {
        &self.normalizer
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.scale_net.param_count() + l.translate_net.param_count())
            .sum()
    }

    /// Every trainable parameter in canonical order.
    pub fn params_mut(&mut self) -> Vec<&mut S> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &mut self.layers {
            out.extend(l.scale_net.params_mut());
            out.extend(l.translate_net.params_mut());
        }
        out
    }

    pub fn flat_params(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.scale_net.params());
            out.extend(l.translate_net.params());
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[S]) -> Result<(), FlowError> {
        if flat.len() != self.param_count() {
            return Err(FlowError::Contract(format!(
                "parameter vector length {} does not match model {}",
                flat.len(),
                self.param_count()
            )));
        }
        for (p, v) in self.params_mut().into_iter().zip(flat) {
            *p = *v;
        }
        Ok(())
    }

    /// z = f(x) together with log|det df/dx| (couplings plus normalizer).
    pub fn forward(&self, x: &Vec6<S>) -> Result<(Vec6<S>, S), FlowError> {
        if !vec6_is_finite(x) {
            return Err(FlowError::Contract("non-finite input to flow_forward".into()));
        }
        let mut u = self.normalizer.forward(x);
        let mut logdet = self.normalizer.logdet();
        for layer in &self.layers {
            let (next, ld) = layer.forward(&u)?;
            u = next;
            logdet += ld;
        }
        Ok((u, logdet))
    }

    /// x = f^{-1}(z).
    pub fn inverse(&self, z: &Vec6<S>) -> Result<Vec6<S>, FlowError> {
        if !vec6_is_finite(z) {
            return Err(FlowError::Contract("non-finite input to flow_inverse".into()));
        }
        let mut u = *z;
        for layer in self.layers.iter().rev() {
            u = layer.inverse(&u)?;
        }
        Ok(self.normalizer.inverse(&u))
    }

    /// log p_x(x) under the flow: standard-normal log-density of f(x) plus
    /// the log-determinant.
    pub fn log_prob(&self, x: &Vec6<S>) -> Result<S, FlowError> {
        let (z, logdet) = self.forward(x)?;
        let sq = z.iter().fold(S::zero(), |acc, v| acc + *v * *v);
        Ok(-S::c(0.5) * sq - S::c(LOG_NORM_6D) + logdet)
    }

    /// Draws n samples by inverting standard-normal latents; deterministic
    /// for a given rng state.
    pub fn sample<R: Rng>(&self, rng: &mut R, n: usize) -> Result<Vec<Vec6<S>>, FlowError> {
        (0..n)
            .map(|_| {
                let mut z = [S::zero(); 6];
                for v in &mut z {
                    *v = S::c(standard_normal(rng));
                }
                self.inverse(&z)
            })
            .collect()
    }

    /// Forward pass with caches, and the per-sample NLL gradient entry point.
    pub(crate) fn forward_traced(
        &self,
        x: &Vec6<S>,
    ) -> Result<(Vec6<S>, S, Vec<CouplingTrace<S>>), FlowError> {
        let mut u = self.normalizer.forward(x);
        let mut logdet = self.normalizer.logdet();
        let mut traces = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (next, ld, trace) = layer.forward_trace(&u)?;
            u = next;
            logdet += ld;
            traces.push(trace);
        }
        Ok((u, logdet, traces))
    }

    /// Accumulates d(nll)/d(params) for one sample into `grads` and returns
    /// the sample's NLL. The NLL is 0.5|z|^2 + log((2pi)^3) - logdet.
    pub(crate) fn nll_backward(
        &self,
        x: &Vec6<S>,
        grads: &mut FlowGrads<S>,
    ) -> Result<S, FlowError> {
        let (z, logdet, traces) = self.forward_traced(x)?;
        let sq = z.iter().fold(S::zero(), |acc, v| acc + *v * *v);
        let nll = S::c(0.5) * sq + S::c(LOG_NORM_6D) - logdet;
        let mut g: Vec6<S> = z;
        for (layer, (trace, lg)) in self
            .layers
            .iter()
            .zip(traces.iter().zip(grads.layers.iter_mut()))
            .rev()
        {
            g = layer.backward(trace, &g, -S::one(), lg)?;
        }
        Ok(nll)
    }
}
