use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io_core::seeded_rng;
use crate::math::{vec6_is_finite, Scalar, Vec6};

use super::{FlowArch, FlowError, FlowGrads, FlowModel, Normalizer};

/// Likelihood-maximization training configuration.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FlowTrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub n_iterations: usize,
    pub seed: u64,
    /// Rectified-Adam variance warmup instead of plain Adam.
    pub rectified: bool,
    pub arch: FlowArch,
}

impl Default for FlowTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-5,
            batch_size: 256,
            n_iterations: 2000,
            seed: 0,
            rectified: false,
            arch: FlowArch::default(),
        }
    }
}

/// Training curve and held-out likelihoods.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean batch NLL per iteration.
    pub loss_history: Vec<f64>,
    pub holdout_ll_init: f64,
    pub holdout_ll_final: f64,
    pub n_train: usize,
    pub n_holdout: usize,
}

/// Adam first/second moment state over the flat parameter vector.
#[derive(Clone, Debug)]
pub struct AdamState<S> {
    m: Vec<S>,
    v: Vec<S>,
    t: usize,
    beta1: S,
    beta2: S,
    eps: S,
    rectified: bool,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(n_params: usize, rectified: bool) -> Self {
        Self {
            m: vec![S::zero(); n_params],
            v: vec![S::zero(); n_params],
            t: 0,
            beta1: S::c(0.9),
            beta2: S::c(0.999),
            eps: S::c(1e-8),
            rectified,
        }
    }

    /// One optimizer step; `params` and `grads` are in canonical flat order.
    pub fn step(&mut self, params: &mut [&mut S], grads: &[S], lr: S) {
        self.t += 1;
        let t = S::c(self.t as f64);
        let b1 = self.beta1;
        let b2 = self.beta2;
        let bias1 = S::one() - b1.powf(t);
        let bias2 = S::one() - b2.powf(t);

        // Rectification term of the variance-adaptive step (RAdam).
        let rect = if self.rectified {
            let rho_inf = S::c(2.0) / (S::one() - b2) - S::one();
            let rho_t = rho_inf - S::c(2.0) * t * b2.powf(t) / bias2;
            if rho_t > S::c(4.0) {
                let r = ((rho_t - S::c(4.0)) * (rho_t - S::c(2.0)) * rho_inf
                    / ((rho_inf - S::c(4.0)) * (rho_inf - S::c(2.0)) * rho_t))
                    .sqrt();
                Some(r)
            } else {
                None
            }
        } else {
            Some(S::one())
        };

        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = b1 * *m + (S::one() - b1) * *g;
            *v = b2 * *v + (S::one() - b2) * *g * *g;
            let m_hat = *m / bias1;
            match rect {
                Some(r) => {
                    let v_hat = (*v / bias2).sqrt() + self.eps;
                    **p -= lr * r * m_hat / v_hat;
                }
                // Warmup phase of the rectified variant: momentum-only step.
                None => {
                    **p -= lr * m_hat;
                }
            }
        }
    }
}

/// Mean NLL over a batch plus summed parameter gradients, computed in
/// parallel over fixed-order chunks so the reduction is deterministic.
pub fn nll_and_grads<S: Scalar>(
    model: &FlowModel<S>,
    batch: &[Vec6<S>],
) -> Result<(S, FlowGrads<S>), FlowError> {
    if batch.is_empty() {
        return Err(FlowError::Contract("empty batch".into()));
    }
    const CHUNK: usize = 32;
    let partials: Vec<Result<(S, FlowGrads<S>), FlowError>> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grads = FlowGrads::zeros_like(model);
            let mut loss = S::zero();
            for x in chunk {
                loss += model.nll_backward(x, &mut grads)?;
            }
            Ok((loss, grads))
        })
        .collect();

    let mut total = FlowGrads::zeros_like(model);
    let mut loss = S::zero();
    for p in partials {
        let (l, g) = p?;
        loss += l;
        total.accumulate(&g);
    }
    let inv_n = S::one() / S::c(batch.len() as f64);
    total.scale(inv_n);
    Ok((loss * inv_n, total))
}

/// Mean log-likelihood of a dataset under the model.
pub fn mean_log_prob<S: Scalar>(model: &FlowModel<S>, data: &[Vec6<S>]) -> Result<S, FlowError> {
    if data.is_empty() {
        return Err(FlowError::Contract("empty dataset".into()));
    }
    let sums: Vec<Result<S, FlowError>> = data
        .par_chunks(64)
        .map(|chunk| {
            let mut s = S::zero();
            for x in chunk {
                s += model.log_prob(x)?;
            }
            Ok(s)
        })
        .collect();
    let mut total = S::zero();
    for s in sums {
        total += s?;
    }
    Ok(total / S::c(data.len() as f64))
}

/// Trains a flow on a 6D dataset by minimizing the negative log-likelihood.
///
/// A 10% split is held out for the before/after likelihood comparison; the
/// input whitening is fitted on the training split and counted in the model
/// log-determinant. Deterministic for a given config seed.
pub fn train_flow<S: Scalar>(
    dataset: &[Vec6<S>],
    config: &FlowTrainConfig,
) -> Result<(FlowModel<S>, TrainReport), FlowError> {
    if dataset.iter().any(|x| !vec6_is_finite(x)) {
        return Err(FlowError::Contract("dataset contains non-finite values".into()));
    }
    if dataset.len() < config.batch_size {
        return Err(FlowError::Config(format!(
            "dataset size {} is smaller than batch size {}",
            dataset.len(),
            config.batch_size
        )));
    }
    if dataset.len() < 2 {
        return Err(FlowError::Config("dataset needs at least 2 points".into()));
    }

    let mut rng = seeded_rng(config.seed, "flow-train");
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    indices.shuffle(&mut rng);
    let n_holdout = (dataset.len() / 10).max(1);
    let (holdout_idx, train_idx) = indices.split_at(n_holdout);
    let holdout: Vec<Vec6<S>> = holdout_idx.iter().map(|i| dataset[*i]).collect();
    let train: Vec<Vec6<S>> = train_idx.iter().map(|i| dataset[*i]).collect();
    if train.len() < config.batch_size {
        return Err(FlowError::Config(format!(
            "training split {} is smaller than batch size {} after holdout",
            train.len(),
            config.batch_size
        )));
    }

    let normalizer = Normalizer::fit(&train)?;
    let mut init_rng = seeded_rng(config.seed, "flow-init");
    let mut model = FlowModel::init(&config.arch, normalizer, &mut init_rng)?;

    let holdout_ll_init = mean_log_prob(&model, &holdout)?.to_f64_lossy();

    let mut adam = AdamState::<S>::new(model.param_count(), config.rectified);
    let lr = S::c(config.learning_rate);
    let mut loss_history = Vec::with_capacity(config.n_iterations);
    let mut batch = vec![[S::zero(); 6]; config.batch_size];
    for _ in 0..config.n_iterations {
        for slot in &mut batch {
            *slot = train[rng.gen_range(0..train.len())];
        }
        let (loss, grads) = nll_and_grads(&model, &batch)?;
        let flat = grads.flat();
        let mut params = model.params_mut();
        adam.step(&mut params, &flat, lr);
        loss_history.push(loss.to_f64_lossy());
    }

    let holdout_ll_final = mean_log_prob(&model, &holdout)?.to_f64_lossy();
    Ok((
        model,
        TrainReport {
            loss_history,
            holdout_ll_init,
            holdout_ll_final,
            n_train: train.len(),
            n_holdout: holdout.len(),
        },
    ))
}
