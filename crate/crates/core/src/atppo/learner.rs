use rand::seq::SliceRandom;
use rand::Rng;

use super::policy::Policy;
use super::{clipped_surrogate, clipped_surrogate_grad, AtppoHyper};
use crate::error::{Error, Result};
use crate::nn::dist::{
    bernoulli_entropy_grad, bernoulli_logprob_grad, gaussian_logprob_grad, LOG_STD_MAX, LOG_STD_MIN,
};
use crate::nn::{bernoulli_entropy, bernoulli_logprob, clip_grad_norm, gaussian_entropy, gaussian_logprob, AdamState, Network};
use crate::rollout::{normalize_advantages, RolloutBatch, Transition};
use crate::scalar::Scalar;

/// Averages over every minibatch of one update call.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats<T> {
    pub policy_loss: T,
    pub value_loss: T,
    pub entropy: T,
    pub mean_ratio: T,
    pub clip_fraction: T,
    pub approx_kl: T,
    pub minibatches: usize,
}

/// Probability ratios of a set of stored transitions under the current policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateStats<T> {
    pub ratios: Vec<T>,
    pub mean_ratio: T,
    pub clip_fraction: T,
}

/// Policy and value networks with their optimizer state.
#[derive(Debug, Clone)]
pub struct Learner<T> {
    pub policy: Policy<T>,
    pub value: Network<T>,
    pub hyper: AtppoHyper<T>,
    policy_adam: AdamState<T>,
    log_std_adam: AdamState<T>,
    value_adam: AdamState<T>,
}

struct SampleTerms<T> {
    ratio: T,
    surrogate: T,
    entropy: T,
    log_ratio: T,
}

impl<T: Scalar> Learner<T> {
    pub fn new(policy: Policy<T>, value: Network<T>, hyper: AtppoHyper<T>) -> Result<Self> {
        hyper.validate()?;
        if value.input_dim() != policy.obs_dim() || value.output_dim() != 1 {
            return Err(Error::Shape(format!(
                "value network {:?} incompatible with policy input {}",
                value.layer_dims(),
                policy.obs_dim()
            )));
        }
        let lr = hyper.learning_rate;
        Ok(Self {
            policy_adam: AdamState::new(policy.net.num_params(), lr),
            log_std_adam: AdamState::new(policy.control_dim(), lr),
            value_adam: AdamState::new(value.num_params(), lr),
            policy,
            value,
            hyper,
        })
    }

    /// Current joint log-probability of a stored transition.
    pub fn logprob(&self, tr: &Transition<T>) -> Result<T> {
        let heads = self.policy.heads(&tr.obs)?;
        let g = &heads.gaussian;
        let mut lp = gaussian_logprob(&g.mean, &g.log_std, &tr.control);
        if tr.trigger_sampled {
            lp += bernoulli_logprob(heads.bernoulli.logit, tr.trigger);
        }
        Ok(lp)
    }

    /// Ratios for `indices` without touching any parameter.
    pub fn surrogate_stats(&self, batch: &RolloutBatch<T>, indices: &[usize]) -> Result<SurrogateStats<T>> {
        let eps = self.hyper.clip_eps;
        let mut ratios = Vec::with_capacity(indices.len());
        for &i in indices {
            let tr = &batch.transitions[i];
            ratios.push((self.logprob(tr)? - tr.logprob).exp());
        }
        let n = T::from_usize(ratios.len().max(1)).unwrap();
        let clipped = ratios.iter().filter(|r| (**r - T::one()).abs() > eps).count();
        Ok(SurrogateStats {
            mean_ratio: ratios.iter().copied().sum::<T>() / n,
            clip_fraction: T::from_usize(clipped).unwrap() / n,
            ratios,
        })
    }

    /// Accumulates the gradient of `-(surrogate + entropy_coef * entropy) * weight`.
    fn policy_sample(
        &self,
        tr: &Transition<T>,
        advantage: T,
        weight: T,
        net_grads: &mut [T],
        log_std_grads: &mut [T],
    ) -> Result<SampleTerms<T>> {
        let heads = self.policy.heads(&tr.obs)?;
        let g = &heads.gaussian;
        let logit = heads.bernoulli.logit;
        let d = self.policy.control_dim();

        let mut lp = gaussian_logprob(&g.mean, &g.log_std, &tr.control);
        let mut entropy = gaussian_entropy(&g.log_std);
        if tr.trigger_sampled {
            lp += bernoulli_logprob(logit, tr.trigger);
            entropy += bernoulli_entropy(logit);
        }
        let log_ratio = lp - tr.logprob;
        let ratio = log_ratio.exp();
        let eps = self.hyper.clip_eps;
        let surrogate = clipped_surrogate(ratio, advantage, eps);
        // d(-weight * surrogate)/d logprob
        let dlp = -weight * clipped_surrogate_grad(ratio, advantage, eps) * ratio;
        let dent = -weight * self.hyper.entropy_coef;

        let mut d_mean = vec![T::zero(); d];
        let mut d_ls = vec![T::zero(); d];
        gaussian_logprob_grad(&g.mean, &g.log_std, &tr.control, &mut d_mean, &mut d_ls);
        let mut grad_out = vec![T::zero(); d + 1];
        for i in 0..d {
            grad_out[i] = dlp * d_mean[i];
            let raw = self.policy.log_std_param[i];
            let inside = raw >= T::lit(LOG_STD_MIN) && raw <= T::lit(LOG_STD_MAX);
            if inside {
                log_std_grads[i] += dlp * d_ls[i] + dent;
            }
        }
        if tr.trigger_sampled {
            let dtent = dent - weight * self.hyper.trigger_entropy_coef;
            grad_out[d] = dlp * bernoulli_logprob_grad(logit, tr.trigger) + dtent * bernoulli_entropy_grad(logit);
        }
        self.policy.net.accumulate_backward(&heads.cache, &grad_out, net_grads)?;
        Ok(SampleTerms {
            ratio,
            surrogate,
            entropy,
            log_ratio,
        })
    }

    /// Clipped-surrogate update over shuffled minibatches for `epochs_per_batch` epochs.
    ///
    /// The batch must carry advantages and returns.
    pub fn ppo_update<R: Rng + ?Sized>(&mut self, batch: &RolloutBatch<T>, rng: &mut R) -> Result<UpdateStats<T>> {
        let n = batch.len();
        if batch.advantages.len() != n || batch.returns.len() != n {
            return Err(Error::Sequencing("advantages must be computed before the update".into()));
        }
        let advantages = if self.hyper.normalize_advantages {
            normalize_advantages(&batch.advantages)
        } else {
            batch.advantages.clone()
        };
        let mut indices: Vec<usize> = (0..n).collect();
        let mut totals = UpdateStats::<T>::default();
        for _ in 0..self.hyper.epochs_per_batch {
            indices.shuffle(rng);
            for chunk in indices.chunks(self.hyper.minibatch_size) {
                let s = self.minibatch_step(batch, &advantages, chunk)?;
                totals.policy_loss += s.policy_loss;
                totals.value_loss += s.value_loss;
                totals.entropy += s.entropy;
                totals.mean_ratio += s.mean_ratio;
                totals.clip_fraction += s.clip_fraction;
                totals.approx_kl += s.approx_kl;
                totals.minibatches += 1;
            }
        }
        let m = T::from_usize(totals.minibatches.max(1)).unwrap();
        Ok(UpdateStats {
            policy_loss: totals.policy_loss / m,
            value_loss: totals.value_loss / m,
            entropy: totals.entropy / m,
            mean_ratio: totals.mean_ratio / m,
            clip_fraction: totals.clip_fraction / m,
            approx_kl: totals.approx_kl / m,
            minibatches: totals.minibatches,
        })
    }

    /// One gradient step on the given transitions.
    pub fn minibatch_step(
        &mut self,
        batch: &RolloutBatch<T>,
        advantages: &[T],
        indices: &[usize],
    ) -> Result<UpdateStats<T>> {
        let b = T::from_usize(indices.len().max(1)).unwrap();
        let weight = T::one() / b;
        let eps = self.hyper.clip_eps;
        let mut net_grads = self.policy.net.zeros_like();
        let mut ls_grads = vec![T::zero(); self.policy.control_dim()];
        let mut value_grads = self.value.zeros_like();
        let mut stats = UpdateStats::<T>::default();
        let mut clipped = 0usize;

        for &i in indices {
            let tr = &batch.transitions[i];
            let terms = self.policy_sample(tr, advantages[i], weight, &mut net_grads, &mut ls_grads)?;
            stats.policy_loss -= terms.surrogate * weight;
            stats.entropy += terms.entropy * weight;
            stats.mean_ratio += terms.ratio * weight;
            stats.approx_kl += ((terms.ratio - T::one()) - terms.log_ratio) * weight;
            if (terms.ratio - T::one()).abs() > eps {
                clipped += 1;
            }

            let (v, cache) = self.value.forward(&tr.obs)?;
            let err = v[0] - batch.returns[i];
            stats.value_loss += err * err * weight;
            let dv = T::lit(2.0) * self.hyper.value_coef * err * weight;
            self.value.accumulate_backward(&cache, &[dv], &mut value_grads)?;
        }
        stats.policy_loss -= self.hyper.entropy_coef * stats.entropy;
        stats.clip_fraction = T::from_usize(clipped).unwrap() * weight;
        stats.minibatches = 1;
        if !stats.policy_loss.is_finite() || !stats.value_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss (policy {}, value {})",
                stats.policy_loss, stats.value_loss
            )));
        }

        clip_grad_norm(&mut [&mut net_grads[..], &mut ls_grads[..]], self.hyper.max_grad_norm);
        clip_grad_norm(&mut [&mut value_grads[..]], self.hyper.max_grad_norm);
        self.policy_adam.step(self.policy.net.params_mut(), &net_grads)?;
        self.log_std_adam.step(&mut self.policy.log_std_param, &ls_grads)?;
        self.value_adam.step(self.value.params_mut(), &value_grads)?;
        Ok(stats)
    }
}
