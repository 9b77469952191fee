//! Action distributions for the control and trigger heads.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::Scalar;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Diagonal Gaussian over the control vector with a state-independent log standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianHead<T> {
    pub mean: Vec<T>,
    pub log_std: Vec<T>,
}

/// Bernoulli over the trigger decision, parameterized by its logit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliHead<T> {
    pub logit: T,
}

pub fn clamp_log_std<T: Scalar>(log_std: T) -> T {
    log_std.max(T::lit(LOG_STD_MIN)).min(T::lit(LOG_STD_MAX))
}

fn half_ln_two_pi<T: Scalar>() -> T {
    T::lit(0.5 * (2.0 * std::f64::consts::PI).ln())
}

/// Sum over dimensions of the diagonal Gaussian log density.
pub fn gaussian_logprob<T: Scalar>(mean: &[T], log_std: &[T], action: &[T]) -> T {
    assert_eq!(mean.len(), log_std.len(), "gaussian_logprob: mean/log_std length");
    assert_eq!(mean.len(), action.len(), "gaussian_logprob: mean/action length");
    let half = T::lit(0.5);
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((&mu, &ls), &a)| {
            let z = (a - mu) / ls.exp();
            -half * z * z - ls - half_ln_two_pi::<T>()
        })
        .sum()
}

/// Reparameterized draw `mean + exp(log_std) * z`.
pub fn gaussian_sample<T: Scalar, R: Rng + ?Sized>(mean: &[T], log_std: &[T], rng: &mut R) -> Vec<T> {
    mean.iter()
        .zip(log_std)
        .map(|(&mu, &ls)| {
            let z: f64 = rng.sample(StandardNormal);
            mu + ls.exp() * T::lit(z)
        })
        .collect()
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `ln σ(logit)` for `outcome = true`, `ln(1 - σ(logit))` otherwise.
pub fn bernoulli_logprob<T: Scalar>(logit: T, outcome: bool) -> T {
    if outcome {
        -softplus(-logit)
    } else {
        -softplus(logit)
    }
}

pub fn gaussian_entropy<T: Scalar>(log_std: &[T]) -> T {
    let c = T::lit(0.5) + half_ln_two_pi::<T>();
    log_std.iter().map(|&ls| c + ls).sum()
}

pub fn bernoulli_entropy<T: Scalar>(logit: T) -> T {
    let p = sigmoid(logit);
    -(p * bernoulli_logprob(logit, true) + (T::one() - p) * bernoulli_logprob(logit, false))
}

/// Joint entropy of the control and trigger heads.
pub fn entropy<T: Scalar>(gaussian: &GaussianHead<T>, bernoulli: &BernoulliHead<T>) -> T {
    gaussian_entropy(&gaussian.log_std) + bernoulli_entropy(bernoulli.logit)
}

// Derivatives used by the policy update.

/// d/d mean_i and d/d log_std_i of [`gaussian_logprob`], written into the two output slices.
pub fn gaussian_logprob_grad<T: Scalar>(
    mean: &[T],
    log_std: &[T],
    action: &[T],
    d_mean: &mut [T],
    d_log_std: &mut [T],
) {
    for i in 0..mean.len() {
        let inv_var = (-(log_std[i] + log_std[i])).exp();
        let diff = action[i] - mean[i];
        d_mean[i] = diff * inv_var;
        d_log_std[i] = diff * diff * inv_var - T::one();
    }
}

pub(crate) fn bernoulli_logprob_grad<T: Scalar>(logit: T, outcome: bool) -> T {
    let p = sigmoid(logit);
    if outcome {
        T::one() - p
    } else {
        -p
    }
}

pub(crate) fn bernoulli_entropy_grad<T: Scalar>(logit: T) -> T {
    let p = sigmoid(logit);
    -logit * p * (T::one() - p)
}
