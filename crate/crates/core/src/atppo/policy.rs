use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::dist::{clamp_log_std, gaussian_sample};
use crate::nn::{bernoulli_logprob, gaussian_logprob, sigmoid, BernoulliHead, ForwardCache, GaussianHead, Network};
use crate::scalar::{all_finite, Scalar};

/// Plant state concatenated with the scaled, clipped running sum of raw rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedObs<T> {
    pub state: Vec<T>,
    pub accrued_reward: T,
}

impl<T: Scalar> AugmentedObs<T> {
    pub fn to_vec(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.state.len() + 1);
        v.extend_from_slice(&self.state);
        v.push(self.accrued_reward);
        v
    }

    pub fn len(&self) -> usize {
        self.state.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub const ACCRUED_CLIP: f64 = 10.0;

/// `[state; clip(accrued / scale, -10, 10)]`.
pub fn augment<T: Scalar>(state: &[T], accrued: T, scale: T) -> Result<AugmentedObs<T>> {
    if !(scale > T::zero()) {
        return Err(Error::Config(format!("accrual scale must be positive, got {scale}")));
    }
    if !all_finite(state) || !accrued.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite observation: state {state:?}, accrued {accrued}"
        )));
    }
    let c = T::lit(ACCRUED_CLIP);
    Ok(AugmentedObs {
        state: state.to_vec(),
        accrued_reward: (accrued / scale).max(-c).min(c),
    })
}

/// `raw - psi` on a trigger, `raw` otherwise.
pub fn shaped_reward<T: Scalar>(raw: T, triggered: bool, psi: T) -> T {
    if triggered {
        raw - psi
    } else {
        raw
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    Sample,
    Deterministic,
}

/// Realized `(trigger, control)` pair with its log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct JointAction<T> {
    pub trigger: bool,
    pub control: Vec<T>,
    /// Gaussian log-density of `control` plus the Bernoulli log-mass of `trigger`.
    /// Zero in deterministic mode.
    pub logprob: T,
    pub gaussian_logprob: T,
    pub bernoulli_logprob: T,
    pub logit: T,
}

/// Network emitting the control mean and the trigger logit, plus a
/// state-independent log standard deviation for the control.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy<T> {
    pub net: Network<T>,
    /// Raw parameter; [`Policy::log_std`] returns it clamped to `[-5, 2]`.
    pub log_std_param: Vec<T>,
}

/// Distribution heads evaluated at one observation.
#[derive(Debug, Clone)]
pub struct PolicyHeads<T> {
    pub gaussian: GaussianHead<T>,
    pub bernoulli: BernoulliHead<T>,
    pub cache: ForwardCache<T>,
}

impl<T: Scalar> Policy<T> {
    /// `hidden` lists hidden layer widths; the output layer has `control_dim + 1` units.
    pub fn new(obs_dim: usize, control_dim: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(obs_dim);
        dims.extend_from_slice(hidden);
        dims.push(control_dim + 1);
        Ok(Self {
            net: Network::new(&dims, seed)?,
            log_std_param: vec![T::zero(); control_dim],
        })
    }

    pub fn from_parts(net: Network<T>, log_std_param: Vec<T>) -> Result<Self> {
        if net.output_dim() != log_std_param.len() + 1 {
            return Err(Error::Shape(format!(
                "policy network emits {} values for {} control dims",
                net.output_dim(),
                log_std_param.len()
            )));
        }
        Ok(Self { net, log_std_param })
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.log_std_param.len()
    }

    pub fn log_std(&self) -> Vec<T> {
        self.log_std_param.iter().map(|&l| clamp_log_std(l)).collect()
    }

    pub fn heads(&self, obs: &[T]) -> Result<PolicyHeads<T>> {
        let (out, cache) = self.net.forward(obs)?;
        let d = self.control_dim();
        Ok(PolicyHeads {
            gaussian: GaussianHead {
                mean: out[..d].to_vec(),
                log_std: self.log_std(),
            },
            bernoulli: BernoulliHead { logit: out[d] },
            cache,
        })
    }

    /// Draws (sample mode) or thresholds (deterministic mode) the joint action.
    ///
    /// Deterministic mode uses the mean control and triggers iff the logit is `>= 0`.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[T], mode: ActMode, rng: &mut R) -> Result<JointAction<T>> {
        let heads = self.heads(obs)?;
        let g = &heads.gaussian;
        let logit = heads.bernoulli.logit;
        match mode {
            ActMode::Sample => {
                let control = gaussian_sample(&g.mean, &g.log_std, rng);
                let p = sigmoid(logit).to_f64_lossy();
                let trigger = rng.gen::<f64>() < p;
                let glp = gaussian_logprob(&g.mean, &g.log_std, &control);
                let blp = bernoulli_logprob(logit, trigger);
                Ok(JointAction {
                    trigger,
                    control,
                    logprob: glp + blp,
                    gaussian_logprob: glp,
                    bernoulli_logprob: blp,
                    logit,
                })
            }
            ActMode::Deterministic => Ok(JointAction {
                trigger: logit >= T::zero(),
                control: g.mean.clone(),
                logprob: T::zero(),
                gaussian_logprob: T::zero(),
                bernoulli_logprob: T::zero(),
                logit,
            }),
        }
    }
}
