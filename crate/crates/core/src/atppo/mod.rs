//! Joint learning of the control and the triggering decision with a
//! penalized clipped-surrogate policy gradient. Vanilla PPO is the special
//! case where every step broadcasts and the penalty is zero.

mod learner;
mod policy;
mod train;

use std::fmt;
use std::str::FromStr;

pub use learner::{Learner, SurrogateStats, UpdateStats};
pub use policy::{augment, shaped_reward, ActMode, AugmentedObs, JointAction, Policy, PolicyHeads};
pub use train::{evaluate, run_episodes, train, EpisodeReport, EvalReport, TraceRow, Trainer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Learned trigger with a per-broadcast penalty.
    Atppo,
    /// Broadcast at every step, no penalty.
    Ppo,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Atppo => "atppo",
            Algorithm::Ppo => "ppo",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "atppo" => Ok(Algorithm::Atppo),
            "ppo" => Ok(Algorithm::Ppo),
            other => Err(Error::Config(format!(
                "unknown algorithm '{other}' (expected atppo or ppo)"
            ))),
        }
    }
}

/// Learner hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AtppoHyper<T> {
    pub clip_eps: T,
    /// Reward deducted at every broadcast.
    pub trigger_penalty: T,
    pub gamma: T,
    pub lam: T,
    /// Divisor applied to the running reward sum in the augmented observation.
    pub accrual_scale: T,
    pub epochs_per_batch: usize,
    pub minibatch_size: usize,
    pub value_coef: T,
    pub entropy_coef: T,
    /// Extra weight on the trigger head's entropy alone; negative values push
    /// trigger probabilities towards 0 or 1.
    pub trigger_entropy_coef: T,
    /// Rewards are divided by this before the critic sees them, so value targets stay O(1).
    pub value_scale: T,
    pub horizon: usize,
    pub total_steps: usize,
    pub learning_rate: T,
    pub max_grad_norm: T,
    pub normalize_advantages: bool,
    pub seed: u64,
}

impl<T: Scalar> Default for AtppoHyper<T> {
    fn default() -> Self {
        Self {
            clip_eps: T::lit(0.2),
            trigger_penalty: T::lit(0.05),
            gamma: T::lit(0.99),
            lam: T::lit(0.95),
            accrual_scale: T::lit(100.0),
            epochs_per_batch: 10,
            minibatch_size: 64,
            value_coef: T::lit(0.5),
            entropy_coef: T::zero(),
            trigger_entropy_coef: T::zero(),
            value_scale: T::one(),
            horizon: 2048,
            total_steps: 300_000,
            learning_rate: T::lit(3e-4),
            max_grad_norm: T::lit(0.5),
            normalize_advantages: true,
            seed: 0,
        }
    }
}

impl<T: Scalar> AtppoHyper<T> {
    pub fn validate(&self) -> Result<()> {
        let (z, one) = (T::zero(), T::one());
        let check = |ok: bool, msg: String| if ok { Ok(()) } else { Err(Error::Config(msg)) };
        check(
            self.clip_eps > z && self.clip_eps < one,
            format!("clip_eps must lie in (0, 1), got {}", self.clip_eps),
        )?;
        check(
            self.trigger_penalty >= z && self.trigger_penalty.is_finite(),
            format!("trigger_penalty must be >= 0, got {}", self.trigger_penalty),
        )?;
        check(
            self.gamma >= z && self.gamma < one,
            format!("gamma must lie in [0, 1), got {}", self.gamma),
        )?;
        check(
            self.lam >= z && self.lam <= one,
            format!("lam must lie in [0, 1], got {}", self.lam),
        )?;
        check(
            self.accrual_scale > z && self.accrual_scale.is_finite(),
            format!("accrual_scale must be > 0, got {}", self.accrual_scale),
        )?;
        check(self.epochs_per_batch >= 1, "epochs_per_batch must be >= 1".into())?;
        check(self.minibatch_size >= 1, "minibatch_size must be >= 1".into())?;
        check(self.horizon >= 1, "horizon must be >= 1".into())?;
        check(
            self.value_coef >= z && self.entropy_coef >= z,
            "value_coef and entropy_coef must be >= 0".into(),
        )?;
        check(
            self.trigger_entropy_coef.is_finite(),
            "trigger_entropy_coef must be finite".into(),
        )?;
        check(
            self.value_scale > z && self.value_scale.is_finite(),
            format!("value_scale must be > 0, got {}", self.value_scale),
        )?;
        check(
            self.learning_rate > z && self.learning_rate.is_finite(),
            format!("learning_rate must be > 0, got {}", self.learning_rate),
        )?;
        check(
            self.max_grad_norm > z,
            format!("max_grad_norm must be > 0, got {}", self.max_grad_norm),
        )?;
        Ok(())
    }
}

/// `min(ratio * adv, clip(ratio, 1 - eps, 1 + eps) * adv)` for one sample.
pub fn clipped_surrogate<T: Scalar>(ratio: T, advantage: T, clip_eps: T) -> T {
    let clipped = ratio.max(T::one() - clip_eps).min(T::one() + clip_eps);
    (ratio * advantage).min(clipped * advantage)
}

/// Partial derivative of [`clipped_surrogate`] with respect to `ratio`.
///
/// Zero where clipping is active and the unclipped branch would improve the objective.
pub fn clipped_surrogate_grad<T: Scalar>(ratio: T, advantage: T, clip_eps: T) -> T {
    let clipped = ratio.max(T::one() - clip_eps).min(T::one() + clip_eps);
    if ratio * advantage <= clipped * advantage {
        advantage
    } else {
        T::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_scalar_cases() {
        assert!((clipped_surrogate(1.5, 1.0, 0.2) - 1.2f64).abs() < 1e-15);
        assert!((clipped_surrogate(0.5, -1.0, 0.2) + 0.8f64).abs() < 1e-15);
        assert_eq!(clipped_surrogate(1.0, 3.0, 0.2), 3.0f64);
    }

    #[test]
    fn surrogate_flat_outside_trust_region() {
        assert_eq!(clipped_surrogate_grad(1.3, 2.0, 0.2), 0.0f64);
        assert_eq!(clipped_surrogate_grad(0.7, -2.0, 0.2), 0.0f64);
        assert_eq!(clipped_surrogate_grad(1.3, -2.0, 0.2), -2.0f64);
        assert_eq!(clipped_surrogate_grad(0.7, 2.0, 0.2), 2.0f64);
        assert_eq!(clipped_surrogate_grad(1.0, 2.0, 0.2), 2.0f64);
    }

    #[test]
    fn hyper_validation() {
        let h = AtppoHyper::<f64>::default();
        assert!(h.validate().is_ok());
        assert!(AtppoHyper { clip_eps: 1.5, ..h.clone() }.validate().is_err());
        assert!(AtppoHyper { trigger_penalty: -0.1, ..h.clone() }.validate().is_err());
        assert!(AtppoHyper { gamma: 1.0, ..h.clone() }.validate().is_err());
        assert!(AtppoHyper { horizon: 0, ..h }.validate().is_err());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in [Algorithm::Atppo, Algorithm::Ppo] {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!("sac".parse::<Algorithm>().is_err());
    }
}
