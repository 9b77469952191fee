//! Trajectory collection under event-triggered execution, and advantage estimation.

mod gae;

pub use gae::{compute_gae, normalize_advantages};

use rand::Rng;

use crate::atppo::{augment, shaped_reward, ActMode, Policy};
use crate::envs::{EnvKind, Environment, StepInfo};
use crate::error::{Error, Result};
use crate::etc::EtcState;
use crate::nn::Network;
use crate::scalar::Scalar;

/// Bookkeeping attached to each transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionInfo<T> {
    /// Time of the decision within its episode.
    pub time: T,
    /// Control actually applied by the zero-order hold.
    pub applied_control: Vec<T>,
    pub step_info: StepInfo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T> {
    /// Augmented observation fed to both networks.
    pub obs: Vec<T>,
    /// Whether a broadcast happened at this step.
    pub trigger: bool,
    /// Whether `trigger` was drawn from the trigger head. False at episode
    /// starts and when triggering is forced; the Bernoulli term is then
    /// absent from `logprob` and from the update.
    pub trigger_sampled: bool,
    /// Sampled control, stored even when the held control was applied instead.
    pub control: Vec<T>,
    /// Behavior-policy log-probability of the recorded realization.
    pub logprob: T,
    pub reward: T,
    pub raw_reward: T,
    pub value: T,
    pub done: bool,
    pub info: TransitionInfo<T>,
}

/// One finished episode, as seen during collection.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary<T> {
    pub raw_return: T,
    pub steps: usize,
    pub events: usize,
    pub captured: bool,
    pub event_times: Vec<T>,
}

#[derive(Debug, Clone, Default)]
pub struct RolloutBatch<T> {
    pub transitions: Vec<Transition<T>>,
    /// Indices of transitions that begin an episode.
    pub episode_starts: Vec<usize>,
    /// Value of the observation after the last transition (0 if it was terminal).
    pub bootstrap_value: T,
    pub completed: Vec<EpisodeSummary<T>>,
    pub advantages: Vec<T>,
    pub returns: Vec<T>,
}

impl<T: Scalar> RolloutBatch<T> {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Fills `advantages` and `returns` with GAE(lambda).
    pub fn compute_advantages(&mut self, gamma: T, lambda: T) -> Result<()> {
        self.compute_scaled_advantages(gamma, lambda, T::one())
    }

    /// As [`compute_advantages`](Self::compute_advantages) with every reward divided by
    /// `scale`; stored values are taken to be in those units too.
    pub fn compute_scaled_advantages(&mut self, gamma: T, lambda: T, scale: T) -> Result<()> {
        let rewards: Vec<T> = self.transitions.iter().map(|t| t.reward / scale).collect();
        let values: Vec<T> = self.transitions.iter().map(|t| t.value).collect();
        let dones: Vec<bool> = self.transitions.iter().map(|t| t.done).collect();
        let (adv, ret) = compute_gae(&rewards, &values, &dones, self.bootstrap_value, gamma, lambda)?;
        self.advantages = adv;
        self.returns = ret;
        Ok(())
    }

    pub fn trigger_count(&self) -> usize {
        self.transitions.iter().filter(|t| t.trigger).count()
    }
}

/// How the trigger decision is produced while stepping an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerMode {
    /// Learned trigger head.
    Learned,
    /// Broadcast every step (vanilla PPO).
    Always,
}

/// Runs one environment under zero-order-hold execution of a policy and
/// keeps the accrued reward used in the augmented observation.
pub struct EpisodeRunner<T: Scalar> {
    env: Box<dyn Environment<T>>,
    scale: Vec<T>,
    accrual_scale: T,
    trigger_penalty: T,
    trigger_mode: TriggerMode,
    etc: Option<EtcState<T>>,
    state: Vec<T>,
    accrued: T,
    steps: usize,
    captured: bool,
}

impl<T: Scalar> EpisodeRunner<T> {
    pub fn new(
        env: Box<dyn Environment<T>>,
        accrual_scale: T,
        trigger_penalty: T,
        trigger_mode: TriggerMode,
    ) -> Self {
        let scale = env.observation_scale();
        let state = env.state();
        Self {
            env,
            scale,
            accrual_scale,
            trigger_penalty,
            trigger_mode,
            etc: None,
            state,
            accrued: T::zero(),
            steps: 0,
            captured: false,
        }
    }

    pub fn env(&self) -> &dyn Environment<T> {
        self.env.as_ref()
    }

    pub fn env_kind(&self) -> EnvKind {
        self.env.kind()
    }

    pub fn reset(&mut self, seed: u64) {
        self.state = self.env.reset(seed);
        self.etc = None;
        self.accrued = T::zero();
        self.steps = 0;
        self.captured = false;
    }

    /// Augmented, scaled observation of the current state.
    pub fn observation(&self) -> Result<Vec<T>> {
        let scaled: Vec<T> = self.state.iter().zip(&self.scale).map(|(&s, &k)| s * k).collect();
        Ok(augment(&scaled, self.accrued, self.accrual_scale)?.to_vec())
    }

    pub fn state(&self) -> &[T] {
        &self.state
    }

    pub fn etc(&self) -> Option<&EtcState<T>> {
        self.etc.as_ref()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn accrued(&self) -> T {
        self.accrued
    }

    /// Queries the policy, applies the held or fresh control, and advances the plant.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        policy: &Policy<T>,
        value_net: Option<&Network<T>>,
        mode: ActMode,
        rng: &mut R,
    ) -> Result<Transition<T>> {
        let obs = self.observation()?;
        let action = policy.act(&obs, mode, rng)?;
        let value = match value_net {
            Some(v) => v.predict(&obs)?[0],
            None => T::zero(),
        };
        let sampled = self.trigger_mode == TriggerMode::Learned && self.etc.is_some();
        let logprob = if sampled {
            action.logprob
        } else {
            action.gaussian_logprob
        };
        self.advance(obs, action.trigger, action.control, logprob, value)
    }

    /// Steps with a control computed outside any policy (e.g. a guidance law).
    pub fn step_with_control(&mut self, control: Vec<T>, trigger: bool) -> Result<Transition<T>> {
        let obs = self.observation()?;
        self.advance(obs, trigger, control, T::zero(), T::zero())
    }

    fn advance(
        &mut self,
        obs: Vec<T>,
        proposed_trigger: bool,
        control: Vec<T>,
        logprob: T,
        value: T,
    ) -> Result<Transition<T>> {
        let t = self.env.time();
        let (trigger, trigger_sampled, applied) = match self.etc.as_mut() {
            None => {
                self.etc = Some(EtcState::reset(&self.state, &control));
                (true, false, control.clone())
            }
            Some(etc) => {
                let (trigger, sampled) = match self.trigger_mode {
                    TriggerMode::Learned => (proposed_trigger, true),
                    TriggerMode::Always => (true, false),
                };
                let applied = etc.apply(t, &self.state, trigger, &control)?;
                (trigger, sampled, applied)
            }
        };
        let out = self.env.step(&applied)?;
        self.state = out.state;
        self.steps += 1;
        self.accrued += out.raw_reward;
        self.captured |= out.info.captured;
        Ok(Transition {
            obs,
            trigger,
            trigger_sampled,
            control,
            logprob,
            reward: shaped_reward(out.raw_reward, trigger, self.trigger_penalty),
            raw_reward: out.raw_reward,
            value,
            done: out.done,
            info: TransitionInfo {
                time: t,
                applied_control: applied,
                step_info: out.info,
            },
        })
    }

    /// Summary of the episode in progress (complete once a `done` transition was returned).
    pub fn summary(&self) -> EpisodeSummary<T> {
        let event_times = self.etc.as_ref().map(|e| e.event_times.clone()).unwrap_or_default();
        EpisodeSummary {
            raw_return: self.accrued,
            steps: self.steps,
            events: event_times.len(),
            captured: self.captured,
            event_times,
        }
    }
}

/// Collects exactly `horizon` sampled transitions, resetting the runner with
/// fresh seeds from `rng` whenever an episode ends.
///
/// The runner must already be reset; collection resumes mid-episode across calls.
pub fn collect_rollout<T: Scalar, R: Rng + ?Sized>(
    policy: &Policy<T>,
    value_net: &Network<T>,
    runner: &mut EpisodeRunner<T>,
    horizon: usize,
    rng: &mut R,
) -> Result<RolloutBatch<T>> {
    if horizon == 0 {
        return Err(Error::Config("rollout horizon must be at least 1".into()));
    }
    let mut batch = RolloutBatch {
        transitions: Vec::with_capacity(horizon),
        ..Default::default()
    };
    for i in 0..horizon {
        if runner.steps() == 0 {
            batch.episode_starts.push(i);
        }
        let tr = runner.step(policy, Some(value_net), ActMode::Sample, rng)?;
        let done = tr.done;
        batch.transitions.push(tr);
        if done {
            batch.completed.push(runner.summary());
            runner.reset(rng.gen());
        }
    }
    batch.bootstrap_value = if batch.transitions.last().is_none_or(|t| t.done) {
        T::zero()
    } else {
        value_net.predict(&runner.observation()?)?[0]
    };
    Ok(batch)
}
