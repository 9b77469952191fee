//! Built-in continuous-time plants behind a common step interface.

mod engagement;
mod integrator;
mod pursuit;

use std::fmt;
use std::str::FromStr;

pub use engagement::{
    engagement_derivatives, engagement_reward, engagement_terminal, png_acceleration,
    relative_geometry, rk4_step, wrap_angle, EngagementParams, EngagementState, RelativeGeometry,
    RewardWeights, Terminal, Vehicle,
};
pub use integrator::{integrator_reward, integrator_step, IntegratorConfig, IntegratorEnv};
pub use pursuit::{PursuitConfig, PursuitEnv};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which built-in environment a run or checkpoint refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    Integrator,
    Pursuit,
}

impl EnvKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::Integrator => "integrator",
            EnvKind::Pursuit => "pursuit",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "integrator" => Ok(EnvKind::Integrator),
            "pursuit" => Ok(EnvKind::Pursuit),
            other => Err(Error::Config(format!(
                "unknown environment '{other}' (expected integrator or pursuit)"
            ))),
        }
    }
}

/// Extra per-step facts that do not fit the reward/done pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepInfo {
    pub captured: bool,
    pub timed_out: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult<T> {
    pub state: Vec<T>,
    pub raw_reward: T,
    pub done: bool,
    pub info: StepInfo,
}

pub trait Environment<T: Scalar>: Send {
    fn kind(&self) -> EnvKind;

    /// `(state_dim, control_dim)`.
    fn dims(&self) -> (usize, usize);

    /// Simulation step in seconds.
    fn dt(&self) -> T;

    /// Starts a new episode; all randomness of the episode derives from `seed`.
    fn reset(&mut self, seed: u64) -> Vec<T>;

    /// Advances one step under the applied (held) control.
    fn step(&mut self, control: &[T]) -> Result<StepResult<T>>;

    /// Current observation in physical units.
    fn state(&self) -> Vec<T>;

    /// Elapsed time in the current episode.
    fn time(&self) -> T;

    /// Fixed per-component factors applied to the observation before it reaches a network.
    fn observation_scale(&self) -> Vec<T> {
        vec![T::one(); self.dims().0]
    }

    /// Upper bound on episode length in steps.
    fn max_steps(&self) -> usize;
}

pub(crate) fn check_finite<T: Scalar>(state: &[T], what: &str) -> Result<()> {
    if crate::scalar::all_finite(state) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{what}: non-finite state {state:?}")))
    }
}
