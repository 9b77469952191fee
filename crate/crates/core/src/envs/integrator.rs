use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_finite, EnvKind, Environment, StepInfo, StepResult};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Perturbed single integrator `x' = u + d`, `|d| <= d_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig<T> {
    pub x0: T,
    /// Half-width of a uniform perturbation of `x0` at reset (0 = fixed start).
    pub x0_spread: T,
    pub dt: T,
    pub episode_seconds: T,
    pub u_max: T,
    pub d_max: T,
    pub control_cost: T,
}

impl<T: Scalar> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self {
            x0: T::lit(5.0),
            x0_spread: T::zero(),
            dt: T::lit(0.01),
            episode_seconds: T::lit(10.0),
            u_max: T::lit(2.0),
            d_max: T::lit(0.1),
            control_cost: T::lit(0.01),
        }
    }
}

impl<T: Scalar> IntegratorConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt > T::zero()
            && self.episode_seconds >= self.dt
            && self.u_max > T::zero()
            && self.d_max >= T::zero()
            && self.x0_spread >= T::zero()
            && self.control_cost >= T::zero()
            && self.x0.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid integrator settings: {self:?}")))
        }
    }
}

/// One explicit Euler step with the control clamped to `[-u_max, u_max]` and
/// a uniform disturbance in `[-d_max, d_max]`.
pub fn integrator_step<T: Scalar, R: Rng + ?Sized>(
    x: T,
    u: T,
    u_max: T,
    dt: T,
    d_max: T,
    rng: &mut R,
) -> T {
    let u = u.max(-u_max).min(u_max);
    let d = if d_max > T::zero() {
        let dm = d_max.to_f64_lossy();
        T::lit(rng.gen_range(-dm..=dm))
    } else {
        T::zero()
    };
    x + (u + d) * dt
}

/// `-|x| - c u^2`; the default cost `c` is 0.01.
pub fn integrator_reward<T: Scalar>(x: T, u: T, control_cost: T) -> T {
    -x.abs() - control_cost * u * u
}

#[derive(Debug, Clone)]
pub struct IntegratorEnv<T> {
    pub config: IntegratorConfig<T>,
    x: T,
    step: usize,
    max_steps: usize,
    done: bool,
    rng: ChaCha8Rng,
}

impl<T: Scalar> IntegratorEnv<T> {
    pub fn new(config: IntegratorConfig<T>) -> Result<Self> {
        config.validate()?;
        let max_steps = (config.episode_seconds / config.dt)
            .round()
            .to_usize()
            .ok_or_else(|| Error::Config("episode length not representable".into()))?;
        Ok(Self {
            x: config.x0,
            config,
            step: 0,
            max_steps,
            done: false,
            rng: ChaCha8Rng::seed_from_u64(0),
        })
    }
}

impl<T: Scalar> Environment<T> for IntegratorEnv<T> {
    fn kind(&self) -> EnvKind {
        EnvKind::Integrator
    }

    fn dims(&self) -> (usize, usize) {
        (1, 1)
    }

    fn dt(&self) -> T {
        self.config.dt
    }

    fn reset(&mut self, seed: u64) -> Vec<T> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.x = self.config.x0;
        if self.config.x0_spread > T::zero() {
            let s = self.config.x0_spread.to_f64_lossy();
            self.x += T::lit(self.rng.gen_range(-s..=s));
        }
        self.step = 0;
        self.done = false;
        vec![self.x]
    }

    fn step(&mut self, control: &[T]) -> Result<StepResult<T>> {
        if self.done {
            return Err(Error::Sequencing("integrator stepped after episode end".into()));
        }
        if control.len() != 1 {
            return Err(Error::Shape(format!("integrator control has length {}", control.len())));
        }
        let c = &self.config;
        let u = control[0].max(-c.u_max).min(c.u_max);
        self.x = integrator_step(self.x, u, c.u_max, c.dt, c.d_max, &mut self.rng);
        check_finite(&[self.x], "integrator")?;
        self.step += 1;
        let timed_out = self.step >= self.max_steps;
        self.done = timed_out;
        Ok(StepResult {
            state: vec![self.x],
            raw_reward: integrator_reward(self.x, u, c.control_cost),
            done: timed_out,
            info: StepInfo {
                captured: false,
                timed_out,
            },
        })
    }

    fn state(&self) -> Vec<T> {
        vec![self.x]
    }

    fn time(&self) -> T {
        self.config.dt * T::from_usize(self.step).unwrap()
    }

    fn max_steps(&self) -> usize {
        self.max_steps
    }
}
