use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::engagement::{
    engagement_reward, engagement_terminal, png_acceleration, rk4_step, wrap_angle,
    EngagementParams, EngagementState, RelativeGeometry, RewardWeights, Terminal, Vehicle,
};
use super::{check_finite, EnvKind, Environment, StepInfo, StepResult};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Scenario and reward settings for the single pursuer / single target engagement.
#[derive(Debug, Clone, PartialEq)]
pub struct PursuitConfig<T> {
    pub pursuer_speed: T,
    pub target_speed: T,
    /// Nominal headings in degrees.
    pub pursuer_heading_deg: T,
    pub target_heading_deg: T,
    pub initial_range: T,
    pub los_deg: T,
    /// Both headings are drawn uniformly within this many degrees of nominal at reset.
    pub heading_spread_deg: T,
    pub dt: T,
    pub t_max: T,
    pub nav_constant: T,
    /// Constant lateral acceleration of the target (0 = straight line).
    pub target_accel: T,
    /// Standard deviation of white heading-rate noise on the pursuer, rad/s (0 = off).
    pub heading_noise_std: T,
    pub params: EngagementParams<T>,
    pub weights: RewardWeights<T>,
}

impl<T: Scalar> Default for PursuitConfig<T> {
    fn default() -> Self {
        Self {
            pursuer_speed: T::lit(40.0),
            target_speed: T::lit(20.0),
            pursuer_heading_deg: T::lit(30.0),
            target_heading_deg: T::lit(40.0),
            initial_range: T::lit(1000.0),
            los_deg: T::zero(),
            heading_spread_deg: T::zero(),
            dt: T::lit(0.01),
            t_max: T::lit(60.0),
            nav_constant: T::lit(3.0),
            target_accel: T::zero(),
            heading_noise_std: T::zero(),
            params: EngagementParams::default(),
            weights: RewardWeights::default(),
        }
    }
}

impl<T: Scalar> PursuitConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let z = T::zero();
        let ok = self.pursuer_speed > z
            && self.target_speed > z
            && self.target_speed < self.pursuer_speed
            && self.initial_range > self.weights.r_miss
            && self.heading_spread_deg >= z
            && self.dt > z
            && self.t_max >= self.dt
            && self.nav_constant > z
            && self.heading_noise_std >= z
            && self.params.tau > z
            && self.params.a_p_max > z
            && self.params.a_t_max >= z;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid pursuit settings: {self:?}")))
        }
    }

    /// Engagement at the nominal (or heading-perturbed) initial conditions.
    pub fn initial_state(&self, pursuer_offset_deg: T, target_offset_deg: T) -> EngagementState<T> {
        let deg = T::lit(std::f64::consts::PI / 180.0);
        let los = self.los_deg * deg;
        EngagementState {
            pursuer: Vehicle::new(
                T::zero(),
                T::zero(),
                (self.pursuer_heading_deg + pursuer_offset_deg) * deg,
                self.pursuer_speed,
            ),
            target: Vehicle::new(
                self.initial_range * los.cos(),
                self.initial_range * los.sin(),
                (self.target_heading_deg + target_offset_deg) * deg,
                self.target_speed,
            ),
            t: T::zero(),
        }
    }
}

/// Pursuit-evasion episode. The observation is `[r, r_dot, eta, eta_dot, psi_P]`
/// and the control is the commanded pursuer lateral acceleration.
#[derive(Debug, Clone)]
pub struct PursuitEnv<T> {
    pub config: PursuitConfig<T>,
    state: EngagementState<T>,
    geom: RelativeGeometry<T>,
    r0: T,
    done: bool,
    max_steps: usize,
    rng: ChaCha8Rng,
}

impl<T: Scalar> PursuitEnv<T> {
    pub fn new(config: PursuitConfig<T>) -> Result<Self> {
        config.validate()?;
        let state = config.initial_state(T::zero(), T::zero());
        let geom = state.geometry()?;
        let max_steps = (config.t_max / config.dt)
            .ceil()
            .to_usize()
            .ok_or_else(|| Error::Config("episode length not representable".into()))?;
        Ok(Self {
            r0: geom.r,
            config,
            state,
            geom,
            done: false,
            max_steps,
            rng: ChaCha8Rng::seed_from_u64(0),
        })
    }

    pub fn engagement(&self) -> &EngagementState<T> {
        &self.state
    }

    pub fn geometry(&self) -> &RelativeGeometry<T> {
        &self.geom
    }

    /// Proportional-navigation command for the current geometry, clamped to the pursuer limit.
    pub fn png_command(&self) -> Result<T> {
        let a = png_acceleration(&self.geom, self.config.nav_constant)?;
        let lim = self.config.params.a_p_max;
        Ok(a.max(-lim).min(lim))
    }

    fn observe(&self) -> Vec<T> {
        let g = &self.geom;
        vec![g.r, g.v_r, g.eta, g.los_rate(), self.state.pursuer.heading]
    }
}

impl<T: Scalar> Environment<T> for PursuitEnv<T> {
    fn kind(&self) -> EnvKind {
        EnvKind::Pursuit
    }

    fn dims(&self) -> (usize, usize) {
        (5, 1)
    }

    fn dt(&self) -> T {
        self.config.dt
    }

    fn reset(&mut self, seed: u64) -> Vec<T> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let spread = self.config.heading_spread_deg.to_f64_lossy();
        let (dp, dt) = if spread > 0.0 {
            (
                T::lit(self.rng.gen_range(-spread..=spread)),
                T::lit(self.rng.gen_range(-spread..=spread)),
            )
        } else {
            (T::zero(), T::zero())
        };
        self.state = self.config.initial_state(dp, dt);
        self.geom = self
            .state
            .geometry()
            .expect("initial range exceeds the capture radius");
        self.r0 = self.geom.r;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, control: &[T]) -> Result<StepResult<T>> {
        if self.done {
            return Err(Error::Sequencing("pursuit stepped after episode end".into()));
        }
        if control.len() != 1 {
            return Err(Error::Shape(format!("pursuit control has length {}", control.len())));
        }
        let cfg = &self.config;
        let mut next = rk4_step(&self.state, &cfg.params, control[0], cfg.target_accel, cfg.dt)?;
        if cfg.heading_noise_std > T::zero() {
            let z: f64 = self.rng.sample(StandardNormal);
            next.pursuer.heading =
                wrap_angle(next.pursuer.heading + cfg.heading_noise_std * cfg.dt.sqrt() * T::lit(z));
        }
        self.state = next;
        self.geom = self.state.geometry()?;
        let obs = self.observe();
        check_finite(&obs, "pursuit")?;
        let reward = engagement_reward(
            &self.geom,
            self.r0,
            self.state.pursuer.accel,
            &cfg.weights,
            cfg.params.a_p_max,
        );
        let terminal = engagement_terminal(&self.geom, self.state.t, cfg.weights.r_miss, cfg.t_max);
        let info = StepInfo {
            captured: terminal == Terminal::Capture,
            timed_out: terminal == Terminal::Timeout,
        };
        self.done = terminal != Terminal::Running;
        Ok(StepResult {
            state: obs,
            raw_reward: reward,
            done: self.done,
            info,
        })
    }

    fn state(&self) -> Vec<T> {
        self.observe()
    }

    fn time(&self) -> T {
        self.state.t
    }

    fn observation_scale(&self) -> Vec<T> {
        let c = &self.config;
        let horizon = c.initial_range / c.pursuer_speed;
        vec![
            T::one() / c.initial_range,
            T::one() / c.pursuer_speed,
            T::one(),
            horizon,
            T::one(),
        ]
    }

    fn max_steps(&self) -> usize {
        self.max_steps
    }
}
