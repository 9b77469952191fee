//! Planar pursuer/target kinematics with a first-order autopilot lag on the
//! pursuer, relative line-of-sight geometry, the shaped capture reward and
//! proportional navigation.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Constant-speed nonholonomic vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vehicle<T> {
    pub x: T,
    pub y: T,
    /// Heading in `(-pi, pi]`.
    pub heading: T,
    pub speed: T,
    /// Achieved lateral acceleration.
    pub accel: T,
}

impl<T: Scalar> Vehicle<T> {
    pub fn new(x: T, y: T, heading: T, speed: T) -> Self {
        Self {
            x,
            y,
            heading: wrap_angle(heading),
            speed,
            accel: T::zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngagementState<T> {
    pub pursuer: Vehicle<T>,
    pub target: Vehicle<T>,
    pub t: T,
}

impl<T: Scalar> EngagementState<T> {
    fn to_array(self) -> [T; 8] {
        let (p, q) = (self.pursuer, self.target);
        [p.x, p.y, p.heading, p.accel, q.x, q.y, q.heading, q.accel]
    }

    fn with_array(mut self, v: [T; 8]) -> Self {
        self.pursuer.x = v[0];
        self.pursuer.y = v[1];
        self.pursuer.heading = v[2];
        self.pursuer.accel = v[3];
        self.target.x = v[4];
        self.target.y = v[5];
        self.target.heading = v[6];
        self.target.accel = v[7];
        self
    }

    pub fn geometry(&self) -> Result<RelativeGeometry<T>> {
        relative_geometry(&self.pursuer, &self.target)
    }
}

/// Autopilot time constant and lateral-acceleration limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngagementParams<T> {
    pub tau: T,
    pub a_p_max: T,
    pub a_t_max: T,
}

impl<T: Scalar> Default for EngagementParams<T> {
    fn default() -> Self {
        Self {
            tau: T::lit(0.25),
            a_p_max: T::lit(5.0),
            a_t_max: T::lit(5.0),
        }
    }
}

/// Line-of-sight quantities of the target as seen from the pursuer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeGeometry<T> {
    pub r: T,
    /// Line-of-sight angle.
    pub eta: T,
    /// Range rate, negative while closing.
    pub v_r: T,
    /// Relative speed across the line of sight, `r * eta_dot`.
    pub v_eta: T,
    /// Pursuer heading relative to the line of sight.
    pub sigma_p: T,
}

impl<T: Scalar> RelativeGeometry<T> {
    pub fn los_rate(&self) -> T {
        self.v_eta / self.r
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle<T: Scalar>(a: T) -> T {
    let pi = T::lit(std::f64::consts::PI);
    let two_pi = pi + pi;
    let m = (pi - a) % two_pi;
    let m = if m < T::zero() { m + two_pi } else { m };
    pi - m
}

pub fn relative_geometry<T: Scalar>(
    pursuer: &Vehicle<T>,
    target: &Vehicle<T>,
) -> Result<RelativeGeometry<T>> {
    let dx = target.x - pursuer.x;
    let dy = target.y - pursuer.y;
    let r = dx.hypot(dy);
    if !(r > T::zero()) {
        return Err(Error::Geometry("pursuer and target coincide".into()));
    }
    let eta = dy.atan2(dx);
    let sigma_p = pursuer.heading - eta;
    let tgt_rel = target.heading - eta;
    let v_r = target.speed * tgt_rel.cos() - pursuer.speed * sigma_p.cos();
    let v_eta = target.speed * tgt_rel.sin() - pursuer.speed * sigma_p.sin();
    Ok(RelativeGeometry {
        r,
        eta,
        v_r,
        v_eta,
        sigma_p: wrap_angle(sigma_p),
    })
}

fn clamp_abs<T: Scalar>(v: T, bound: T) -> T {
    v.max(-bound).min(bound)
}

/// Time derivative of `[X_P, Y_P, psi_P, a_P, X_T, Y_T, psi_T, a_T]`.
///
/// The pursuer's achieved acceleration lags the clamped command with time
/// constant `tau`; the target applies its clamped command directly.
pub fn engagement_derivatives<T: Scalar>(
    s: &EngagementState<T>,
    params: &EngagementParams<T>,
    a_p_cmd: T,
    a_t: T,
) -> Result<[T; 8]> {
    if !(s.pursuer.speed > T::zero() && s.target.speed > T::zero()) {
        return Err(Error::Config(format!(
            "vehicle speeds must be positive (pursuer {}, target {})",
            s.pursuer.speed, s.target.speed
        )));
    }
    if !(params.tau > T::zero()) {
        return Err(Error::Config(format!("autopilot lag must be positive, got {}", params.tau)));
    }
    let cmd = clamp_abs(a_p_cmd, params.a_p_max);
    let a_t = clamp_abs(a_t, params.a_t_max);
    let (p, q) = (&s.pursuer, &s.target);
    Ok([
        p.speed * p.heading.cos(),
        p.speed * p.heading.sin(),
        p.accel / p.speed,
        (cmd - p.accel) / params.tau,
        q.speed * q.heading.cos(),
        q.speed * q.heading.sin(),
        a_t / q.speed,
        T::zero(),
    ])
}

/// One classical Runge-Kutta step of [`engagement_derivatives`]; headings are re-wrapped.
pub fn rk4_step<T: Scalar>(
    s: &EngagementState<T>,
    params: &EngagementParams<T>,
    a_p_cmd: T,
    a_t: T,
    dt: T,
) -> Result<EngagementState<T>> {
    if !(dt > T::zero()) {
        return Err(Error::Config(format!("step size must be positive, got {dt}")));
    }
    let mut start = *s;
    start.target.accel = clamp_abs(a_t, params.a_t_max);
    let y0 = start.to_array();
    let half = T::lit(0.5);
    let offset = |k: &[T; 8], h: T| -> EngagementState<T> {
        let mut y = y0;
        for (yi, ki) in y.iter_mut().zip(k) {
            *yi += h * *ki;
        }
        start.with_array(y)
    };
    let k1 = engagement_derivatives(&start, params, a_p_cmd, a_t)?;
    let k2 = engagement_derivatives(&offset(&k1, half * dt), params, a_p_cmd, a_t)?;
    let k3 = engagement_derivatives(&offset(&k2, half * dt), params, a_p_cmd, a_t)?;
    let k4 = engagement_derivatives(&offset(&k3, dt), params, a_p_cmd, a_t)?;
    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    let mut y = y0;
    for i in 0..8 {
        y[i] += sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("engagement integration diverged: {y:?}")));
    }
    let mut next = start.with_array(y);
    next.pursuer.heading = wrap_angle(next.pursuer.heading);
    next.target.heading = wrap_angle(next.target.heading);
    next.pursuer.accel = clamp_abs(next.pursuer.accel, params.a_p_max);
    next.t = s.t + dt;
    Ok(next)
}

/// Weights of the five reward terms plus the capture shaping parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardWeights<T> {
    alpha: [T; 5],
    /// Slope of the inside-capture-radius bonus.
    pub m: T,
    /// Capture radius in metres.
    pub r_miss: T,
    /// `|v_eta|` below which the pursuer counts as on the collision triangle.
    pub collision_tol: T,
}

impl<T: Scalar> RewardWeights<T> {
    /// Validates and renormalizes `alpha` so it sums to one.
    pub fn new(alpha: [T; 5], m: T, r_miss: T) -> Result<Self> {
        if alpha.iter().any(|a| !(*a >= T::zero()) || !a.is_finite()) {
            return Err(Error::Config("reward weights must be finite and non-negative".into()));
        }
        let total: T = alpha.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::Config("reward weights must not all be zero".into()));
        }
        if !(m > T::zero()) {
            return Err(Error::Config(format!("reward slope m must be positive, got {m}")));
        }
        if !(r_miss > T::zero()) {
            return Err(Error::Config(format!("capture radius must be positive, got {r_miss}")));
        }
        Ok(Self {
            alpha: alpha.map(|a| a / total),
            m,
            r_miss,
            collision_tol: T::lit(0.1),
        })
    }

    pub fn alpha(&self) -> &[T; 5] {
        &self.alpha
    }
}

impl<T: Scalar> Default for RewardWeights<T> {
    fn default() -> Self {
        Self::new([0.3, 0.1, 0.2, 0.3, 0.1].map(T::lit), T::lit(50.0), T::lit(5.0))
            .expect("default reward weights are valid")
    }
}

/// The five unweighted reward terms.
pub fn reward_components<T: Scalar>(
    geom: &RelativeGeometry<T>,
    r0: T,
    a_p: T,
    weights: &RewardWeights<T>,
    a_p_max: T,
) -> [T; 5] {
    let zero = T::zero();
    let r1 = -geom.r / r0;
    let ratio = a_p / a_p_max;
    let r2 = -ratio * ratio;
    let r3 = if geom.v_r < zero {
        if geom.v_eta.abs() <= weights.collision_tol {
            T::one()
        } else {
            T::lit(0.25)
        }
    } else {
        -T::one()
    };
    let inside = geom.r < weights.r_miss;
    let r4 = if inside { T::lit(100.0) } else { zero };
    let r5 = if inside {
        (weights.m * (weights.r_miss - geom.r) / weights.r_miss).max(zero)
    } else {
        zero
    };
    [r1, r2, r3, r4, r5]
}

/// Convex combination of the five reward terms.
pub fn engagement_reward<T: Scalar>(
    geom: &RelativeGeometry<T>,
    r0: T,
    a_p: T,
    weights: &RewardWeights<T>,
    a_p_max: T,
) -> T {
    reward_components(geom, r0, a_p, weights, a_p_max)
        .iter()
        .zip(weights.alpha())
        .map(|(&c, &a)| a * c)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Capture,
    Timeout,
    Running,
}

/// Capture when strictly inside `r_miss`; otherwise timeout once `t >= t_max`.
pub fn engagement_terminal<T: Scalar>(geom: &RelativeGeometry<T>, t: T, r_miss: T, t_max: T) -> Terminal {
    if geom.r < r_miss {
        Terminal::Capture
    } else if t >= t_max {
        Terminal::Timeout
    } else {
        Terminal::Running
    }
}

/// Proportional navigation: `N * V_c * eta_dot` with closing speed `V_c = -v_r`.
/// The caller clamps to the pursuer's acceleration limit.
pub fn png_acceleration<T: Scalar>(geom: &RelativeGeometry<T>, nav_constant: T) -> Result<T> {
    if !(geom.r > T::zero()) {
        return Err(Error::Geometry("proportional navigation undefined at zero range".into()));
    }
    Ok(nav_constant * (-geom.v_r) * geom.los_rate())
}
