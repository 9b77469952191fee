//! Line-oriented `key = value` run configuration.
//!
//! Blank lines and text after `#` are ignored. Every key is optional; unknown
//! keys and out-of-range values are rejected with the offending line number.
//! Command-line overrides are applied after the file and reported as line 0.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::atppo::{Algorithm, AtppoHyper};
use crate::envs::{
    EnvKind, Environment, IntegratorConfig, IntegratorEnv, PursuitConfig, PursuitEnv, RewardWeights,
};
use crate::error::{Error, Result};

/// Environment variable that replaces the default output directory.
pub const OUT_DIR_ENV: &str = "ETRL_OUT";
pub const DEFAULT_OUT_DIR: &str = "runs";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Train,
    Eval,
    BaselinePng,
    Compare,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub env: EnvKind,
    pub algorithm: Algorithm,
    pub hyper: AtppoHyper<f64>,
    /// Hidden layer widths shared by the policy and value networks.
    pub hidden: Vec<usize>,
    /// Initial bias of the trigger logit; positive values start out broadcasting often.
    pub trigger_bias_init: f64,
    /// Initial log standard deviation of the control head.
    pub log_std_init: f64,
    /// Validate the deterministic policy every this many update cycles and keep
    /// the best-scoring parameters (0 = keep the final ones).
    pub select_every: usize,
    /// Episodes per validation; their environment steps count towards `total_steps`.
    pub select_episodes: usize,
    pub integrator: IntegratorConfig<f64>,
    pub pursuit: PursuitConfig<f64>,
    pub out_dir: PathBuf,
    pub eval_episodes: usize,
    pub eval_seed: u64,
    /// Window (steps) of the trigger moving average in reports.
    pub window: usize,
    trigger_penalty_set: bool,
}

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Default per-broadcast penalty for each environment.
pub fn default_trigger_penalty(env: EnvKind) -> f64 {
    match env {
        EnvKind::Integrator => 0.05,
        EnvKind::Pursuit => 0.02,
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Train,
            env: EnvKind::Integrator,
            algorithm: Algorithm::Atppo,
            hyper: AtppoHyper::default(),
            hidden: vec![64, 64],
            trigger_bias_init: 0.0,
            log_std_init: 0.0,
            select_every: 0,
            select_episodes: 5,
            integrator: IntegratorConfig::default(),
            pursuit: PursuitConfig::default(),
            out_dir: default_out_dir(),
            eval_episodes: 100,
            eval_seed: 12_345,
            window: 50,
            trigger_penalty_set: false,
        }
    }
}

fn parse_num<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value
        .parse::<T>()
        .map_err(|_| format!("malformed value '{value}'"))
}

fn parse_f64(value: &str) -> std::result::Result<f64, String> {
    let v: f64 = parse_num(value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("value '{value}' is not finite"))
    }
}

fn parse_bool(value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("malformed boolean '{value}'")),
    }
}

fn parse_list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, String> {
    value
        .split(',')
        .map(|p| parse_num(p.trim()))
        .collect()
}

impl RunConfig {
    /// Applies one `key = value` assignment and re-validates the affected group.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let h = &mut self.hyper;
        let ic = &mut self.integrator;
        let pc = &mut self.pursuit;
        match key {
            "env" => self.env = value.parse().map_err(|e: Error| e.to_string())?,
            "algorithm" => self.algorithm = value.parse().map_err(|e: Error| e.to_string())?,
            "seed" => h.seed = parse_num(value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "eval_episodes" => self.eval_episodes = parse_num(value)?,
            "eval_seed" => self.eval_seed = parse_num(value)?,
            "window" => self.window = parse_num(value)?,
            "hidden" => self.hidden = parse_list(value)?,
            "trigger_bias_init" => self.trigger_bias_init = parse_f64(value)?,
            "log_std_init" => self.log_std_init = parse_f64(value)?,
            "select_every" => self.select_every = parse_num(value)?,
            "select_episodes" => self.select_episodes = parse_num(value)?,
            "clip_eps" => h.clip_eps = parse_f64(value)?,
            "trigger_penalty" => {
                h.trigger_penalty = parse_f64(value)?;
                self.trigger_penalty_set = true;
            }
            "gamma" => h.gamma = parse_f64(value)?,
            "lam" => h.lam = parse_f64(value)?,
            "accrual_scale" => h.accrual_scale = parse_f64(value)?,
            "epochs_per_batch" => h.epochs_per_batch = parse_num(value)?,
            "minibatch_size" => h.minibatch_size = parse_num(value)?,
            "value_coef" => h.value_coef = parse_f64(value)?,
            "entropy_coef" => h.entropy_coef = parse_f64(value)?,
            "trigger_entropy_coef" => h.trigger_entropy_coef = parse_f64(value)?,
            "value_scale" => h.value_scale = parse_f64(value)?,
            "horizon" => h.horizon = parse_num(value)?,
            "total_steps" => h.total_steps = parse_num(value)?,
            "learning_rate" => h.learning_rate = parse_f64(value)?,
            "max_grad_norm" => h.max_grad_norm = parse_f64(value)?,
            "normalize_advantages" => h.normalize_advantages = parse_bool(value)?,
            "integrator.x0" => ic.x0 = parse_f64(value)?,
            "integrator.x0_spread" => ic.x0_spread = parse_f64(value)?,
            "integrator.dt" => ic.dt = parse_f64(value)?,
            "integrator.episode_seconds" => ic.episode_seconds = parse_f64(value)?,
            "integrator.u_max" => ic.u_max = parse_f64(value)?,
            "integrator.d_max" => ic.d_max = parse_f64(value)?,
            "integrator.control_cost" => ic.control_cost = parse_f64(value)?,
            "pursuit.pursuer_speed" => pc.pursuer_speed = parse_f64(value)?,
            "pursuit.target_speed" => pc.target_speed = parse_f64(value)?,
            "pursuit.pursuer_heading_deg" => pc.pursuer_heading_deg = parse_f64(value)?,
            "pursuit.target_heading_deg" => pc.target_heading_deg = parse_f64(value)?,
            "pursuit.initial_range" => pc.initial_range = parse_f64(value)?,
            "pursuit.los_deg" => pc.los_deg = parse_f64(value)?,
            "pursuit.heading_spread_deg" => pc.heading_spread_deg = parse_f64(value)?,
            "pursuit.dt" => pc.dt = parse_f64(value)?,
            "pursuit.t_max" => pc.t_max = parse_f64(value)?,
            "pursuit.nav_constant" => pc.nav_constant = parse_f64(value)?,
            "pursuit.target_accel" => pc.target_accel = parse_f64(value)?,
            "pursuit.heading_noise_std" => pc.heading_noise_std = parse_f64(value)?,
            "pursuit.tau" => pc.params.tau = parse_f64(value)?,
            "pursuit.a_p_max" => pc.params.a_p_max = parse_f64(value)?,
            "pursuit.a_t_max" => pc.params.a_t_max = parse_f64(value)?,
            "pursuit.alpha" => {
                let a: Vec<f64> = parse_list(value)?;
                let a: [f64; 5] = a
                    .try_into()
                    .map_err(|_| "pursuit.alpha needs exactly 5 weights".to_string())?;
                let tol = pc.weights.collision_tol;
                pc.weights = RewardWeights::new(a, pc.weights.m, pc.weights.r_miss)
                    .map_err(|e| e.to_string())?;
                pc.weights.collision_tol = tol;
            }
            "pursuit.m" | "pursuit.r_miss" => {
                let v = parse_f64(value)?;
                let w = pc.weights;
                let (m, r_miss) = if key == "pursuit.m" { (v, w.r_miss) } else { (w.m, v) };
                pc.weights = RewardWeights::new(*w.alpha(), m, r_miss).map_err(|e| e.to_string())?;
                pc.weights.collision_tol = w.collision_tol;
            }
            "pursuit.collision_tol" => {
                let v = parse_f64(value)?;
                if v < 0.0 {
                    return Err("pursuit.collision_tol must be >= 0".into());
                }
                pc.weights.collision_tol = v;
            }
            _ => return Err(format!("unknown key '{key}'")),
        }
        self.validate().map_err(|e| e.to_string())
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        self.integrator.validate()?;
        self.pursuit.validate()?;
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config(format!("hidden sizes must be positive, got {:?}", self.hidden)));
        }
        if self.window == 0 {
            return Err(Error::Config("window must be >= 1".into()));
        }
        if self.select_every > 0 && self.select_episodes == 0 {
            return Err(Error::Config("select_episodes must be >= 1 when select_every is set".into()));
        }
        Ok(())
    }

    /// Per-broadcast penalty actually applied: zero for vanilla PPO, the
    /// environment default unless set explicitly.
    pub fn effective_trigger_penalty(&self) -> f64 {
        match self.algorithm {
            Algorithm::Ppo => 0.0,
            Algorithm::Atppo => self.hyper.trigger_penalty,
        }
    }

    fn finish(&mut self) {
        if !self.trigger_penalty_set {
            self.hyper.trigger_penalty = default_trigger_penalty(self.env);
        }
    }

    /// Fresh instance of the configured environment.
    pub fn build_env(&self) -> Result<Box<dyn Environment<f64>>> {
        self.build_env_for(self.env)
    }

    pub fn build_env_for(&self, env: EnvKind) -> Result<Box<dyn Environment<f64>>> {
        Ok(match env {
            EnvKind::Integrator => Box::new(IntegratorEnv::new(self.integrator.clone())?),
            EnvKind::Pursuit => Box::new(PursuitEnv::new(self.pursuit.clone())?),
        })
    }
}

fn split_assignment(line: &str) -> Option<(&str, &str)> {
    let (k, v) = line.split_once('=')?;
    Some((k.trim(), v.trim()))
}

/// Parses configuration text, then applies `overrides` in order.
pub fn parse_config(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = split_assignment(line).ok_or_else(|| Error::Parse {
            line: line_no,
            msg: format!("expected 'key = value', got '{line}'"),
        })?;
        cfg.set(key, value)
            .map_err(|msg| Error::Parse { line: line_no, msg })?;
    }
    for (key, value) in overrides {
        cfg.set(key, value).map_err(|msg| Error::Parse {
            line: 0,
            msg: format!("command-line override {key}={value}: {msg}"),
        })?;
    }
    cfg.finish();
    Ok(cfg)
}

/// Reads and parses a configuration file; `None` yields all defaults plus overrides.
pub fn load_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)?,
        None => String::new(),
    };
    parse_config(&text, overrides)
}
