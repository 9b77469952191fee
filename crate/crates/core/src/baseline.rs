//! Proportional-navigation guidance as a fixed, every-step-broadcast baseline.

use crate::atppo::{run_episodes, EvalReport};
use crate::envs::{Environment, PursuitConfig, PursuitEnv};
use crate::error::Result;
use crate::rollout::TriggerMode;

/// `N * closing speed * LOS rate` from the pursuit observation `[r, r_dot, eta, eta_dot, psi_P]`,
/// clamped to `±a_max`.
pub fn png_from_observation(obs: &[f64], nav_constant: f64, a_max: f64) -> f64 {
    let a = nav_constant * (-obs[1]) * obs[3];
    a.clamp(-a_max, a_max)
}

/// Flies `episodes` pursuit episodes under PNG with a broadcast at every step.
pub fn png_baseline(
    config: &PursuitConfig<f64>,
    accrual_scale: f64,
    episodes: usize,
    seed: u64,
    window: usize,
) -> Result<EvalReport> {
    let env = PursuitEnv::new(config.clone())?;
    let dt = env.dt();
    let (n, a_max) = (config.nav_constant, config.params.a_p_max);
    let episodes = run_episodes(
        Box::new(env),
        accrual_scale,
        TriggerMode::Always,
        episodes,
        seed,
        window,
        |runner| {
            let a = png_from_observation(runner.state(), n, a_max);
            runner.step_with_control(vec![a], true)
        },
    )?;
    Ok(EvalReport {
        env: crate::envs::EnvKind::Pursuit,
        label: "png".to_string(),
        dt,
        episodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_env_guidance_law() {
        let mut env = PursuitEnv::new(PursuitConfig::<f64>::default()).unwrap();
        env.reset(1);
        for _ in 0..50 {
            env.step(&[1.0]).unwrap();
        }
        let a = png_from_observation(&env.state(), 3.0, 5.0);
        assert!((a - env.png_command().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn nominal_png_captures() {
        let report = png_baseline(&PursuitConfig::default(), 100.0, 1, 0, 50).unwrap();
        let ep = &report.episodes[0];
        assert!(ep.captured);
        assert!((ep.steps as f64) * report.dt < 60.0);
        assert_eq!(report.comm_fraction(), 1.0);
    }
}
