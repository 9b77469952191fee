use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::learner::{Learner, UpdateStats};
use super::policy::{ActMode, Policy};
use super::Algorithm;
use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::envs::{EnvKind, Environment};
use crate::error::Result;
use crate::etc::{inter_event_stats, InterEventStats};
use crate::nn::Network;
use crate::report::{MetricLog, MetricRow};
use crate::rollout::{collect_rollout, EpisodeRunner, EpisodeSummary, RolloutBatch, TriggerMode};

const RETURN_WINDOW: usize = 10;
// validation episodes are drawn far away from any evaluation seed
const VALIDATION_SEED: u64 = 0x5EED_0000_0000;

fn trigger_mode(algorithm: Algorithm) -> TriggerMode {
    match algorithm {
        Algorithm::Atppo => TriggerMode::Learned,
        Algorithm::Ppo => TriggerMode::Always,
    }
}

/// Alternates rollout collection, advantage estimation and policy updates.
pub struct Trainer {
    pub config: RunConfig,
    learner: Learner<f64>,
    runner: EpisodeRunner<f64>,
    rng: ChaCha8Rng,
    steps_done: usize,
    recent_returns: Vec<f64>,
    log: MetricLog,
    dt: f64,
    cycles: usize,
    best: Option<(f64, Checkpoint)>,
}

impl Trainer {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let env = config.build_env()?;
        let (state_dim, control_dim) = env.dims();
        let dt = env.dt();
        let obs_dim = state_dim + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(config.hyper.seed);
        let mut policy = Policy::new(obs_dim, control_dim, &config.hidden, rng.gen())?;
        let last = policy.net.num_layers() - 1;
        policy.net.biases_mut(last)[control_dim] = config.trigger_bias_init;
        policy.log_std_param.fill(config.log_std_init);
        let mut value_dims = vec![obs_dim];
        value_dims.extend_from_slice(&config.hidden);
        value_dims.push(1);
        let value = Network::new(&value_dims, rng.gen())?;
        let mut hyper = config.hyper.clone();
        hyper.trigger_penalty = config.effective_trigger_penalty();
        let learner = Learner::new(policy, value, hyper)?;
        let mut runner = EpisodeRunner::new(
            env,
            config.hyper.accrual_scale,
            config.effective_trigger_penalty(),
            trigger_mode(config.algorithm),
        );
        runner.reset(rng.gen());
        Ok(Self {
            config,
            learner,
            runner,
            rng,
            steps_done: 0,
            recent_returns: Vec::new(),
            log: MetricLog::default(),
            dt,
            cycles: 0,
            best: None,
        })
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    pub fn finished(&self) -> bool {
        self.steps_done >= self.config.hyper.total_steps
    }

    pub fn learner(&self) -> &Learner<f64> {
        &self.learner
    }

    pub fn log(&self) -> &MetricLog {
        &self.log
    }

    /// One collect / advantage / update cycle. The last cycle is shortened so
    /// that exactly `total_steps` environment steps are consumed.
    pub fn run_cycle(&mut self) -> Result<MetricRow> {
        let h = &self.config.hyper;
        let remaining = h.total_steps.saturating_sub(self.steps_done).max(1);
        let horizon = h.horizon.min(remaining);
        let (gamma, lam) = (h.gamma, h.lam);
        let mut batch = collect_rollout(
            &self.learner.policy,
            &self.learner.value,
            &mut self.runner,
            horizon,
            &mut self.rng,
        )?;
        batch.compute_scaled_advantages(gamma, lam, h.value_scale)?;
        let stats = self.learner.ppo_update(&batch, &mut self.rng)?;
        self.steps_done += batch.len();
        self.cycles += 1;
        let row = self.metric_row(&batch, &stats);
        self.log.rows.push(row.clone());
        let every = self.config.select_every;
        if every > 0 && (self.cycles.is_multiple_of(every) || self.finished()) {
            self.validate()?;
        }
        Ok(row)
    }

    /// Scores the deterministic policy by its mean penalized return on a few
    /// held-out episodes and remembers it if it beats the best so far.
    fn validate(&mut self) -> Result<f64> {
        let ckpt = self.checkpoint();
        let report = evaluate(
            &ckpt,
            self.config.build_env()?,
            self.config.select_episodes,
            VALIDATION_SEED + self.config.hyper.seed,
            self.config.window,
        )?;
        let psi = self.config.effective_trigger_penalty();
        let score = report
            .episodes
            .iter()
            .map(|e| e.raw_return - psi * e.event_times.len() as f64)
            .sum::<f64>()
            / report.episodes.len() as f64;
        self.steps_done += report.episodes.iter().map(|e| e.steps).sum::<usize>();
        if self.best.as_ref().is_none_or(|(b, _)| score > *b) {
            self.best = Some((score, ckpt));
        }
        Ok(score)
    }

    /// Score of the kept parameters, if selection is enabled.
    pub fn best_score(&self) -> Option<f64> {
        self.best.as_ref().map(|(s, _)| *s)
    }

    /// The best validated checkpoint, or the current parameters when
    /// selection is off.
    pub fn selected_checkpoint(&self) -> Checkpoint {
        match &self.best {
            Some((_, c)) => c.clone(),
            None => self.checkpoint(),
        }
    }

    fn metric_row(&mut self, batch: &RolloutBatch<f64>, stats: &UpdateStats<f64>) -> MetricRow {
        for ep in &batch.completed {
            self.recent_returns.push(ep.raw_return);
        }
        let keep = self.recent_returns.len().saturating_sub(RETURN_WINDOW);
        self.recent_returns.drain(..keep);
        let mean_raw_return = if batch.completed.is_empty() {
            mean(&self.recent_returns)
        } else {
            mean(&batch.completed.iter().map(|e| e.raw_return).collect::<Vec<_>>())
        };
        let triggers = batch.trigger_count();
        let mut deltas = Vec::new();
        let mut last_event: Option<f64> = None;
        for tr in &batch.transitions {
            if tr.info.time == 0.0 {
                last_event = None;
            }
            if tr.trigger {
                if let Some(prev) = last_event {
                    deltas.push(tr.info.time - prev);
                }
                last_event = Some(tr.info.time);
            }
        }
        MetricRow {
            step: (self.steps_done) as u64,
            mean_raw_return,
            comm_fraction: triggers as f64 / batch.len() as f64,
            mean_inter_event: if deltas.is_empty() { self.dt * batch.len() as f64 } else { mean(&deltas) },
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            clip_fraction: stats.clip_fraction,
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_networks(
            self.config.env,
            self.config.algorithm,
            &self.learner.policy,
            &self.learner.value,
            &self.config.hyper,
            self.steps_done as u64,
        )
    }

    pub fn run(mut self) -> Result<(Checkpoint, MetricLog)> {
        while !self.finished() {
            self.run_cycle()?;
        }
        Ok((self.selected_checkpoint(), self.log))
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Trains until `total_steps` environment steps are consumed.
pub fn train(config: &RunConfig) -> Result<(Checkpoint, MetricLog)> {
    Trainer::new(config.clone())?.run()
}

/// One row of an evaluation trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub state: Vec<f64>,
    pub applied_control: Vec<f64>,
    pub triggered: bool,
    /// `0.5 * |state|^2`.
    pub lyapunov: f64,
    /// Time since the previous event before this row (0 at `t = 0`).
    pub inter_event: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeReport {
    pub raw_return: f64,
    pub steps: usize,
    pub event_times: Vec<f64>,
    pub stats: InterEventStats<f64>,
    pub comm_fraction: f64,
    pub terminal_state: Vec<f64>,
    pub captured: bool,
    pub lyapunov: Vec<f64>,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub env: EnvKind,
    /// Controller name: `atppo`, `ppo` or `png`.
    pub label: String,
    pub dt: f64,
    pub episodes: Vec<EpisodeReport>,
}

impl EvalReport {
    pub fn mean_return(&self) -> f64 {
        mean(&self.episodes.iter().map(|e| e.raw_return).collect::<Vec<_>>())
    }

    /// Total events over total steps across all episodes.
    pub fn comm_fraction(&self) -> f64 {
        let events: usize = self.episodes.iter().map(|e| e.event_times.len()).sum();
        let steps: usize = self.episodes.iter().map(|e| e.steps).sum();
        if steps == 0 {
            f64::NAN
        } else {
            events as f64 / steps as f64
        }
    }

    pub fn min_inter_event(&self) -> f64 {
        self.episodes
            .iter()
            .map(|e| e.stats.min_delta)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn capture_rate(&self) -> f64 {
        if self.episodes.is_empty() {
            return f64::NAN;
        }
        self.episodes.iter().filter(|e| e.captured).count() as f64 / self.episodes.len() as f64
    }
}

fn lyapunov(state: &[f64]) -> f64 {
    0.5 * state.iter().map(|x| x * x).sum::<f64>()
}

pub(crate) fn episode_seeds(seed: u64, episodes: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..episodes).map(|_| rng.gen()).collect()
}

fn finish_episode(
    runner: &EpisodeRunner<f64>,
    summary: EpisodeSummary<f64>,
    trace: Vec<TraceRow>,
    window: usize,
) -> EpisodeReport {
    let dt = runner.env().dt();
    let stats = inter_event_stats(&summary.event_times, summary.steps, dt, window);
    let mut lyap: Vec<f64> = trace.iter().map(|r| r.lyapunov).collect();
    lyap.push(lyapunov(runner.state()));
    EpisodeReport {
        raw_return: summary.raw_return,
        steps: summary.steps,
        comm_fraction: stats.comm_fraction,
        event_times: summary.event_times,
        stats,
        terminal_state: runner.state().to_vec(),
        captured: summary.captured,
        lyapunov: lyap,
        trace,
    }
}

/// Runs the same deterministic episode loop for any per-step controller.
pub fn run_episodes<F>(
    env: Box<dyn Environment<f64>>,
    accrual_scale: f64,
    mode: TriggerMode,
    episodes: usize,
    seed: u64,
    window: usize,
    mut step: F,
) -> Result<Vec<EpisodeReport>>
where
    F: FnMut(&mut EpisodeRunner<f64>) -> Result<crate::rollout::Transition<f64>>,
{
    let mut runner = EpisodeRunner::new(env, accrual_scale, 0.0, mode);
    let mut reports = Vec::with_capacity(episodes);
    for ep_seed in episode_seeds(seed, episodes) {
        runner.reset(ep_seed);
        let mut trace = Vec::new();
        let mut last_event = 0.0;
        loop {
            let state = runner.state().to_vec();
            let tr = step(&mut runner)?;
            let inter_event = tr.info.time - last_event;
            if tr.trigger {
                last_event = tr.info.time;
            }
            trace.push(TraceRow {
                t: tr.info.time,
                lyapunov: lyapunov(&state),
                state,
                applied_control: tr.info.applied_control.clone(),
                triggered: tr.trigger,
                inter_event,
            });
            if tr.done {
                break;
            }
        }
        let summary = runner.summary();
        reports.push(finish_episode(&runner, summary, trace, window));
    }
    Ok(reports)
}

/// Deterministic-mode rollouts of a trained checkpoint: mean control, and a
/// broadcast whenever the trigger logit is non-negative (every step for PPO).
pub fn evaluate(
    checkpoint: &Checkpoint,
    env: Box<dyn Environment<f64>>,
    episodes: usize,
    seed: u64,
    window: usize,
) -> Result<EvalReport> {
    checkpoint.check_env(env.as_ref())?;
    let policy = checkpoint.policy()?;
    let dt = env.dt();
    let kind = env.kind();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let episodes = run_episodes(
        env,
        checkpoint.hyper.accrual_scale,
        trigger_mode(checkpoint.algorithm),
        episodes,
        seed,
        window,
        |runner| runner.step(&policy, None, ActMode::Deterministic, &mut rng),
    )?;
    Ok(EvalReport {
        env: kind,
        label: checkpoint.algorithm.as_str().to_string(),
        dt,
        episodes,
    })
}
