//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use etrl::atppo::{AtppoHyper, Policy};
use etrl::envs::{rk4_step, EngagementParams, EngagementState, Vehicle};
use etrl::nn::dist::gaussian_logprob_grad;
use etrl::nn::{clip_grad_norm, gaussian_logprob, AdamState, Network};
use etrl::rollout::{normalize_advantages, RolloutBatch};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

// Brute-force lambda-return: A_t = G^lambda_t - V_t, with the n-step returns
// truncated at the first terminal or at the end of the batch.
pub fn lambda_return_oracle(r: &[f64], v: &[f64], done: &[bool], boot: f64, g: f64, l: f64) -> Vec<f64> {
    let n = r.len();
    (0..n)
        .map(|t| {
            let mut horizon = n - t;
            for k in 0..n - t {
                if done[t + k] {
                    horizon = k + 1;
                    break;
                }
            }
            let terminal = done[t + horizon - 1];
            let nstep = |m: usize| -> f64 {
                let mut ret = 0.0;
                for k in 0..m {
                    ret += g.powi(k as i32) * r[t + k];
                }
                let tail = if m < horizon {
                    v[t + m]
                } else if terminal {
                    0.0
                } else {
                    boot
                };
                ret + g.powi(m as i32) * tail
            };
            let mut total = 0.0;
            for m in 1..horizon {
                total += (1.0 - l) * l.powi(m as i32 - 1) * nstep(m);
            }
            total += l.powi(horizon as i32 - 1) * nstep(horizon);
            total - v[t]
        })
        .collect()
}

// Textbook clipped-surrogate PPO with a Gaussian policy and no trigger head,
// written independently of the learner.
pub fn vanilla_ppo_update(
    policy: &mut Policy<f64>,
    value: &mut Network<f64>,
    h: &AtppoHyper<f64>,
    batch: &RolloutBatch<f64>,
    rng: &mut ChaCha8Rng,
) {
    let d = policy.control_dim();
    let mut adam_pi = AdamState::new(policy.net.num_params(), h.learning_rate);
    let mut adam_ls = AdamState::new(d, h.learning_rate);
    let mut adam_v = AdamState::new(value.num_params(), h.learning_rate);
    let adv = normalize_advantages(&batch.advantages);
    let mut idx: Vec<usize> = (0..batch.len()).collect();
    for _ in 0..h.epochs_per_batch {
        idx.shuffle(rng);
        for chunk in idx.chunks(h.minibatch_size) {
            let w = 1.0 / chunk.len() as f64;
            let mut g_pi = policy.net.zeros_like();
            let mut g_ls = vec![0.0; d];
            let mut g_v = value.zeros_like();
            for &i in chunk {
                let tr = &batch.transitions[i];
                let (out, cache) = policy.net.forward(&tr.obs).unwrap();
                let log_std = policy.log_std();
                let lp = gaussian_logprob(&out[..d], &log_std, &tr.control);
                let ratio = (lp - tr.logprob).exp();
                let a = adv[i];
                let clipped = ratio.clamp(1.0 - h.clip_eps, 1.0 + h.clip_eps);
                let dsurr = if ratio * a <= clipped * a { a } else { 0.0 };
                let dlp = -w * dsurr * ratio;
                let mut dm = vec![0.0; d];
                let mut dls = vec![0.0; d];
                gaussian_logprob_grad(&out[..d], &log_std, &tr.control, &mut dm, &mut dls);
                let mut grad_out = vec![0.0; d + 1];
                for k in 0..d {
                    grad_out[k] = dlp * dm[k];
                    g_ls[k] += dlp * dls[k];
                }
                policy.net.accumulate_backward(&cache, &grad_out, &mut g_pi).unwrap();
                let (v, vc) = value.forward(&tr.obs).unwrap();
                let err = v[0] - batch.returns[i];
                value.accumulate_backward(&vc, &[2.0 * h.value_coef * err * w], &mut g_v).unwrap();
            }
            clip_grad_norm(&mut [&mut g_pi[..], &mut g_ls[..]], h.max_grad_norm);
            clip_grad_norm(&mut [&mut g_v[..]], h.max_grad_norm);
            adam_pi.step(policy.net.params_mut(), &g_pi).unwrap();
            adam_ls.step(&mut policy.log_std_param, &g_ls).unwrap();
            adam_v.step(value.params_mut(), &g_v).unwrap();
        }
    }
}

pub fn lagged_turn(dt: f64, t_end: f64) -> EngagementState<f64> {
    let params = EngagementParams::default();
    let mut s = EngagementState {
        pursuer: Vehicle::new(0.0, 0.0, 0.3, 40.0),
        target: Vehicle::new(500.0, 200.0, 2.0, 20.0),
        t: 0.0,
    };
    let steps = (t_end / dt).round() as usize;
    for _ in 0..steps {
        s = rk4_step(&s, &params, 4.0, -3.0, dt).unwrap();
    }
    s
}
