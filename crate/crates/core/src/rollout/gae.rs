use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Generalized advantage estimation over one contiguous batch.
///
/// `dones[t]` marks a terminal transition: nothing after it bootstraps into
/// step `t`. `bootstrap_value` is `V` of the state following the last
/// transition and is ignored when that transition is terminal.
/// Returns `(advantages, returns)` with `returns = advantages + values`.
pub fn compute_gae<T: Scalar>(
    rewards: &[T],
    values: &[T],
    dones: &[bool],
    bootstrap_value: T,
    gamma: T,
    lambda: T,
) -> Result<(Vec<T>, Vec<T>)> {
    if !(gamma >= T::zero() && gamma < T::one()) {
        return Err(Error::Config(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return Err(Error::Config(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(Error::Shape(format!(
            "gae: {n} rewards, {} values, {} dones",
            values.len(),
            dones.len()
        )));
    }
    let mut advantages = vec![T::zero(); n];
    let mut next_adv = T::zero();
    let mut next_value = bootstrap_value;
    for t in (0..n).rev() {
        let live = if dones[t] { T::zero() } else { T::one() };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        advantages[t] = next_adv;
        next_value = values[t];
    }
    let returns = advantages.iter().zip(values).map(|(&a, &v)| a + v).collect();
    Ok((advantages, returns))
}

/// Shifts and scales to zero mean and unit standard deviation (population std, `1e-8` stabilizer).
/// Slices shorter than two elements are returned unchanged.
pub fn normalize_advantages<T: Scalar>(advantages: &[T]) -> Vec<T> {
    if advantages.len() < 2 {
        return advantages.to_vec();
    }
    let n = T::from_usize(advantages.len()).unwrap();
    let mean = advantages.iter().copied().sum::<T>() / n;
    let var = advantages.iter().map(|&a| (a - mean) * (a - mean)).sum::<T>() / n;
    let denom = var.sqrt() + T::lit(1e-8);
    advantages.iter().map(|&a| (a - mean) / denom).collect()
}
