//! Event-triggered execution: zero-order hold of the control, last-broadcast
//! state, and the log of triggering instants.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Runtime state of the zero-order-hold actuator between triggering instants.
#[derive(Debug, Clone, PartialEq)]
pub struct EtcState<T> {
    /// Control currently held by the actuator, `u(t_k)`.
    pub held_control: Vec<T>,
    /// Plant state sent at the most recent event, `x(t_k)`.
    pub last_broadcast_state: Vec<T>,
    pub last_event_time: T,
    /// Strictly increasing; starts with `t_0 = 0`.
    pub event_times: Vec<T>,
    /// Number of calls to [`EtcState::apply`] since reset.
    pub step_index: usize,
    last_query_time: T,
}

impl<T: Scalar> EtcState<T> {
    /// Starts scheduling at `t = 0`, which always counts as the first event.
    pub fn reset(initial_state: &[T], initial_control: &[T]) -> Self {
        Self {
            held_control: initial_control.to_vec(),
            last_broadcast_state: initial_state.to_vec(),
            last_event_time: T::zero(),
            event_times: vec![T::zero()],
            step_index: 0,
            last_query_time: T::zero(),
        }
    }

    /// Returns the control the actuator applies at time `t`.
    ///
    /// On a trigger the proposed control is latched and `plant_state` is broadcast;
    /// otherwise the held control is returned unchanged.
    pub fn apply(
        &mut self,
        t: T,
        plant_state: &[T],
        trigger: bool,
        proposed_control: &[T],
    ) -> Result<Vec<T>> {
        if !(t > self.last_query_time) {
            return Err(Error::Sequencing(format!(
                "event runtime queried at t={t} after t={}",
                self.last_query_time
            )));
        }
        if proposed_control.len() != self.held_control.len() {
            return Err(Error::Shape(format!(
                "proposed control has length {}, held control {}",
                proposed_control.len(),
                self.held_control.len()
            )));
        }
        self.last_query_time = t;
        self.step_index += 1;
        if trigger {
            self.held_control.copy_from_slice(proposed_control);
            self.last_broadcast_state.clear();
            self.last_broadcast_state.extend_from_slice(plant_state);
            self.last_event_time = t;
            self.event_times.push(t);
        }
        Ok(self.held_control.clone())
    }

    pub fn num_events(&self) -> usize {
        self.event_times.len()
    }

    pub fn stats(&self, total_steps: usize, dt: T, window: usize) -> InterEventStats<T> {
        inter_event_stats(&self.event_times, total_steps, dt, window)
    }
}

/// Summary of the triggering pattern over one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct InterEventStats<T> {
    pub min_delta: T,
    pub mean_delta: T,
    pub deltas: Vec<T>,
    pub comm_fraction: T,
    /// Trailing moving average of the per-step trigger indicator.
    pub moving_average: Vec<T>,
}

/// Per-step 0/1 trigger indicator reconstructed from event times on a `dt` grid.
pub fn trigger_indicator<T: Scalar>(event_times: &[T], total_steps: usize, dt: T) -> Vec<bool> {
    let mut flags = vec![false; total_steps];
    for &t in event_times {
        let k = (t / dt).round().to_usize().unwrap_or(usize::MAX);
        if k < total_steps {
            flags[k] = true;
        }
    }
    flags
}

/// Inter-event times, communication fraction and a windowed trigger rate.
///
/// With fewer than two events the delta list is empty and `min_delta`/`mean_delta`
/// report the episode length `total_steps * dt`.
pub fn inter_event_stats<T: Scalar>(
    event_times: &[T],
    total_steps: usize,
    dt: T,
    window: usize,
) -> InterEventStats<T> {
    let deltas: Vec<T> = event_times.windows(2).map(|w| w[1] - w[0]).collect();
    let episode_len = dt * T::from_usize(total_steps).unwrap();
    let (min_delta, mean_delta) = if deltas.is_empty() {
        (episode_len, episode_len)
    } else {
        let min = deltas.iter().copied().fold(T::infinity(), T::min);
        let mean = deltas.iter().copied().sum::<T>() / T::from_usize(deltas.len()).unwrap();
        (min, mean)
    };
    let comm_fraction = if total_steps == 0 {
        T::zero()
    } else {
        T::from_usize(event_times.len()).unwrap() / T::from_usize(total_steps).unwrap()
    };
    let flags = trigger_indicator(event_times, total_steps, dt);
    let window = window.max(1);
    let mut moving_average = Vec::with_capacity(total_steps);
    let mut running = 0usize;
    for k in 0..total_steps {
        running += flags[k] as usize;
        if k >= window {
            running -= flags[k - window] as usize;
        }
        let n = (k + 1).min(window);
        moving_average.push(T::from_usize(running).unwrap() / T::from_usize(n).unwrap());
    }
    InterEventStats {
        min_delta,
        mean_delta,
        deltas,
        comm_fraction,
        moving_average,
    }
}
