//! Small dense networks with hand-written backpropagation, Adam, and the
//! distribution heads used by the policy.

mod adam;
pub mod dist;
mod network;

pub use adam::AdamState;
pub use dist::{
    bernoulli_entropy, bernoulli_logprob, entropy, gaussian_entropy, gaussian_logprob,
    gaussian_sample, sigmoid, BernoulliHead, GaussianHead,
};
pub use network::{ForwardCache, Network};

/// Scales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<T: crate::Scalar>(grads: &mut [&mut [T]], max_norm: T) -> T {
    let norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|&g| g * g)
        .sum::<T>()
        .sqrt();
    if norm > max_norm && norm > T::zero() {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            g.iter_mut().for_each(|v| *v *= scale);
        }
    }
    norm
}
