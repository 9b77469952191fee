//! Binary checkpoints: magic `ETRL`, a version byte, then little-endian fields.
//!
//! ```text
//! "ETRL" u8:version u8:env u8:algorithm
//! u32:n dims(u32 x n)            policy layer dims
//! u32:n dims(u32 x n)            value layer dims
//! u64:n f64 x n                  policy log-std parameters
//! u64:n f64 x n                  policy network parameters
//! u64:n f64 x n                  value network parameters
//! hyperparameters (see `write_hyper`)
//! u64                            env steps trained
//! ```

use std::path::Path;

use crate::atppo::{Algorithm, AtppoHyper, Policy};
use crate::envs::{EnvKind, Environment};
use crate::error::{Error, Result};
use crate::nn::Network;

pub const MAGIC: &[u8; 4] = b"ETRL";
pub const FORMAT_VERSION: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub env: EnvKind,
    pub algorithm: Algorithm,
    pub policy_dims: Vec<usize>,
    pub value_dims: Vec<usize>,
    pub log_std: Vec<f64>,
    pub policy_params: Vec<f64>,
    pub value_params: Vec<f64>,
    pub hyper: AtppoHyper<f64>,
    pub total_steps: u64,
}

impl Checkpoint {
    pub fn from_networks(
        env: EnvKind,
        algorithm: Algorithm,
        policy: &Policy<f64>,
        value: &Network<f64>,
        hyper: &AtppoHyper<f64>,
        total_steps: u64,
    ) -> Self {
        Self {
            env,
            algorithm,
            policy_dims: policy.net.layer_dims().to_vec(),
            value_dims: value.layer_dims().to_vec(),
            log_std: policy.log_std_param.clone(),
            policy_params: policy.net.params().to_vec(),
            value_params: value.params().to_vec(),
            hyper: hyper.clone(),
            total_steps,
        }
    }

    pub fn policy(&self) -> Result<Policy<f64>> {
        let net = Network::from_params(&self.policy_dims, self.policy_params.clone())?;
        Policy::from_parts(net, self.log_std.clone())
    }

    pub fn value(&self) -> Result<Network<f64>> {
        Network::from_params(&self.value_dims, self.value_params.clone())
    }

    /// Errors unless the networks fit `env`'s augmented observation and control sizes.
    pub fn check_env(&self, env: &dyn Environment<f64>) -> Result<()> {
        if env.kind() != self.env {
            return Err(Error::Dimension(format!(
                "checkpoint was trained on '{}' but '{}' was requested",
                self.env,
                env.kind()
            )));
        }
        let (state_dim, control_dim) = env.dims();
        let ok = self.policy_dims.first() == Some(&(state_dim + 1))
            && self.policy_dims.last() == Some(&(control_dim + 1))
            && self.value_dims.first() == Some(&(state_dim + 1))
            && self.log_std.len() == control_dim;
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "checkpoint networks {:?}/{:?} do not fit state dim {state_dim}, control dim {control_dim}",
                self.policy_dims, self.value_dims
            )))
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        out.push(env_code(self.env));
        out.push(algorithm_code(self.algorithm));
        write_dims(&mut out, &self.policy_dims);
        write_dims(&mut out, &self.value_dims);
        write_f64s(&mut out, &self.log_std);
        write_f64s(&mut out, &self.policy_params);
        write_f64s(&mut out, &self.value_params);
        write_hyper(&mut out, &self.hyper);
        out.extend_from_slice(&self.total_steps.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic bytes, not an ETRL checkpoint".into()));
        }
        let version = r.u8()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "checkpoint format version {version}, this build reads {FORMAT_VERSION}"
            )));
        }
        let env = match r.u8()? {
            0 => EnvKind::Integrator,
            1 => EnvKind::Pursuit,
            c => return Err(Error::Format(format!("unknown environment code {c}"))),
        };
        let algorithm = match r.u8()? {
            0 => Algorithm::Atppo,
            1 => Algorithm::Ppo,
            c => return Err(Error::Format(format!("unknown algorithm code {c}"))),
        };
        let policy_dims = r.dims()?;
        let value_dims = r.dims()?;
        let log_std = r.f64s()?;
        let policy_params = r.f64s()?;
        let value_params = r.f64s()?;
        let hyper = r.hyper()?;
        let total_steps = r.u64()?;
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after checkpoint",
                bytes.len() - r.pos
            )));
        }
        Ok(Self {
            env,
            algorithm,
            policy_dims,
            value_dims,
            log_std,
            policy_params,
            value_params,
            hyper,
            total_steps,
        })
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, ckpt.to_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}

fn env_code(env: EnvKind) -> u8 {
    match env {
        EnvKind::Integrator => 0,
        EnvKind::Pursuit => 1,
    }
}

fn algorithm_code(a: Algorithm) -> u8 {
    match a {
        Algorithm::Atppo => 0,
        Algorithm::Ppo => 1,
    }
}

fn write_dims(out: &mut Vec<u8>, dims: &[usize]) {
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
}

fn write_f64s(out: &mut Vec<u8>, values: &[f64]) {
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn write_hyper(out: &mut Vec<u8>, h: &AtppoHyper<f64>) {
    for v in [h.clip_eps, h.trigger_penalty, h.gamma, h.lam, h.accrual_scale] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in [h.epochs_per_batch as u64, h.minibatch_size as u64] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in [h.value_coef, h.entropy_coef, h.trigger_entropy_coef, h.value_scale] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in [h.horizon as u64, h.total_steps as u64] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in [h.learning_rate, h.max_grad_norm] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(h.normalize_advantages as u8);
    out.extend_from_slice(&h.seed.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Format(format!(
                "truncated checkpoint: needed {n} bytes at offset {}",
                self.pos
            ))),
        }
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn dims(&mut self) -> Result<Vec<usize>> {
        let n = self.u32()? as usize;
        (0..n).map(|_| self.u32().map(|d| d as usize)).collect()
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        if n > (self.bytes.len() - self.pos) / 8 {
            return Err(Error::Format(format!("truncated checkpoint: {n} values announced")));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    fn hyper(&mut self) -> Result<AtppoHyper<f64>> {
        Ok(AtppoHyper {
            clip_eps: self.f64()?,
            trigger_penalty: self.f64()?,
            gamma: self.f64()?,
            lam: self.f64()?,
            accrual_scale: self.f64()?,
            epochs_per_batch: self.u64()? as usize,
            minibatch_size: self.u64()? as usize,
            value_coef: self.f64()?,
            entropy_coef: self.f64()?,
            trigger_entropy_coef: self.f64()?,
            value_scale: self.f64()?,
            horizon: self.u64()? as usize,
            total_steps: self.u64()? as usize,
            learning_rate: self.f64()?,
            max_grad_norm: self.f64()?,
            normalize_advantages: self.u8()? != 0,
            seed: self.u64()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{IntegratorConfig, IntegratorEnv, PursuitConfig, PursuitEnv};

    fn sample() -> Checkpoint {
        let policy = Policy::<f64>::new(2, 1, &[8, 8], 3).unwrap();
        let value = Network::<f64>::new(&[2, 8, 8, 1], 4).unwrap();
        Checkpoint::from_networks(
            EnvKind::Integrator,
            Algorithm::Atppo,
            &policy,
            &value,
            &AtppoHyper::default(),
            4096,
        )
    }

    #[test]
    fn round_trip_bit_exact() {
        let c = sample();
        let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), c.to_bytes());
    }

    #[test]
    fn corrupt_magic_and_truncation() {
        let mut bytes = sample().to_bytes();
        let full = bytes.clone();
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Format(_))));
        assert!(matches!(
            Checkpoint::from_bytes(&full[..full.len() - 3]),
            Err(Error::Format(_))
        ));
        let mut versioned = full.clone();
        versioned[4] = 9;
        assert!(matches!(Checkpoint::from_bytes(&versioned), Err(Error::Format(_))));
        let mut extra = full;
        extra.push(0);
        assert!(matches!(Checkpoint::from_bytes(&extra), Err(Error::Format(_))));
    }

    #[test]
    fn env_mismatch_is_dimension_error() {
        let c = sample();
        let integ = IntegratorEnv::<f64>::new(IntegratorConfig::default()).unwrap();
        assert!(c.check_env(&integ).is_ok());
        let pursuit = PursuitEnv::<f64>::new(PursuitConfig::default()).unwrap();
        assert!(matches!(c.check_env(&pursuit), Err(Error::Dimension(_))));
    }
}
