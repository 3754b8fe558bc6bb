//! Agent checkpoints.
//!
//! ```text
//! magic    b"VRAG"
//! version  u32
//! scalars  f64 * 4   (learning_rate, target_rate, discount, clip_norm)
//! nhidden  u32, hidden u32 * nhidden
//! frozen   u8 * 3    (mu, value, curvature)
//! nets     mu, value, curvature, target value (network checkpoints)
//! ```
//!
//! Optimizer moments are not stored; a loaded agent restarts Adam.

use std::io::{Read, Write};

use super::{FrozenHeads, NafAgent, NafConfig};
use crate::error::{Error, Result};
use crate::nn::checkpoint::{
    read_f64, read_magic, read_mlp_with_dims, read_u32, read_u8, write_f64, write_mlp, write_u32, write_u8,
};
use crate::nn::layer_dims;

pub const AGENT_MAGIC: [u8; 4] = *b"VRAG";
pub const AGENT_VERSION: u32 = 1;

impl NafAgent {
    pub fn write_checkpoint<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&AGENT_MAGIC)?;
        write_u32(w, AGENT_VERSION)?;
        let c = &self.config;
        for v in [c.learning_rate, c.target_rate, c.discount, c.clip_norm] {
            write_f64(w, v)?;
        }
        write_u32(w, c.hidden.len() as u32)?;
        for &h in &c.hidden {
            write_u32(w, h as u32)?;
        }
        for flag in [self.frozen.mu, self.frozen.value, self.frozen.curvature] {
            write_u8(w, flag as u8)?;
        }
        write_mlp(w, &self.mu_net)?;
        write_mlp(w, &self.value_net)?;
        write_mlp(w, &self.curvature_net)?;
        write_mlp(w, &self.target_value)?;
        Ok(())
    }

    /// Reads an agent. When `observation_dim` is given the stored networks
    /// must match it.
    pub fn read_checkpoint<R: Read>(r: &mut R, observation_dim: Option<usize>) -> Result<Self> {
        read_magic(r, AGENT_MAGIC)?;
        let version = read_u32(r)?;
        if version != AGENT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported agent version {version}")));
        }
        let learning_rate = read_f64(r)?;
        let target_rate = read_f64(r)?;
        let discount = read_f64(r)?;
        let clip_norm = read_f64(r)?;
        let nhidden = read_u32(r)? as usize;
        if nhidden > 64 {
            return Err(Error::Checkpoint(format!("implausible hidden layer count {nhidden}")));
        }
        let hidden = (0..nhidden)
            .map(|_| read_u32(r).map(|h| h as usize))
            .collect::<Result<Vec<_>>>()?;
        let mut flags = [false; 3];
        for f in &mut flags {
            *f = match read_u8(r)? {
                0 => false,
                1 => true,
                other => return Err(Error::Checkpoint(format!("bad frozen flag {other}"))),
            };
        }
        let mu_net = crate::nn::checkpoint::read_mlp(r)?;
        let obs_dim = mu_net.input_dim();
        if let Some(expected) = observation_dim {
            if expected != obs_dim {
                return Err(Error::Checkpoint(format!(
                    "checkpoint observation dim {obs_dim}, expected {expected}"
                )));
            }
        }
        let dims = layer_dims(obs_dim, &hidden, 1);
        if mu_net.dims() != dims {
            return Err(Error::Checkpoint(format!(
                "policy net dims {:?} disagree with header {dims:?}",
                mu_net.dims()
            )));
        }
        let value_net = read_mlp_with_dims(r, &dims)?;
        let curvature_net = read_mlp_with_dims(r, &dims)?;
        let target = read_mlp_with_dims(r, &dims)?;
        let config = NafConfig {
            hidden,
            learning_rate,
            target_rate,
            discount,
            clip_norm,
        };
        let mut agent = NafAgent::from_nets(mu_net, value_net, curvature_net, config)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        agent.set_target_value(target);
        agent.set_frozen(FrozenHeads {
            mu: flags[0],
            value: flags[1],
            curvature: flags[2],
        });
        Ok(agent)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_checkpoint(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path, observation_dim: Option<usize>) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_checkpoint(&mut r, observation_dim)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn round_trip_keeps_params_and_flags() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = NafConfig {
            hidden: vec![8, 4],
            ..NafConfig::default()
        };
        let mut agent = NafAgent::new(5, cfg, &mut rng).unwrap();
        agent.set_frozen(FrozenHeads {
            mu: false,
            value: true,
            curvature: true,
        });
        let mut buf = Vec::new();
        agent.write_checkpoint(&mut buf).unwrap();
        let back = NafAgent::read_checkpoint(&mut buf.as_slice(), Some(5)).unwrap();
        assert_eq!(back.frozen(), agent.frozen());
        assert_eq!(back.mu_net(), agent.mu_net());
        assert_eq!(back.value_net(), agent.value_net());
        assert_eq!(back.curvature_net(), agent.curvature_net());
        assert_eq!(back.target_value_net(), agent.target_value_net());
        assert_eq!(back.config(), agent.config());

        assert!(NafAgent::read_checkpoint(&mut buf.as_slice(), Some(6)).is_err());
        let mut bad = buf.clone();
        bad[4] = 7;
        assert!(NafAgent::read_checkpoint(&mut bad.as_slice(), None).is_err());
    }
}
