//! Network configuration, float parameters and the `MIXW` weight file.
//!
//! # `MIXW` layout (little-endian)
//!
//! ```text
//! magic    4 bytes  "MIXW"
//! version  u32      1
//! config   4 x u32  M, C, P, V
//! count    u32      number of tensors
//! tensor*  name_len u16, name (utf-8), ndim u8, dims ndim x u32,
//!          data prod(dims) x f32
//! ```
//!
//! Tensors appear in the order of [`NetWeights::tensors_mut`]; the loader
//! checks every name and shape against the configuration in the header.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::heads::{HeadWeights, POLICY_FEATURES};
use crate::mapping::MappingNet;
use crate::nn::he_fill;

pub const WEIGHT_MAGIC: &[u8; 4] = b"MIXW";
pub const WEIGHT_VERSION: u32 = 1;

/// Default seed for untrained weights.
pub const DEFAULT_INIT_SEED: u64 = 20_241_202;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("non-finite weight in tensor {0}")]
    NonFiniteWeight(String),
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
}

/// Channel sizes: mapping `M`, feature `C`, policy `P`, value `V`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct NetConfig {
    pub mapping: usize,
    pub feature: usize,
    pub policy: usize,
    pub value: usize,
}

impl NetConfig {
    pub const SMALL: NetConfig = NetConfig {
        mapping: 64,
        feature: 32,
        policy: 16,
        value: 32,
    };
    pub const MEDIUM: NetConfig = NetConfig {
        mapping: 128,
        feature: 64,
        policy: 32,
        value: 64,
    };
    pub const LARGE: NetConfig = NetConfig {
        mapping: 256,
        feature: 128,
        policy: 64,
        value: 128,
    };
    /// Reduced configuration used by exhaustive tests.
    pub const TINY: NetConfig = NetConfig {
        mapping: 16,
        feature: 8,
        policy: 4,
        value: 8,
    };

    pub fn by_name(name: &str) -> Option<NetConfig> {
        match name.to_ascii_lowercase().as_str() {
            "small" => Some(Self::SMALL),
            "medium" => Some(Self::MEDIUM),
            "large" => Some(Self::LARGE),
            "tiny" => Some(Self::TINY),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let NetConfig {
            mapping,
            feature,
            policy,
            value,
        } = *self;
        if mapping == 0 || feature == 0 || policy == 0 || value == 0 {
            return Err(ModelError::InvalidConfig("zero channel count".into()));
        }
        if feature % 2 != 0 {
            return Err(ModelError::InvalidConfig(format!(
                "feature channels {feature} must be even"
            )));
        }
        if policy > feature {
            return Err(ModelError::InvalidConfig(format!(
                "policy channels {policy} exceed feature channels {feature}"
            )));
        }
        if [mapping, feature, policy, value].iter().any(|&n| n > 4096) {
            return Err(ModelError::InvalidConfig("channel count too large".into()));
        }
        Ok(())
    }

    /// Half of the feature channels, the depth-wise convolved part.
    pub fn conv_channels(&self) -> usize {
        self.feature / 2
    }
}

/// All float parameters of the network.
#[derive(Clone, Debug, PartialEq)]
pub struct NetWeights {
    pub config: NetConfig,
    /// Mapping networks, horizontal/vertical then diagonal.
    pub mapping: [MappingNet; 2],
    /// Depth-wise 3x3 kernel of the first `C/2` channels, `[k][dr+1][dc+1]`.
    pub depthwise: Vec<f32>,
    pub heads: HeadWeights,
}

impl NetWeights {
    pub fn zeros(config: NetConfig) -> Result<NetWeights, ModelError> {
        config.validate()?;
        let NetConfig {
            mapping: m,
            feature: c,
            ..
        } = config;
        Ok(NetWeights {
            config,
            mapping: [MappingNet::zeros(m, c), MappingNet::zeros(m, c)],
            depthwise: vec![0.0; config.conv_channels() * 9],
            heads: HeadWeights::zeros(&config),
        })
    }

    /// Seeded He-uniform initialization, used when no trained weights are
    /// available.
    pub fn random(config: NetConfig, seed: u64) -> Result<NetWeights, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let NetConfig {
            mapping: m,
            feature: c,
            ..
        } = config;
        let mapping = [
            MappingNet::he_uniform(m, c, &mut rng),
            MappingNet::he_uniform(m, c, &mut rng),
        ];
        let mut depthwise = vec![0.0; config.conv_channels() * 9];
        he_fill(&mut depthwise, 9, 1.0, &mut rng);
        Ok(NetWeights {
            config,
            mapping,
            depthwise,
            heads: HeadWeights::random(&config, &mut rng),
        })
    }

    /// Every tensor with its file name and shape, in file order.
    pub fn tensors_mut(&mut self) -> Vec<(String, Vec<usize>, &mut Vec<f32>)> {
        let c = self.config.feature;
        let mut out: Vec<(String, Vec<usize>, &mut Vec<f32>)> = Vec::new();
        for (g, net) in ["hv", "di"].into_iter().zip(self.mapping.iter_mut()) {
            for (i, d) in net.dir.iter_mut().enumerate() {
                out.push((format!("map.{g}.dc{}.w", i + 1), vec![3, d.out, d.inp], &mut d.taps));
                out.push((format!("map.{g}.dc{}.b", i + 1), vec![d.out], &mut d.bias));
            }
            for (i, p) in net.point.iter_mut().enumerate() {
                out.push((format!("map.{g}.pw{}.w", i + 1), vec![p.out, p.inp], &mut p.weight));
                out.push((format!("map.{g}.pw{}.b", i + 1), vec![p.out], &mut p.bias));
            }
            let h = &mut net.head;
            out.push((format!("map.{g}.out.w"), vec![h.out, h.inp], &mut h.weight));
            out.push((format!("map.{g}.out.b"), vec![h.out], &mut h.bias));
        }
        out.push(("dw.w".into(), vec![c / 2, 3, 3], &mut self.depthwise));
        out.extend(self.heads.tensors_mut());
        out
    }

    pub fn check_finite(&self) -> Result<(), ModelError> {
        let mut copy = self.clone();
        for (name, _, data) in copy.tensors_mut() {
            if data.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFiniteWeight(name));
            }
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        let mut copy = self.clone();
        copy.tensors_mut().iter().map(|t| t.2.len()).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut copy = self.clone();
        let tensors = copy.tensors_mut();
        let mut buf = Vec::new();
        buf.extend_from_slice(WEIGHT_MAGIC);
        buf.extend_from_slice(&WEIGHT_VERSION.to_le_bytes());
        for v in config_words(&self.config) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, shape, data) in tensors {
            buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.push(shape.len() as u8);
            for d in &shape {
                buf.extend_from_slice(&(*d as u32).to_le_bytes());
            }
            for v in data.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<NetWeights, ModelError> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != WEIGHT_MAGIC {
            return Err(ModelError::ConfigMismatch("bad weight file magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != WEIGHT_VERSION {
            return Err(ModelError::ConfigMismatch(format!(
                "unsupported weight file version {version}"
            )));
        }
        let config = read_config(&mut r)?;
        let mut weights = NetWeights::zeros(config)
            .map_err(|e| ModelError::ConfigMismatch(e.to_string()))?;
        let count = read_u32(&mut r)? as usize;
        let mut expected = weights.tensors_mut();
        if count != expected.len() {
            return Err(ModelError::ConfigMismatch(format!(
                "expected {} tensors, file has {count}",
                expected.len()
            )));
        }
        for (name, shape, data) in expected.iter_mut() {
            let len = read_u16(&mut r)? as usize;
            let mut got = vec![0u8; len];
            read_exact(&mut r, &mut got)?;
            if got != name.as_bytes() {
                return Err(ModelError::ConfigMismatch(format!(
                    "expected tensor {name}, found {}",
                    String::from_utf8_lossy(&got)
                )));
            }
            let ndim = read_u8(&mut r)? as usize;
            let dims = (0..ndim)
                .map(|_| read_u32(&mut r).map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            if &dims != shape {
                return Err(ModelError::ConfigMismatch(format!(
                    "tensor {name}: expected shape {shape:?}, found {dims:?}"
                )));
            }
            for v in data.iter_mut() {
                let mut b = [0u8; 4];
                read_exact(&mut r, &mut b)?;
                *v = f32::from_le_bytes(b);
            }
        }
        drop(expected);
        if !r.is_empty() {
            return Err(ModelError::ConfigMismatch(format!(
                "{} trailing bytes",
                r.len()
            )));
        }
        Ok(weights)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<NetWeights, ModelError> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        NetWeights::from_bytes(&bytes)
    }

    /// 64-bit digest of the serialized weights, used to validate codebook
    /// caches.
    pub fn digest(&self) -> u64 {
        digest_bytes(&self.to_bytes())
    }
}

pub fn digest_bytes(bytes: &[u8]) -> u64 {
    let hash = Sha256::digest(bytes);
    u64::from_le_bytes(hash[..8].try_into().expect("sha256 has 32 bytes"))
}

pub(crate) fn config_words(c: &NetConfig) -> [u32; 4] {
    [
        c.mapping as u32,
        c.feature as u32,
        c.policy as u32,
        c.value as u32,
    ]
}

pub(crate) fn read_config(r: &mut &[u8]) -> Result<NetConfig, ModelError> {
    let config = NetConfig {
        mapping: read_u32(r)? as usize,
        feature: read_u32(r)? as usize,
        policy: read_u32(r)? as usize,
        value: read_u32(r)? as usize,
    };
    config
        .validate()
        .map_err(|e| ModelError::ConfigMismatch(e.to_string()))?;
    Ok(config)
}

fn truncated() -> ModelError {
    ModelError::ConfigMismatch("file truncated".into())
}

pub(crate) fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<(), ModelError> {
    r.read_exact(buf).map_err(|_| truncated())
}

pub(crate) fn read_u32(r: &mut &[u8]) -> Result<u32, ModelError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64(r: &mut &[u8]) -> Result<u64, ModelError> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_u16(r: &mut &[u8]) -> Result<u16, ModelError> {
    let mut b = [0u8; 2];
    read_exact(r, &mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u8(r: &mut &[u8]) -> Result<u8, ModelError> {
    let mut b = [0u8; 1];
    read_exact(r, &mut b)?;
    Ok(b[0])
}

/// Policy generator output width for `P` input channels.
pub fn dynamic_width(policy: usize) -> usize {
    POLICY_FEATURES * policy + POLICY_FEATURES
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_configs() {
        assert_eq!(NetConfig::SMALL, NetConfig::by_name("small").unwrap());
        let s = NetConfig::SMALL;
        let m = NetConfig::MEDIUM;
        assert_eq!((s.mapping, s.feature, s.policy, s.value), (64, 32, 16, 32));
        assert_eq!(
            (m.mapping, m.feature, m.policy, m.value),
            (2 * s.mapping, 2 * s.feature, 2 * s.policy, 2 * s.value)
        );
        assert!(NetConfig { feature: 7, ..s }.validate().is_err());
    }

    #[test]
    fn round_trip_and_determinism() {
        let w = NetWeights::random(NetConfig::TINY, 9).unwrap();
        let bytes = w.to_bytes();
        assert_eq!(bytes, w.to_bytes());
        let back = NetWeights::from_bytes(&bytes).unwrap();
        assert_eq!(back, w);
        assert_eq!(back.digest(), w.digest());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let w = NetWeights::random(NetConfig::TINY, 9).unwrap();
        let mut bytes = w.to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            NetWeights::from_bytes(&bytes),
            Err(ModelError::ConfigMismatch(_))
        ));
        let bytes = w.to_bytes();
        assert!(matches!(
            NetWeights::from_bytes(&bytes[..bytes.len() - 3]),
            Err(ModelError::ConfigMismatch(_))
        ));
        let mut bytes = w.to_bytes();
        // Feature channel count in the header.
        bytes[12] = 10;
        assert!(matches!(
            NetWeights::from_bytes(&bytes),
            Err(ModelError::ConfigMismatch(_))
        ));
    }

    #[test]
    fn non_finite_weights_are_reported() {
        let mut w = NetWeights::random(NetConfig::TINY, 9).unwrap();
        w.depthwise[3] = f32::NAN;
        assert!(matches!(
            w.check_finite(),
            Err(ModelError::NonFiniteWeight(name)) if name == "dw.w"
        ));
    }

    #[test]
    fn generator_width() {
        assert_eq!(dynamic_width(16), 16 * 16 + 16);
        let w = NetWeights::random(NetConfig::SMALL, 1).unwrap();
        assert_eq!(w.heads.policy_gen2.out, dynamic_width(16));
    }
}
