//! Pattern-indexed int16 feature tables baked from the mapping networks.
//!
//! # `MIXC` cache layout (little-endian)
//!
//! ```text
//! magic    4 bytes  "MIXC"
//! version  u32      1
//! config   4 x u32  M, C, P, V
//! digest   u64      digest of the MIXW weights the tables were baked from
//! hv       N x C x i16
//! di       N x C x i16
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::mapping::MemoForward;
use crate::pattern::{Group, LinePattern, NUM_PATTERNS};
use crate::weights::{
    config_words, read_config, read_exact, read_u32, read_u64, ModelError, NetConfig, NetWeights,
};

/// Features are clamped to `[-FEATURE_CLAMP, FEATURE_CLAMP]` before scaling.
pub const FEATURE_CLAMP: f32 = 16.0;
/// Fixed-point scale of codebook entries.
pub const FEATURE_SCALE: f32 = 32.0;
/// Largest entry magnitude, `16 * 32`.
pub const MAX_ENTRY: i16 = 512;

pub const CACHE_MAGIC: &[u8; 4] = b"MIXC";
pub const CACHE_VERSION: u32 = 1;

/// Round half away from zero of `clamp(x, -16, 16) * 32`.
#[inline]
pub fn quantize_value(x: f32) -> i16 {
    (x.clamp(-FEATURE_CLAMP, FEATURE_CLAMP) * FEATURE_SCALE).round() as i16
}

pub fn quantize_feature(x: &[f32]) -> Vec<i16> {
    x.iter().map(|&v| quantize_value(v)).collect()
}

#[derive(Clone, PartialEq, Eq)]
pub struct Codebook {
    config: NetConfig,
    tables: [Vec<i16>; 2],
}

impl std::fmt::Debug for Codebook {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Codebook")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl Codebook {
    pub fn zeros(config: NetConfig) -> Codebook {
        let n = NUM_PATTERNS * config.feature;
        Codebook {
            config,
            tables: [vec![0; n], vec![0; n]],
        }
    }

    /// Builds a codebook from explicit tables (`N x C` each).
    pub fn from_tables(config: NetConfig, hv: Vec<i16>, di: Vec<i16>) -> Result<Codebook, ModelError> {
        let n = NUM_PATTERNS * config.feature;
        if hv.len() != n || di.len() != n {
            return Err(ModelError::ConfigMismatch(format!(
                "tables must hold {n} entries"
            )));
        }
        Ok(Codebook {
            config,
            tables: [hv, di],
        })
    }

    /// Runs the mapping networks over every pattern of both groups.
    pub fn bake(weights: &NetWeights) -> Result<Codebook, ModelError> {
        weights.check_finite()?;
        let c = weights.config.feature;
        let mut tables: [Vec<i16>; 2] = [Vec::new(), Vec::new()];
        for (table, net) in tables.iter_mut().zip(&weights.mapping) {
            let mut memo = MemoForward::new(net);
            let mut out = Vec::with_capacity(NUM_PATTERNS * c);
            for id in 0..NUM_PATTERNS as u32 {
                let p = LinePattern::from_index(id).expect("id in range");
                out.extend(memo.forward(&p).into_iter().map(quantize_value));
            }
            *table = out;
        }
        Ok(Codebook {
            config: weights.config,
            tables,
        })
    }

    #[inline]
    pub fn config(&self) -> NetConfig {
        self.config
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.config.feature
    }

    #[inline]
    pub fn row(&self, group: Group, id: u32) -> &[i16] {
        let c = self.config.feature;
        let start = id as usize * c;
        &self.tables[group as usize][start..start + c]
    }

    pub fn table(&self, group: Group) -> &[i16] {
        &self.tables[group as usize]
    }

    pub fn table_mut(&mut self, group: Group) -> &mut [i16] {
        &mut self.tables[group as usize]
    }

    pub fn to_cache_bytes(&self, digest: u64) -> Vec<u8> {
        let mut buf = Vec::with_capacity(32 + 4 * self.tables[0].len());
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        for v in config_words(&self.config) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&digest.to_le_bytes());
        for t in &self.tables {
            for v in t {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf
    }

    /// Parses a cache file, returning the tables and the recorded digest.
    pub fn from_cache_bytes(bytes: &[u8]) -> Result<(Codebook, u64), ModelError> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(ModelError::ConfigMismatch("bad codebook cache magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CACHE_VERSION {
            return Err(ModelError::ConfigMismatch(format!(
                "unsupported codebook cache version {version}"
            )));
        }
        let config = read_config(&mut r)?;
        let digest = read_u64(&mut r)?;
        let n = NUM_PATTERNS * config.feature;
        if r.len() != 4 * n {
            return Err(ModelError::ConfigMismatch(format!(
                "codebook cache holds {} bytes of tables, expected {}",
                r.len(),
                4 * n
            )));
        }
        let mut tables: [Vec<i16>; 2] = [Vec::with_capacity(n), Vec::with_capacity(n)];
        for t in tables.iter_mut() {
            for _ in 0..n {
                let mut b = [0u8; 2];
                read_exact(&mut r, &mut b)?;
                t.push(i16::from_le_bytes(b));
            }
        }
        Ok((Codebook { config, tables }, digest))
    }

    pub fn save_cache(&self, path: impl AsRef<Path>, digest: u64) -> Result<(), ModelError> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_cache_bytes(digest))?;
        Ok(())
    }

    pub fn load_cache(path: impl AsRef<Path>) -> Result<(Codebook, u64), ModelError> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        Codebook::from_cache_bytes(&bytes)
    }

    /// Loads the cache at `path` when it matches `weights`, otherwise bakes
    /// and rewrites it. Returns the codebook and whether it was rebaked.
    pub fn load_or_bake(
        weights: &NetWeights,
        path: impl AsRef<Path>,
    ) -> Result<(Codebook, bool), ModelError> {
        let path = path.as_ref();
        let digest = weights.digest();
        if let Ok((cb, stored)) = Codebook::load_cache(path) {
            if stored == digest && cb.config == weights.config {
                return Ok((cb, false));
            }
            log::info!("codebook cache {} is stale, rebaking", path.display());
        }
        let cb = Codebook::bake(weights)?;
        cb.save_cache(path, digest)?;
        Ok((cb, true))
    }
}
