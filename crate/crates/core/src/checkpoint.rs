//! Binary checkpoint for a [`Policy`] and the ticker universe it trades.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic       8 bytes  "FDAPOCKP"
//! version     u32      1
//! input_dim   u32
//! n_hidden    u32
//! hidden      u32 × n_hidden
//! action_dim  u32
//! n_tickers   u32
//! tickers     n_tickers × (u32 byte length, UTF-8 bytes)
//! n_params    u64
//! params      f64 × n_params         (layout of PolicyParams)
//! norm_count  f64
//! norm_mean   f64 × input_dim
//! norm_m2     f64 × input_dim
//! ```
//!
//! Floats are stored as raw IEEE-754 bits, so save/load is bit-exact.

use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::policy::{Architecture, Policy, PolicyParams, RunningNorm};

pub const MAGIC: &[u8; 8] = b"FDAPOCKP";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub tickers: Vec<String>,
    pub policy: Policy,
}

fn put_u32(w: &mut impl Write, v: usize) -> io::Result<()> {
    let v = u32::try_from(v)
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "value exceeds u32"))?;
    w.write_all(&v.to_le_bytes())
}

fn put_f64s(w: &mut impl Write, vs: &[f64]) -> io::Result<()> {
    vs.iter().try_for_each(|v| w.write_all(&v.to_le_bytes()))
}

fn get_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64s(r: &mut impl Read, n: usize) -> io::Result<Vec<f64>> {
    (0..n).map(|_| get_u64(r).map(f64::from_bits)).collect()
}

impl Checkpoint {
    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        let arch = self.policy.params.arch();
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        put_u32(w, arch.input_dim)?;
        put_u32(w, arch.hidden.len())?;
        for &h in &arch.hidden {
            put_u32(w, h)?;
        }
        put_u32(w, arch.action_dim)?;
        put_u32(w, self.tickers.len())?;
        for t in &self.tickers {
            put_u32(w, t.len())?;
            w.write_all(t.as_bytes())?;
        }
        w.write_all(&(self.policy.params.len() as u64).to_le_bytes())?;
        put_f64s(w, self.policy.params.as_slice())?;
        let norm = &self.policy.normalizer;
        put_f64s(w, &[norm.count])?;
        put_f64s(w, &norm.mean)?;
        put_f64s(w, &norm.m2)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = get_u32(r)?;
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        let input_dim = get_u32(r)? as usize;
        let n_hidden = get_u32(r)? as usize;
        if n_hidden > 64 {
            return Err(CheckpointError::Corrupt(format!(
                "{n_hidden} hidden layers"
            )));
        }
        let hidden = (0..n_hidden)
            .map(|_| get_u32(r).map(|h| h as usize))
            .collect::<io::Result<Vec<_>>>()?;
        let action_dim = get_u32(r)? as usize;
        let n_tickers = get_u32(r)? as usize;
        let mut tickers = Vec::with_capacity(n_tickers.min(4096));
        for _ in 0..n_tickers {
            let len = get_u32(r)? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            tickers
                .push(String::from_utf8(buf).map_err(|e| CheckpointError::Corrupt(e.to_string()))?);
        }
        let arch = Architecture {
            input_dim,
            hidden,
            action_dim,
        };
        let n_params = get_u64(r)? as usize;
        if n_params != arch.n_params() {
            return Err(CheckpointError::Corrupt(format!(
                "{n_params} parameters, architecture needs {}",
                arch.n_params()
            )));
        }
        let data = get_f64s(r, n_params)?;
        let params = PolicyParams::from_vec(arch, data)
            .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        let count = get_f64s(r, 1)?[0];
        let mean = get_f64s(r, input_dim)?;
        let m2 = get_f64s(r, input_dim)?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(CheckpointError::Corrupt("trailing bytes".into()));
        }
        Ok(Self {
            tickers,
            policy: Policy {
                params,
                normalizer: RunningNorm { count, mean, m2 },
            },
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)
            .expect("writing to a Vec cannot fail");
        buf
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let bytes = std::fs::read(path)?;
        Self::read_from(&mut bytes.as_slice())
    }
}
