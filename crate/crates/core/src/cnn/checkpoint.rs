//! `QTNET001` checkpoint: magic, u32 dim count, u32 dims, f32 weights, all
//! little-endian, weights in declaration order.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{Arch, Model};
use crate::scalar::Real;

const MAGIC: &[u8; 8] = b"QTNET001";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("checkpoint truncated")]
    Truncated,
    #[error("unsupported architecture header {0:?}")]
    BadArch(Vec<u32>),
    #[error("{0} trailing bytes after the weights")]
    Trailing(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn checkpoint_bytes<T: Real>(m: &Model<T>) -> Vec<u8> {
    let dims = m.arch.dims();
    let mut out = Vec::with_capacity(8 + 4 * (1 + dims.len() + m.arch.param_count()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for p in m.params() {
        for v in p {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint<T: Real>(m: &Model<T>, path: &Path) -> Result<(), CheckpointError> {
    fs::write(path, checkpoint_bytes(m))?;
    Ok(())
}

pub fn checkpoint_from_bytes<T: Real>(buf: &[u8]) -> Result<Model<T>, CheckpointError> {
    let mut words = buf.get(8..).ok_or(CheckpointError::Truncated)?.chunks(4);
    if &buf[..8] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut next = || -> Result<[u8; 4], CheckpointError> {
        words
            .next()
            .and_then(|w| w.try_into().ok())
            .ok_or(CheckpointError::Truncated)
    };
    let ndims = u32::from_le_bytes(next()?) as usize;
    let dims = (0..ndims)
        .map(|_| next().map(u32::from_le_bytes))
        .collect::<Result<Vec<u32>, _>>()?;
    let arch = Arch::from_dims(&dims.iter().map(|&d| d as usize).collect::<Vec<_>>())
        .ok_or_else(|| CheckpointError::BadArch(dims.clone()))?;
    let mut m = Model::<T>::zeros(arch);
    for p in m.params_mut() {
        for v in p.iter_mut() {
            *v = T::of(f32::from_le_bytes(next()?) as f64);
        }
    }
    let used = 8 + 4 * (1 + ndims + arch.param_count());
    if buf.len() != used {
        return Err(CheckpointError::Trailing(buf.len().saturating_sub(used)));
    }
    Ok(m)
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<Model<T>, CheckpointError> {
    checkpoint_from_bytes(&fs::read(path)?)
}
