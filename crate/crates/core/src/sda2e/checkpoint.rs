//! Versioned binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes   "SDA2ECKP"
//! version    u32
//! config_len u64, config JSON (UTF-8)
//! n_tensors  u32
//! per tensor: name_len u32, name, rows u64, cols u64, rows*cols f64
//! ```
//!
//! Values are stored as raw IEEE-754 bits, so a save/load round trip
//! reproduces scores exactly.

use std::io::{Read, Write};
use std::path::Path;

use super::config::Sda2eConfig;
use super::model::Sda2eModel;
use crate::numerics::Matrix;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"SDA2ECKP";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(model: &Sda2eModel, mut w: W) -> Result<()> {
    let io = |e: std::io::Error| Error::Checkpoint(e.to_string());
    let config = serde_json::to_vec(&model.config)?;
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(config.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&config).map_err(io)?;
    let params = model.all_params();
    w.write_all(&(params.len() as u32).to_le_bytes()).map_err(io)?;
    for p in params {
        let name = p.name.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(name).map_err(io)?;
        w.write_all(&(p.value.rows() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&(p.value.cols() as u64).to_le_bytes()).map_err(io)?;
        for v in p.value.as_slice() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

fn read_exact<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(buf)
}

fn read_len<R: Read>(r: &mut R, limit: u64, what: &str) -> Result<usize> {
    let n = u64::from_le_bytes(read_exact::<8, _>(r)?);
    if n > limit {
        return Err(Error::Checkpoint(format!("{what} length {n} exceeds limit {limit}")));
    }
    Ok(n as usize)
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Sda2eModel> {
    if &read_exact::<8, _>(&mut r)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(read_exact::<4, _>(&mut r)?);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let config_len = read_len(&mut r, 1 << 20, "config")?;
    let mut config = vec![0u8; config_len];
    r.read_exact(&mut config)
        .map_err(|e| Error::Checkpoint(format!("truncated config: {e}")))?;
    let config: Sda2eConfig = serde_json::from_slice(&config)?;
    let mut model = Sda2eModel::new(config)?;

    let count = u32::from_le_bytes(read_exact::<4, _>(&mut r)?) as usize;
    let mut params = model.all_params_mut();
    if count != params.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {count} tensors, configuration implies {}",
            params.len()
        )));
    }
    for p in params.iter_mut() {
        let name_len = u32::from_le_bytes(read_exact::<4, _>(&mut r)?) as usize;
        if name_len > 4096 {
            return Err(Error::Checkpoint("tensor name too long".into()));
        }
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)
            .map_err(|e| Error::Checkpoint(format!("truncated tensor name: {e}")))?;
        let name = String::from_utf8(name).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if name != p.name {
            return Err(Error::Checkpoint(format!("expected tensor {}, found {name}", p.name)));
        }
        let rows = read_len(&mut r, u32::MAX as u64, "rows")?;
        let cols = read_len(&mut r, u32::MAX as u64, "cols")?;
        if (rows, cols) != p.value.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor {name} has shape {rows}x{cols}, expected {}x{}",
                p.value.rows(),
                p.value.cols()
            )));
        }
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            values.push(f64::from_le_bytes(read_exact::<8, _>(&mut r)?));
        }
        p.value = Matrix::from_vec(rows, cols, values)?;
        p.zero_grad();
    }
    Ok(model)
}

pub fn save_checkpoint(model: &Sda2eModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(model, std::io::BufWriter::new(file))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Sda2eModel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(std::io::BufReader::new(file))
}
