//! Binary container for named parameter tensors.
//!
//! Layout: magic `PMTN`, u32 format version, u32 record count, then per
//! record: u32 name length + UTF-8 name, u32 rank + u32 dims, and the
//! little-endian f32 payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ParamSet, Tensor};

const MAGIC: &[u8; 4] = b"PMTN";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes; not a tensor container")]
    BadMagic,
    #[error("unsupported container version {0}")]
    BadVersion(u32),
    #[error("malformed record: {0}")]
    Malformed(String),
}

pub fn save_tensors(params: &ParamSet, path: &Path) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (name, tensor) in params.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
        for &d in tensor.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in tensor.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_tensors(path: &Path) -> Result<Vec<(String, Tensor)>, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let count = read_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        let mut name_buf = vec![0u8; name_len];
        r.read_exact(&mut name_buf)?;
        let name = String::from_utf8(name_buf)
            .map_err(|e| CheckpointError::Malformed(format!("name not utf-8: {e}")))?;
        let rank = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(&mut r)? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = vec![0.0f32; numel];
        let mut buf = [0u8; 4];
        for v in data.iter_mut() {
            r.read_exact(&mut buf)?;
            *v = f32::from_le_bytes(buf);
        }
        let tensor = Tensor::from_vec(shape, data)
            .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        out.push((name, tensor));
    }
    Ok(out)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CheckpointError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

/// Restores a ParamSet's tensors from a container, matching by name.
/// Every parameter must be present with an identical shape.
pub fn load_into(params: &mut ParamSet, path: &Path) -> Result<(), CheckpointError> {
    let loaded = load_tensors(path)?;
    let by_name: std::collections::HashMap<_, _> =
        loaded.into_iter().map(|(n, t)| (n, t)).collect();
    for pid in params.ids().collect::<Vec<_>>() {
        let name = params.name(pid).to_string();
        let src = by_name.get(&name).ok_or_else(|| {
            CheckpointError::Malformed(format!("missing parameter {name}"))
        })?;
        if src.shape() != params.get(pid).shape() {
            return Err(CheckpointError::Malformed(format!(
                "shape mismatch for {name}: {:?} vs {:?}",
                src.shape(),
                params.get(pid).shape()
            )));
        }
        params
            .get_mut(pid)
            .data_mut()
            .copy_from_slice(src.data());
    }
    Ok(())
}
