//! Binary container for named tensors.
//!
//! ```text
//! magic         8 bytes  "MGNTCKPT"
//! version       u32 LE
//! header_len    u32 LE
//! header        header_len bytes (opaque to this module; UTF-8 JSON in checkpoints)
//! tensor_count  u32 LE
//! per tensor, in ascending name order:
//!   name_len    u32 LE
//!   name        name_len bytes UTF-8
//!   rank        u32 LE (always 2)
//!   dims        rank x u32 LE
//!   values      prod(dims) x f64 LE, row-major
//! ```

use std::io::{Read, Write};

use ndarray::Array2;

use super::tensor::ParameterSet;
use super::NumError;

pub const MAGIC: &[u8; 8] = b"MGNTCKPT";

pub fn write_container<W: Write>(
    w: &mut W,
    version: u32,
    header: &[u8],
    params: &ParameterSet,
) -> Result<(), NumError> {
    w.write_all(MAGIC)?;
    w.write_all(&version.to_le_bytes())?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(header)?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (name, t) in params.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&2u32.to_le_bytes())?;
        for d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in t.data.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NumError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_bytes<R: Read>(r: &mut R, n: usize) -> Result<Vec<u8>, NumError> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

/// Reads the container. `expected_version` must match exactly.
pub fn read_container<R: Read>(
    r: &mut R,
    expected_version: u32,
) -> Result<(Vec<u8>, ParameterSet), NumError> {
    let magic = read_bytes(r, 8)?;
    if magic != MAGIC {
        return Err(NumError::Format("bad magic".into()));
    }
    let version = read_u32(r)?;
    if version != expected_version {
        return Err(NumError::VersionMismatch {
            found: version,
            expected: expected_version,
        });
    }
    let hlen = read_u32(r)? as usize;
    let header = read_bytes(r, hlen)?;
    let count = read_u32(r)?;
    let mut params = ParameterSet::new();
    for _ in 0..count {
        let nlen = read_u32(r)? as usize;
        let name = String::from_utf8(read_bytes(r, nlen)?)
            .map_err(|_| NumError::Format("tensor name is not UTF-8".into()))?;
        let rank = read_u32(r)?;
        if rank != 2 {
            return Err(NumError::Format(format!("tensor {name}: rank {rank} unsupported")));
        }
        let rows = read_u32(r)? as usize;
        let cols = read_u32(r)? as usize;
        let raw = read_bytes(r, rows * cols * 8)?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let data = Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| NumError::Format(format!("tensor {name}: {e}")))?;
        params.insert(&name, data)?;
    }
    Ok((header, params))
}
