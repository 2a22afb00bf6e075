//! Binary array files: magic `LIFTARR1`, little-endian `u32` rows and cols,
//! then row-major little-endian `f64` entries.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"LIFTARR1";

pub fn encode(rows: usize, cols: usize, values: &[f64]) -> Result<Vec<u8>> {
    if values.len() != rows * cols {
        return Err(Error::ShapeMismatch(format!("{} values for {rows} x {cols}", values.len())));
    }
    let rows32 = u32::try_from(rows).map_err(|_| Error::ShapeMismatch("too many rows".into()))?;
    let cols32 = u32::try_from(cols).map_err(|_| Error::ShapeMismatch("too many cols".into()))?;
    let mut out = Vec::with_capacity(16 + 8 * values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&rows32.to_le_bytes());
    out.extend_from_slice(&cols32.to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<f64>), String> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err("missing LIFTARR1 header".into());
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let payload = &bytes[16..];
    if payload.len() != rows * cols * 8 {
        return Err(format!("payload has {} bytes, expected {}", payload.len(), rows * cols * 8));
    }
    let values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((rows, cols, values))
}

pub fn write(path: impl AsRef<Path>, rows: usize, cols: usize, values: &[f64]) -> Result<()> {
    fs::write(path, encode(rows, cols, values)?)?;
    Ok(())
}

pub fn read(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>)> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    decode(&bytes).map_err(|reason| Error::Format { path: path.to_path_buf(), reason })
}
