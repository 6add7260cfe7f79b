//! Single-tensor binary files.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | field |
//! |---|---|
//! | 4 | magic `ATND` |
//! | 1 | version, 1 |
//! | 1 | dtype, 1 = f64 |
//! | 4 | rank (u32) |
//! | 4 × rank | dims (u32) |
//! | 8 × Π dims | row-major f64 payload |

use std::fs;
use std::path::Path;

use headlamp_core::Tensor;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"ATND";
pub const VERSION: u8 = 1;
pub const DTYPE_F64: u8 = 1;

pub fn encode(tensor: &Tensor) -> Vec<u8> {
    let shape = tensor.shape();
    let mut out = Vec::with_capacity(10 + 4 * shape.len() + 8 * tensor.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(DTYPE_F64);
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &d in shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in tensor.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> std::result::Result<&'a [u8], String> {
    if bytes.len() < n {
        return Err(format!("truncated {what}: expected {n} bytes, found {}", bytes.len()));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

fn read_u32(bytes: &mut &[u8], what: &str) -> std::result::Result<u32, String> {
    Ok(u32::from_le_bytes(take(bytes, 4, what)?.try_into().expect("4 bytes")))
}

/// Parses a tensor file image.
pub fn decode(mut bytes: &[u8]) -> std::result::Result<Tensor, String> {
    let b = &mut bytes;
    if take(b, 4, "magic")? != MAGIC {
        return Err("not a tensor file (bad magic)".into());
    }
    let header = take(b, 2, "header")?;
    if header[0] != VERSION {
        return Err(format!("tensor file version {} not supported (expected {VERSION})", header[0]));
    }
    if header[1] != DTYPE_F64 {
        return Err(format!("unknown dtype code {}", header[1]));
    }
    let rank = read_u32(b, "rank")? as usize;
    let dims = (0..rank).map(|_| read_u32(b, "dims").map(|d| d as usize)).collect::<std::result::Result<Vec<_>, _>>()?;
    let count = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or("dims overflow")?;
    let expected = count.checked_mul(8).ok_or("dims overflow")?;
    if b.len() != expected {
        return Err(format!("payload is {} bytes, expected {expected} for shape {dims:?}", b.len()));
    }
    let data = b.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Tensor::new(&dims, data).map_err(|e| e.to_string())
}

pub fn write(path: &Path, tensor: &Tensor) -> Result<()> {
    fs::write(path, encode(tensor)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|m| Error::format(path, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_bytes() {
        let t = Tensor::new(&[1, 2], vec![1.0, -0.5]).unwrap();
        let expected: Vec<u8> = [
            &b"ATND"[..],
            &[1, 1],
            &[2, 0, 0, 0],
            &[1, 0, 0, 0],
            &[2, 0, 0, 0],
            &[0, 0, 0, 0, 0, 0, 0xf0, 0x3f],
            &[0, 0, 0, 0, 0, 0, 0xe0, 0xbf],
        ]
        .concat();
        assert_eq!(encode(&t), expected);
        assert_eq!(decode(&expected).unwrap(), t);
    }

    #[test]
    fn truncated_payload_names_sizes() {
        let t = Tensor::new(&[2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let bytes = encode(&t);
        let err = decode(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(err.contains("29 bytes") && err.contains("expected 32"), "{err}");
        assert!(decode(&bytes[..6]).is_err());
    }

    #[test]
    fn rejects_wrong_version_and_dtype() {
        let mut bytes = encode(&Tensor::scalar(1.0));
        bytes[4] = 2;
        assert!(decode(&bytes).unwrap_err().contains("version 2"));
        bytes[4] = 1;
        bytes[5] = 9;
        assert!(decode(&bytes).unwrap_err().contains("dtype"));
    }
}
