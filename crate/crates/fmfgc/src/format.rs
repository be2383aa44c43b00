//! Binary array files: the 8-byte magic `FMFGC001`, a little-endian u32
//! rank, `rank` little-endian u32 extents, then the row-major f64 payload in
//! little-endian order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"FMFGC001";

#[derive(Debug, Clone, PartialEq)]
pub struct FieldArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl FieldArray {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> std::result::Result<Self, String> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(format!(
                "shape {shape:?} holds {expected} values, got {}",
                data.len()
            ));
        }
        Ok(FieldArray { shape, data })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.shape.len() + 8 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.shape.len() as u32).to_le_bytes());
        for &extent in &self.shape {
            out.extend_from_slice(&(extent as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, String> {
        let short = |what: &str, expected: usize| {
            format!(
                "truncated {what}: expected {expected} bytes, found {}",
                bytes.len()
            )
        };
        if bytes.len() < 12 {
            return Err(short("header", 12));
        }
        if &bytes[..8] != MAGIC {
            return Err(format!(
                "bad magic {:?}",
                String::from_utf8_lossy(&bytes[..8])
            ));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        let rank = word(8);
        let header = 12 + 4 * rank;
        if bytes.len() < header {
            return Err(short("header", header));
        }
        let shape: Vec<usize> = (0..rank).map(|i| word(12 + 4 * i)).collect();
        let total = header + 8 * shape.iter().product::<usize>();
        if bytes.len() != total {
            let what = if bytes.len() < total {
                "payload"
            } else {
                "file (trailing bytes)"
            };
            return Err(short(what, total));
        }
        let data = bytes[header..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(FieldArray { shape, data })
    }
}

pub fn write_field(path: &Path, field: &FieldArray) -> Result<()> {
    fs::write(path, field.encode()).map_err(|e| Error::io(path, e))
}

pub fn read_field(path: &Path) -> Result<FieldArray> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    FieldArray::decode(&bytes).map_err(|message| Error::Format {
        path: path.into(),
        message,
    })
}
