//! The `.hfd` record format.
//!
//! A record is a 32-byte header followed by the field payload, all
//! little-endian:
//!
//! | offset | size | content                                  |
//! |--------|------|------------------------------------------|
//! | 0      | 4    | magic `HFD1`                             |
//! | 4      | 2    | format version (`u16`, currently 1)      |
//! | 6      | 4    | `nx` (`u32`)                             |
//! | 10     | 4    | `ny` (`u32`)                             |
//! | 14     | 2    | field count (`u16`): 1 = `q`, 3 = `q, f, u` |
//! | 16     | 16   | reserved, zero                           |
//!
//! The payload holds `q` as `nx·ny` `f64` values, then `f` and `u` as
//! `nx·ny` interleaved `(re, im)` `f64` pairs, each row-major with `x`
//! varying fastest.

use std::fs;
use std::path::Path;

use helmholtz_core::{ComplexField, Grid2D, RealField};
use num_complex::Complex64;

pub const MAGIC: [u8; 4] = *b"HFD1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum HfdError {
    #[error("{record}: bad magic {found:?}, expected \"HFD1\"")]
    BadMagic { record: String, found: [u8; 4] },
    #[error("{record}: unsupported format version {version}")]
    UnsupportedVersion { record: String, version: u16 },
    #[error("{record}: truncated or oversized file, expected {expected} bytes, found {found}")]
    Truncated {
        record: String,
        expected: usize,
        found: usize,
    },
    #[error("{record}: checksum mismatch, manifest says {expected}, file hashes to {found}")]
    Checksum {
        record: String,
        expected: String,
        found: String,
    },
    #[error("{record}: {reason}")]
    Invalid { record: String, reason: String },
    #[error("{record}: {source}")]
    Io { record: String, source: std::io::Error },
}

/// A decoded record: `q` alone, or `q` with source and solution.
#[derive(Debug, Clone, PartialEq)]
pub struct HfdRecord {
    pub q: RealField,
    pub fu: Option<(ComplexField, ComplexField)>,
}

impl HfdRecord {
    pub fn q_only(q: RealField) -> Self {
        Self { q, fu: None }
    }

    pub fn full(q: RealField, f: ComplexField, u: ComplexField) -> Self {
        Self { q, fu: Some((f, u)) }
    }

    pub fn grid(&self) -> &Grid2D {
        self.q.grid()
    }

    pub fn field_count(&self) -> u16 {
        if self.fu.is_some() {
            3
        } else {
            1
        }
    }
}

/// Exact byte length of a record with the given shape.
pub fn encoded_len(nx: usize, ny: usize, field_count: u16) -> usize {
    let n = nx * ny;
    HEADER_LEN + n * 8 + if field_count == 3 { 2 * n * 16 } else { 0 }
}

pub fn encode(rec: &HfdRecord) -> Vec<u8> {
    let (nx, ny) = rec.grid().shape();
    let count = rec.field_count();
    let mut out = Vec::with_capacity(encoded_len(nx, ny, count));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(nx as u32).to_le_bytes());
    out.extend_from_slice(&(ny as u32).to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&[0u8; 16]);
    for v in rec.q.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some((f, u)) = &rec.fu {
        for field in [f, u] {
            for z in field.values() {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
    }
    out
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

/// Decodes `bytes`; `record` names the record in errors.
pub fn decode(bytes: &[u8], record: &str) -> Result<HfdRecord, HfdError> {
    let name = || record.to_string();
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(HfdError::BadMagic {
                record: name(),
                found: bytes[..4].try_into().expect("4 bytes"),
            });
        }
        return Err(HfdError::Truncated {
            record: name(),
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(HfdError::BadMagic {
            record: name(),
            found: magic,
        });
    }
    let version = u16_at(bytes, 4);
    if version != VERSION {
        return Err(HfdError::UnsupportedVersion {
            record: name(),
            version,
        });
    }
    let (nx, ny) = (u32_at(bytes, 6) as usize, u32_at(bytes, 10) as usize);
    let count = u16_at(bytes, 14);
    if count != 1 && count != 3 {
        return Err(HfdError::Invalid {
            record: name(),
            reason: format!("field count {count} is not 1 or 3"),
        });
    }
    let grid = Grid2D::new(nx, ny).map_err(|e| HfdError::Invalid {
        record: name(),
        reason: e.to_string(),
    })?;
    let expected = encoded_len(nx, ny, count);
    if bytes.len() != expected {
        return Err(HfdError::Truncated {
            record: name(),
            expected,
            found: bytes.len(),
        });
    }

    let n = nx * ny;
    let invalid = |e: helmholtz_core::Error| HfdError::Invalid {
        record: name(),
        reason: e.to_string(),
    };
    let q: Vec<f64> = (0..n).map(|p| f64_at(bytes, HEADER_LEN + 8 * p)).collect();
    let q = RealField::new(grid, q).map_err(invalid)?;
    if count == 1 {
        return Ok(HfdRecord::q_only(q));
    }
    let complex_at = |start: usize| -> Vec<Complex64> {
        (0..n)
            .map(|p| Complex64::new(f64_at(bytes, start + 16 * p), f64_at(bytes, start + 16 * p + 8)))
            .collect()
    };
    let f_start = HEADER_LEN + 8 * n;
    let f = ComplexField::new(grid, complex_at(f_start)).map_err(invalid)?;
    let u = ComplexField::new(grid, complex_at(f_start + 16 * n)).map_err(invalid)?;
    Ok(HfdRecord::full(q, f, u))
}

pub fn write_file(path: &Path, rec: &HfdRecord) -> Result<Vec<u8>, HfdError> {
    let bytes = encode(rec);
    fs::write(path, &bytes).map_err(|source| HfdError::Io {
        record: path.display().to_string(),
        source,
    })?;
    Ok(bytes)
}

pub fn read_file(path: &Path) -> Result<HfdRecord, HfdError> {
    let name = path.display().to_string();
    let bytes = fs::read(path).map_err(|source| HfdError::Io {
        record: name.clone(),
        source,
    })?;
    decode(&bytes, &name)
}
