//! Binary snapshot of a velocity field.
//!
//! Little-endian throughout:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `SCBF` |
//! | 2     | version (u16, currently 1) |
//! | 4     | nx (u32) |
//! | 4     | ny (u32) |
//! | 8     | h (f64) |
//! | 8     | m (f64, integral) |
//! | 8     | Ly (f64) |
//! | 8·(nx+1)·ny | x-face values, row j = 0..ny, i fastest |
//! | 8·nx·(ny+1) | y-face values, row j = 0..=ny, i fastest |

use super::{DomainSpec, VelocityField};
use crate::error::{Error, Result};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"SCBF";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 38;
/// Decoder refuses grids with more cells than this.
pub const MAX_CELLS: usize = 1 << 24;

pub fn encode(v: &VelocityField) -> Vec<u8> {
    let d = v.domain;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * (v.ux.len() + v.uy.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(d.nx as u32).to_le_bytes());
    out.extend_from_slice(&(d.ny as u32).to_le_bytes());
    out.extend_from_slice(&d.h.to_le_bytes());
    out.extend_from_slice(&(d.m as f64).to_le_bytes());
    out.extend_from_slice(&d.ly.to_le_bytes());
    for x in v.ux.iter().chain(&v.uy) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Snapshot(msg.into())
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

pub fn decode(bytes: &[u8]) -> Result<VelocityField> {
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let nx = u32_at(bytes, 6) as usize;
    let ny = u32_at(bytes, 10) as usize;
    if nx == 0 || ny == 0 || nx.saturating_mul(ny) > MAX_CELLS {
        return Err(bad(format!("grid {nx}x{ny} out of range")));
    }
    let h = f64_at(bytes, 14);
    let m = f64_at(bytes, 22);
    let ly = f64_at(bytes, 30);
    if !(m.is_finite() && m >= 1.0 && m.fract() == 0.0 && m <= u32::MAX as f64) {
        return Err(bad(format!("half width {m} is not a positive integer")));
    }
    let domain = DomainSpec::new(m as u32, ly, h).map_err(|e| bad(e.to_string()))?;
    if domain.nx != nx || domain.ny != ny {
        return Err(bad(format!(
            "header grid {nx}x{ny} disagrees with geometry ({}x{})",
            domain.nx, domain.ny
        )));
    }
    let count = domain.n_ux() + domain.n_uy();
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * count {
        return Err(bad(format!("expected {} payload bytes, found {}", 8 * count, body.len())));
    }
    let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let ux: Vec<f64> = values.by_ref().take(domain.n_ux()).collect();
    let uy: Vec<f64> = values.collect();
    let v = VelocityField { domain, ux, uy };
    if !v.is_finite() {
        return Err(bad("non-finite face value"));
    }
    if v.boundary_defect() != 0.0 {
        return Err(bad("boundary faces must be zero"));
    }
    Ok(v)
}

pub fn write(path: &Path, v: &VelocityField) -> Result<()> {
    std::fs::write(path, encode(v))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<VelocityField> {
    decode(&std::fs::read(path)?)
}
