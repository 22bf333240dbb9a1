//! Binary field checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! | offset | size | content |
//! |---|---|---|
//! | 0 | 4 | magic `BMQT` |
//! | 4 | 4 | format version `u32` |
//! | 8 | 4 | grid size `n` as `u32` |
//! | 12 | 8 | time `f64` |
//! | 20 | 32 | SHA-256 of the JSON-serialised model parameters |
//! | 52 | `72 n³` | nodal `f64` arrays `u_x, u_y, u_z, q_1, …, q_5, θ` |
//!
//! Each array has `n³` entries in node order `(i n + j) n + l`.

use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sim::{FieldState, Grid, ModelParams};

pub const MAGIC: [u8; 4] = *b"BMQT";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 52;

pub fn params_digest(params: &ModelParams) -> [u8; 32] {
    let json = serde_json::to_vec(params).expect("parameters serialise");
    Sha256::digest(&json).into()
}

fn fields(state: &FieldState) -> impl Iterator<Item = &Vec<f64>> {
    state.u.iter().chain(state.q.iter()).chain(std::iter::once(&state.theta))
}

pub fn encode(state: &FieldState, params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 72 * state.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(state.n as u32).to_le_bytes());
    out.extend_from_slice(&state.time.to_le_bytes());
    out.extend_from_slice(&params_digest(params));
    for f in fields(state) {
        for x in f {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

/// Parsed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub version: u32,
    pub n: usize,
    pub time: f64,
    pub digest: [u8; 32],
}

pub fn decode_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Checkpoint(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    Ok(Header {
        version,
        n: u32_at(8) as usize,
        time: f64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")),
        digest: bytes[20..52].try_into().expect("32 bytes"),
    })
}

/// Rebuilds the state; when `params` is given its digest must match.
pub fn decode(bytes: &[u8], params: Option<&ModelParams>) -> Result<FieldState> {
    let h = decode_header(bytes)?;
    if let Some(p) = params {
        if params_digest(p) != h.digest {
            return Err(Error::Checkpoint("parameter digest does not match".into()));
        }
    }
    let grid = Grid::new(h.n).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let len = grid.len();
    let body = &bytes[HEADER_LEN..];
    if body.len() != 72 * len {
        return Err(Error::Checkpoint(format!(
            "body has {} bytes, expected {} for grid {}",
            body.len(),
            72 * len,
            h.n
        )));
    }
    let mut arrays = body.chunks_exact(8 * len).map(|chunk| {
        chunk
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect::<Vec<f64>>()
    });
    let mut next = || arrays.next().expect("nine arrays");
    let u = std::array::from_fn(|_| next());
    let q = std::array::from_fn(|_| next());
    let theta = next();
    FieldState::from_nodal(&grid, h.time, u, q, theta)
}

pub fn save(path: &Path, state: &FieldState, params: &ModelParams) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(state, params))?;
    f.flush()?;
    Ok(())
}

pub fn load(path: &Path, params: Option<&ModelParams>) -> Result<FieldState> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::InitSpec;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = Grid::new(8).unwrap();
        let mut s = FieldState::random(&g, &InitSpec::default(), 5).unwrap();
        s.time = 0.123456789;
        let p = ModelParams::default();
        let bytes = encode(&s, &p);
        assert_eq!(bytes.len(), HEADER_LEN + 72 * 512);
        assert_eq!(&bytes[..4], b"BMQT");
        let back = decode(&bytes, Some(&p)).unwrap();
        assert_eq!(back, s);
        assert_eq!(encode(&back, &p), bytes);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let g = Grid::new(4).unwrap();
        let s = FieldState::equilibrium(&g, 1.0).unwrap();
        let p = ModelParams::default();
        let bytes = encode(&s, &p);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad, None).is_err());
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(decode(&bad, None).is_err());
        assert!(decode(&bytes[..bytes.len() - 1], None).is_err());
        assert!(decode(&bytes[..10], None).is_err());
        let other = ModelParams { xi: 0.1, ..Default::default() };
        assert!(decode(&bytes, Some(&other)).is_err());
        assert!(decode(&bytes, None).is_ok());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.bmqt");
        let g = Grid::new(6).unwrap();
        let s = FieldState::random(&g, &InitSpec { band: 1, ..Default::default() }, 1).unwrap();
        save(&path, &s, &ModelParams::default()).unwrap();
        assert_eq!(load(&path, Some(&ModelParams::default())).unwrap(), s);
    }
}
