//! Versioned on-disk container shared by every persisted artifact.
//!
//! Layout: 8-byte magic, little-endian `u16` format version, one kind byte,
//! little-endian `u64` payload length, the JSON payload, and the 32-byte
//! SHA-256 digest of the payload. Floats are written with shortest
//! round-trip formatting and parsed with correct rounding, so reading an
//! archive back reproduces every `f64` bit for bit.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MIDSARC\0";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ArchiveKind {
    Params = 1,
    Gan = 2,
    Ensemble = 3,
    Dataset = 4,
    Plan = 5,
}

impl ArchiveKind {
    fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            1 => Self::Params,
            2 => Self::Gan,
            3 => Self::Ensemble,
            4 => Self::Dataset,
            5 => Self::Plan,
            _ => return None,
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn encode<T: Serialize>(kind: ArchiveKind, value: &T) -> Result<Vec<u8>> {
    let payload = serde_json::to_vec(value).map_err(|e| Error::Archive(e.to_string()))?;
    let mut out = Vec::with_capacity(payload.len() + 51);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(kind as u8);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&Sha256::digest(&payload));
    Ok(out)
}

pub fn decode<T: DeserializeOwned>(kind: ArchiveKind, bytes: &[u8]) -> Result<T> {
    let header = MAGIC.len() + 2 + 1 + 8;
    if bytes.len() < header + 32 || &bytes[..8] != MAGIC {
        return Err(Error::Archive("not an archive".into()));
    }
    let version = u16::from_le_bytes([bytes[8], bytes[9]]);
    if version != FORMAT_VERSION {
        return Err(Error::Archive(format!("unsupported version {version}")));
    }
    match ArchiveKind::from_byte(bytes[10]) {
        Some(k) if k == kind => {}
        other => {
            return Err(Error::Archive(format!(
                "expected {kind:?} archive, found {other:?}"
            )))
        }
    }
    let len = u64::from_le_bytes(bytes[11..19].try_into().unwrap()) as usize;
    if bytes.len() != header + len + 32 {
        return Err(Error::Archive("truncated archive".into()));
    }
    let payload = &bytes[header..header + len];
    if Sha256::digest(payload).as_slice() != &bytes[header + len..] {
        return Err(Error::Archive("payload digest mismatch".into()));
    }
    serde_json::from_slice(payload).map_err(|e| Error::Archive(e.to_string()))
}

pub fn write<T: Serialize>(path: &Path, kind: ArchiveKind, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, encode(kind, value)?).map_err(|e| Error::io(path, e))
}

pub fn read<T: DeserializeOwned>(path: &Path, kind: ArchiveKind) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(kind, &bytes)
}

/// Hash of the archive bytes written for `value`.
pub fn content_hash<T: Serialize>(kind: ArchiveKind, value: &T) -> Result<String> {
    Ok(sha256_hex(&encode(kind, value)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_bit_exactly() {
        let values = vec![0.1, -0.0, 1e-310, std::f64::consts::PI, 1.0 / 3.0, f64::MAX];
        let bytes = encode(ArchiveKind::Params, &values).unwrap();
        let back: Vec<f64> = decode(ArchiveKind::Params, &bytes).unwrap();
        for (a, b) in values.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_wrong_kind_and_corruption() {
        let mut bytes = encode(ArchiveKind::Plan, &vec![1u32, 2, 3]).unwrap();
        assert!(decode::<Vec<u32>>(ArchiveKind::Params, &bytes).is_err());
        let n = bytes.len();
        bytes[n - 40] ^= 1;
        assert!(decode::<Vec<u32>>(ArchiveKind::Plan, &bytes).is_err());
    }
}
