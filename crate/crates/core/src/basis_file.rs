//! CTGB basis files.
//!
//! Layout (little-endian):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `CTGB`                            |
//! | 4      | 2    | version = 1                             |
//! | 6      | 1    | kind: 0 walsh-hadamard, 1 random-binary |
//! | 7      | 1    | ordering: 0 natural, 1 sequency, 2 n/a  |
//! | 8      | 4    | K                                       |
//! | 12     | 4    | l                                       |
//! | 16     | 4    | n                                       |
//! | 20     | 8    | seed (0 for Hadamard)                   |
//! | 28     | K·⌈l²/8⌉ | tiles, row-major bits, MSB first    |
//! | end-4  | 4    | CRC-32 (IEEE) of every preceding byte   |
//!
//! Unused bits at the end of each tile must be zero.

use crate::basis::{BasisKind, ModulationBasis};
use crate::error::{CtgiError, Result};
use crate::geometry::SuperPixelGeometry;
use crate::hadamard::HadamardOrdering;

pub const BASIS_MAGIC: &[u8; 4] = b"CTGB";
pub const BASIS_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 28;

const KIND_HADAMARD: u8 = 0;
const KIND_RANDOM: u8 = 1;
const ORDER_NATURAL: u8 = 0;
const ORDER_SEQUENCY: u8 = 1;
const ORDER_NONE: u8 = 2;

fn bytes_per_tile(l: usize) -> usize {
    (l * l).div_ceil(8)
}

/// Total encoded length for a basis of `k` tiles of side `l`.
pub fn encoded_len(k: usize, l: usize) -> usize {
    HEADER_LEN + k * bytes_per_tile(l) + 4
}

pub fn serialize_basis(basis: &ModulationBasis) -> Vec<u8> {
    let g = basis.geometry();
    let (kind, ordering, seed) = match basis.kind() {
        BasisKind::WalshHadamard { ordering } => (
            KIND_HADAMARD,
            match ordering {
                HadamardOrdering::NaturalSylvester => ORDER_NATURAL,
                HadamardOrdering::WalshSequency => ORDER_SEQUENCY,
            },
            0u64,
        ),
        BasisKind::RandomBinary { seed } => (KIND_RANDOM, ORDER_NONE, seed),
    };
    let mut out = Vec::with_capacity(encoded_len(basis.k(), g.l()));
    out.extend_from_slice(BASIS_MAGIC);
    out.extend_from_slice(&BASIS_VERSION.to_le_bytes());
    out.push(kind);
    out.push(ordering);
    out.extend_from_slice(&(basis.k() as u32).to_le_bytes());
    out.extend_from_slice(&(g.l() as u32).to_le_bytes());
    out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    out.extend_from_slice(&seed.to_le_bytes());

    let bpt = bytes_per_tile(g.l());
    for tile in basis.tiles() {
        let start = out.len();
        out.resize(start + bpt, 0);
        for (p, &v) in tile.iter().enumerate() {
            if v != 0 {
                out[start + p / 8] |= 0x80 >> (p % 8);
            }
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn decode_err(msg: impl Into<String>) -> CtgiError {
    CtgiError::Decode(msg.into())
}

fn read_u32(bytes: &[u8], at: usize) -> usize {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize
}

pub fn deserialize_basis(bytes: &[u8]) -> Result<ModulationBasis> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(decode_err(format!("truncated stream ({} bytes)", bytes.len())));
    }
    if &bytes[0..4] != BASIS_MAGIC {
        return Err(decode_err("bad magic, expected CTGB"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != BASIS_VERSION {
        return Err(decode_err(format!("unsupported version {version}")));
    }
    let k = read_u32(bytes, 8);
    let l = read_u32(bytes, 12);
    let n = read_u32(bytes, 16);
    let seed = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let geometry = SuperPixelGeometry::new(l, n).map_err(|e| decode_err(e.to_string()))?;
    if k == 0 {
        return Err(decode_err("K = 0"));
    }
    let expected = k
        .checked_mul(bytes_per_tile(l))
        .and_then(|t| t.checked_add(HEADER_LEN + 4))
        .ok_or_else(|| decode_err("header sizes overflow"))?;
    if bytes.len() != expected {
        return Err(decode_err(format!(
            "length {} does not match header (expected {expected})",
            bytes.len()
        )));
    }
    let body = &bytes[..expected - 4];
    let stored = u32::from_le_bytes(bytes[expected - 4..].try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(decode_err("checksum mismatch"));
    }

    let kind = match (bytes[6], bytes[7]) {
        (KIND_HADAMARD, ORDER_NATURAL) => BasisKind::WalshHadamard {
            ordering: HadamardOrdering::NaturalSylvester,
        },
        (KIND_HADAMARD, ORDER_SEQUENCY) => BasisKind::WalshHadamard {
            ordering: HadamardOrdering::WalshSequency,
        },
        (KIND_RANDOM, ORDER_NONE) => BasisKind::RandomBinary { seed },
        (kd, od) => return Err(decode_err(format!("invalid kind/ordering pair ({kd}, {od})"))),
    };

    let p = l * l;
    let bpt = bytes_per_tile(l);
    let tiles: Vec<Vec<u8>> = body[HEADER_LEN..]
        .chunks_exact(bpt)
        .enumerate()
        .map(|(t, chunk)| {
            for bit in p..bpt * 8 {
                if chunk[bit / 8] & (0x80 >> (bit % 8)) != 0 {
                    return Err(decode_err(format!("tile {t} has nonzero padding bits")));
                }
            }
            Ok((0..p).map(|i| (chunk[i / 8] >> (7 - i % 8)) & 1).collect())
        })
        .collect::<Result<_>>()?;
    ModulationBasis::from_tiles(geometry, kind, &tiles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_hadamard_basis, build_random_basis};

    #[test]
    fn fixed_length_k64_l8() {
        let g = SuperPixelGeometry::new(8, 4).unwrap();
        let b = build_hadamard_basis(g, HadamardOrdering::WalshSequency).unwrap();
        let bytes = serialize_basis(&b);
        assert_eq!(bytes.len(), 32 + 64 * 8);
        assert_eq!(deserialize_basis(&bytes).unwrap(), b);
    }

    #[test]
    fn padded_tiles_round_trip() {
        let g = SuperPixelGeometry::new(5, 3).unwrap();
        let b = build_random_basis(g, 64, 99, 0.5).unwrap();
        let bytes = serialize_basis(&b);
        assert_eq!(bytes.len(), 32 + 64 * 4);
        assert_eq!(deserialize_basis(&bytes).unwrap(), b);
    }

    #[test]
    fn corruption_is_detected() {
        let g = SuperPixelGeometry::new(2, 1).unwrap();
        let b = build_hadamard_basis(g, HadamardOrdering::NaturalSylvester).unwrap();
        let good = serialize_basis(&b);

        let mut bad = good.clone();
        let last = bad.len() - 1;
        bad[last] ^= 0x01;
        assert!(matches!(deserialize_basis(&bad), Err(CtgiError::Decode(m)) if m.contains("checksum")));

        let mut bad = good.clone();
        bad[HEADER_LEN] ^= 0x40;
        assert!(deserialize_basis(&bad).is_err());

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(deserialize_basis(&bad), Err(CtgiError::Decode(m)) if m.contains("magic")));

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(deserialize_basis(&bad), Err(CtgiError::Decode(m)) if m.contains("version")));

        assert!(deserialize_basis(&good[..good.len() - 1]).is_err());
        assert!(deserialize_basis(&good[..10]).is_err());
    }

    #[test]
    fn nonzero_padding_rejected() {
        let g = SuperPixelGeometry::new(3, 1).unwrap();
        let b = build_random_basis(g, 2, 5, 0.5).unwrap();
        let mut bytes = serialize_basis(&b);
        // tile 0 occupies bytes 28..30; bit 9 onward is padding
        bytes[29] |= 0x01;
        let body_len = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..body_len]);
        bytes[body_len..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(deserialize_basis(&bytes), Err(CtgiError::Decode(m)) if m.contains("padding")));
    }
}
