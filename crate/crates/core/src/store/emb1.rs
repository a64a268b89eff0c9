//! EMB1: `b"EMB1"`, u32 LE dimension, u32 LE row count, then
//! `count * dim` little-endian binary32 values in row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"EMB1";
const HEADER_LEN: usize = 12;

pub fn encode_embeddings<R: AsRef<[f32]>>(rows: &[R]) -> Result<Vec<u8>> {
    let first = rows.first().ok_or(Error::NoRows)?;
    let dim = first.as_ref().len();
    if dim == 0 {
        return Err(Error::param("dim", "rows must have at least one component"));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + rows.len() * dim * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(rows.len() as u32).to_le_bytes());
    for row in rows {
        let row = row.as_ref();
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: row.len(),
            });
        }
        for x in row {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses an EMB1 buffer, returning `(dim, rows)`.
pub fn decode_embeddings(bytes: &[u8]) -> Result<(usize, Vec<Vec<f32>>)> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic { expected: "EMB1" });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated(format!("header needs {HEADER_LEN} bytes, found {}", bytes.len())));
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(Error::param("dim", "header declares zero dimension"));
    }
    if count == 0 {
        return Err(Error::NoRows);
    }
    let payload = &bytes[HEADER_LEN..];
    let needed = count as u64 * dim as u64 * 4;
    if (payload.len() as u64) < needed {
        return Err(Error::Truncated(format!(
            "header declares {count} rows of dim {dim} ({needed} bytes), {} bytes present",
            payload.len()
        )));
    }
    if payload.len() as u64 > needed {
        return Err(Error::Truncated(format!(
            "{} trailing bytes after {count} rows",
            payload.len() as u64 - needed
        )));
    }

    let mut rows = Vec::with_capacity(count);
    for (row, chunk) in payload.chunks_exact(dim * 4).enumerate() {
        let v: Vec<f32> = chunk
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if let Some(col) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        rows.push(v);
    }
    Ok((dim, rows))
}

pub fn write_embedding_file<R: AsRef<[f32]>>(rows: &[R], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_embeddings(rows)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_embedding_file(path: impl AsRef<Path>) -> Result<Vec<Vec<f32>>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_embeddings(&bytes).map(|(_, rows)| rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_row_layout() {
        let bytes = encode_embeddings(&[vec![1.0f32, 2.0]]).unwrap();
        assert_eq!(bytes.len(), 20);
        assert_eq!(&bytes[..4], b"EMB1");
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[16..20], &2.0f32.to_le_bytes());
    }

    #[test]
    fn empty_list_rejected() {
        let rows: Vec<Vec<f32>> = vec![];
        let err = encode_embeddings(&rows).unwrap_err();
        assert_eq!(err.to_string(), "no rows");
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = encode_embeddings(&[vec![1.0f32, 2.0], vec![1.0]]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, found: 1 }));
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode_embeddings(&[vec![1.0f32]]).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        let err = decode_embeddings(&bytes).unwrap_err();
        assert!(err.to_string().contains("bad magic"));
    }

    #[test]
    fn truncated_payload() {
        let rows: Vec<Vec<f32>> = (0..10).map(|i| vec![i as f32; 3]).collect();
        let bytes = encode_embeddings(&rows).unwrap();
        let cut = &bytes[..HEADER_LEN + 5 * 3 * 4];
        let err = decode_embeddings(cut).unwrap_err();
        assert!(err.to_string().contains("truncated"));
    }

    #[test]
    fn non_finite_rejected() {
        let mut bytes = encode_embeddings(&[vec![1.0f32, 2.0]]).unwrap();
        bytes[16..20].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(decode_embeddings(&bytes), Err(Error::NonFinite { row: 0, col: 1 })));
    }

    #[test]
    fn file_round_trip_hundred_vectors() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<f32>> = (0..100)
            .map(|_| (0..16).map(|_| rng.random_range(-1e3f32..1e3)).collect())
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cell.emb");
        write_embedding_file(&rows, &path).unwrap();
        let back = read_embedding_file(&path).unwrap();
        assert_eq!(rows.len(), back.len());
        for (a, b) in rows.iter().zip(&back) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn missing_file_is_io() {
        let err = read_embedding_file("/nonexistent/cell.emb").unwrap_err();
        assert!(err.is_io());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            dim in 1usize..8,
            raw in prop::collection::vec(prop::num::f32::NORMAL | prop::num::f32::SUBNORMAL | prop::num::f32::ZERO, 1..64),
        ) {
            let rows: Vec<Vec<f32>> = raw.chunks(dim).filter(|c| c.len() == dim).map(|c| c.to_vec()).collect();
            prop_assume!(!rows.is_empty());
            let (d, back) = decode_embeddings(&encode_embeddings(&rows).unwrap()).unwrap();
            prop_assert_eq!(d, dim);
            for (a, b) in rows.iter().zip(&back) {
                for (x, y) in a.iter().zip(b) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
    }
}
