//! The emb-v1 interchange format.
//!
//! A file is one UTF-8 JSON header line
//! `{"format":"emb-v1","count":N,"dim":D,"dtype":"f32le","model":"<name>"}`
//! terminated by LF, followed by exactly `N·D` little-endian binary32 values
//! in row-major order. Row `i` belongs to line `i` of the corpus TSV.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, RowMatrix};

pub const FORMAT: &str = "emb-v1";
pub const DTYPE: &str = "f32le";
const MAX_HEADER_BYTES: usize = 64 * 1024;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    count: u64,
    dim: u64,
    dtype: String,
    model: String,
}

/// Dense `n × d` embedding matrix tagged with the encoder that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub model_name: String,
    pub data: DenseMatrix<f32>,
}

impl EmbeddingMatrix {
    pub fn new(model_name: impl Into<String>, data: DenseMatrix<f32>) -> Result<Self> {
        let m = EmbeddingMatrix {
            model_name: model_name.into(),
            data,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.data.n_rows()
    }

    pub fn dim(&self) -> usize {
        self.data.n_cols()
    }

    fn validate(&self) -> Result<()> {
        if self.n() == 0 {
            return Err(Error::Invalid("embedding matrix has no rows".into()));
        }
        if self.dim() == 0 {
            return Err(Error::Invalid(
                "embedding dimension must be positive".into(),
            ));
        }
        if let Some((row, col)) = self.data.find_non_finite() {
            return Err(Error::NonFinite { row, col });
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let header = Header {
            format: FORMAT.into(),
            count: self.n() as u64,
            dim: self.dim() as u64,
            dtype: DTYPE.into(),
            model: self.model_name.clone(),
        };
        let mut out = serde_json::to_vec(&header)?;
        out.push(b'\n');
        out.reserve(self.data.as_slice().len() * 4);
        for v in self.data.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8], expected_n: Option<usize>) -> Result<Self> {
        let newline = bytes
            .iter()
            .take(MAX_HEADER_BYTES)
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Header("missing header line".into()))?;
        let header: Header =
            serde_json::from_slice(&bytes[..newline]).map_err(|e| Error::Header(e.to_string()))?;
        if header.format != FORMAT {
            return Err(Error::Header(format!(
                "unsupported format {:?}",
                header.format
            )));
        }
        if header.dtype != DTYPE {
            return Err(Error::Header(format!(
                "unsupported dtype {:?}",
                header.dtype
            )));
        }
        if header.count == 0 || header.dim == 0 {
            return Err(Error::Header("count and dim must be positive".into()));
        }
        let payload = &bytes[newline + 1..];
        let expected = header
            .count
            .checked_mul(header.dim)
            .and_then(|v| v.checked_mul(4))
            .ok_or_else(|| Error::Header("count·dim overflows".into()))?;
        if expected != payload.len() as u64 {
            return Err(Error::PayloadLength {
                expected,
                found: payload.len() as u64,
            });
        }
        let (n, d) = (header.count as usize, header.dim as usize);
        if let Some(want) = expected_n {
            if want != n {
                return Err(Error::Alignment {
                    expected: want,
                    found: n,
                });
            }
        }
        let mut values = Vec::with_capacity(n * d);
        for (k, chunk) in payload.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().expect("chunk of 4 bytes"));
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: k / d,
                    col: k % d,
                });
            }
            values.push(v);
        }
        Ok(EmbeddingMatrix {
            model_name: header.model,
            data: DenseMatrix::from_vec(n, d, values)?,
        })
    }
}

pub fn save_embeddings(matrix: &EmbeddingMatrix, path: &Path) -> Result<()> {
    let bytes = matrix.encode()?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_embeddings(path: &Path, expected_n: Option<usize>) -> Result<EmbeddingMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingMatrix::decode(&bytes, expected_n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, d: usize) -> EmbeddingMatrix {
        let data = (0..n * d).map(|i| i as f32 * 0.25 - 1.0).collect();
        EmbeddingMatrix::new("test", DenseMatrix::from_vec(n, d, data).unwrap()).unwrap()
    }

    #[test]
    fn header_and_payload_layout() {
        let bytes = sample(2, 3).encode().unwrap();
        let header = br#"{"format":"emb-v1","count":2,"dim":3,"dtype":"f32le","model":"test"}"#;
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes[header.len()], b'\n');
        assert_eq!(bytes.len() - header.len() - 1, 24);
        assert_eq!(
            &bytes[header.len() + 1..header.len() + 5],
            &(-1.0f32).to_le_bytes()
        );
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.bin");
        let m = sample(5, 2);
        save_embeddings(&m, &p).unwrap();
        assert_eq!(load_embeddings(&p, Some(5)).unwrap(), m);
        assert!(matches!(
            load_embeddings(&p, Some(6)),
            Err(Error::Alignment {
                expected: 6,
                found: 5
            })
        ));
    }

    #[test]
    fn empty_matrix_rejected() {
        let m = EmbeddingMatrix {
            model_name: "x".into(),
            data: DenseMatrix::zeros(0, 3),
        };
        assert!(m.encode().is_err());
    }

    #[test]
    fn short_payload_rejected() {
        let mut bytes = sample(5, 2).encode().unwrap();
        bytes.pop();
        let err = EmbeddingMatrix::decode(&bytes, None).unwrap_err();
        assert!(err.to_string().contains("payload length mismatch"));
    }

    #[test]
    fn nan_reports_position() {
        let mut bytes = sample(3, 2).encode().unwrap();
        let start = bytes.len() - 3 * 4;
        bytes[start..start + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        let err = EmbeddingMatrix::decode(&bytes, None).unwrap_err();
        assert_eq!(err.to_string(), "non-finite value at row 1, col 1");
    }

    #[test]
    fn unknown_header_field_rejected() {
        let mut bytes =
            br#"{"format":"emb-v1","count":1,"dim":1,"dtype":"f32le","model":"m","x":1}"#.to_vec();
        bytes.push(b'\n');
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        assert!(EmbeddingMatrix::decode(&bytes, None).is_err());
    }
}
