//! Reader and writer for the IDX tensor format (big-endian header, used by MNIST).
//!
//! Layout: two zero bytes, a type code, the number of dimensions, then one
//! big-endian `u32` per dimension, then the row-major payload.

use std::path::Path;

use thiserror::Error;

use crate::error::{Error, Result};
use crate::numeric::DenseMatrix;

pub const TYPE_U8: u8 = 0x08;
pub const TYPE_F32: u8 = 0x0D;
pub const TYPE_F64: u8 = 0x0E;

/// Parse failures; `offset` is the byte position at which the problem was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdxError {
    #[error("bad IDX magic {found:#010x} at byte offset {offset}")]
    BadMagic { offset: usize, found: u32 },
    #[error("unsupported IDX element type {code:#04x} at byte offset {offset}")]
    UnsupportedType { offset: usize, code: u8 },
    #[error("IDX rank {found} at byte offset {offset} is not valid here (expected {expected})")]
    BadRank {
        offset: usize,
        expected: &'static str,
        found: u8,
    },
    #[error("IDX data truncated at byte offset {offset} ({needed} bytes required)")]
    Truncated { offset: usize, needed: usize },
    #[error("{extra} unexpected trailing bytes at byte offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("label count {labels} at byte offset {offset} does not match image count {images}")]
    CountMismatch {
        offset: usize,
        images: usize,
        labels: usize,
    },
    #[error("label {value} at index {index} does not fit in an unsigned byte")]
    LabelTooLarge { index: usize, value: usize },
}

struct Header {
    code: u8,
    dims: Vec<usize>,
    data_offset: usize,
}

fn read_header(bytes: &[u8]) -> Result<Header, IdxError> {
    if bytes.len() < 4 {
        return Err(IdxError::Truncated {
            offset: bytes.len(),
            needed: 4,
        });
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(IdxError::BadMagic {
            offset: 0,
            found: u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]),
        });
    }
    let code = bytes[2];
    if !matches!(code, TYPE_U8 | TYPE_F32 | TYPE_F64) {
        return Err(IdxError::UnsupportedType { offset: 2, code });
    }
    let rank = bytes[3] as usize;
    let data_offset = 4 + 4 * rank;
    if bytes.len() < data_offset {
        return Err(IdxError::Truncated {
            offset: bytes.len(),
            needed: data_offset,
        });
    }
    let dims = (0..rank)
        .map(|d| {
            let o = 4 + 4 * d;
            u32::from_be_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize
        })
        .collect();
    Ok(Header {
        code,
        dims,
        data_offset,
    })
}

fn elem_size(code: u8) -> usize {
    match code {
        TYPE_F32 => 4,
        TYPE_F64 => 8,
        _ => 1,
    }
}

fn payload<'a>(bytes: &'a [u8], h: &Header) -> Result<&'a [u8], IdxError> {
    let count = h.dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    let needed = count
        .and_then(|c| c.checked_mul(elem_size(h.code)))
        .and_then(|n| n.checked_add(h.data_offset))
        .unwrap_or(usize::MAX);
    if bytes.len() < needed {
        return Err(IdxError::Truncated {
            offset: bytes.len(),
            needed,
        });
    }
    if bytes.len() > needed {
        return Err(IdxError::TrailingBytes {
            offset: needed,
            extra: bytes.len() - needed,
        });
    }
    Ok(&bytes[h.data_offset..])
}

/// Images as one row per item; `u8` pixels are scaled by 1/255, float types are kept as is.
pub fn parse_idx_images(bytes: &[u8]) -> Result<DenseMatrix, IdxError> {
    let h = read_header(bytes)?;
    if h.dims.len() < 2 {
        return Err(IdxError::BadRank {
            offset: 3,
            expected: ">= 2",
            found: h.dims.len() as u8,
        });
    }
    let data = payload(bytes, &h)?;
    let n = h.dims[0];
    let width: usize = h.dims[1..].iter().product();
    let values: Vec<f64> = match h.code {
        TYPE_U8 => data.iter().map(|&b| f64::from(b) / 255.0).collect(),
        TYPE_F32 => data
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_be_bytes([c[0], c[1], c[2], c[3]])))
            .collect(),
        _ => data
            .chunks_exact(8)
            .map(|c| f64::from_be_bytes(c.try_into().expect("8-byte chunk")))
            .collect(),
    };
    Ok(DenseMatrix::from_vec(n, width, values).expect("payload length checked"))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>, IdxError> {
    let h = read_header(bytes)?;
    if h.code != TYPE_U8 {
        return Err(IdxError::UnsupportedType {
            offset: 2,
            code: h.code,
        });
    }
    if h.dims.len() != 1 {
        return Err(IdxError::BadRank {
            offset: 3,
            expected: "1",
            found: h.dims.len() as u8,
        });
    }
    Ok(payload(bytes, &h)?.iter().map(|&b| b as usize).collect())
}

/// Parses an image file and its label file, checking that the counts agree.
pub fn parse_idx_pair(images: &[u8], labels: &[u8]) -> Result<(DenseMatrix, Vec<usize>), IdxError> {
    let x = parse_idx_images(images)?;
    let y = parse_idx_labels(labels)?;
    if x.rows() != y.len() {
        return Err(IdxError::CountMismatch {
            offset: 4,
            images: x.rows(),
            labels: y.len(),
        });
    }
    Ok((x, y))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads an image/label file pair from disk.
pub fn load_idx(images: &Path, labels: &Path) -> Result<(DenseMatrix, Vec<usize>)> {
    let xb = read_file(images)?;
    let yb = read_file(labels)?;
    Ok(parse_idx_pair(&xb, &yb)?)
}

fn header(code: u8, dims: &[usize]) -> Vec<u8> {
    let mut out = vec![0, 0, code, dims.len() as u8];
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out
}

/// Encodes rows as `f64` IDX with dims `[rows, cols]`; reloading is bit-exact.
pub fn encode_idx_f64(x: &DenseMatrix) -> Vec<u8> {
    let mut out = header(TYPE_F64, &[x.rows(), x.cols()]);
    for v in x.data() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

/// Encodes `[0, 1]` pixels as `u8` IDX with the given trailing dims (e.g. `[28, 28]`).
pub fn encode_idx_u8(x: &DenseMatrix, item_dims: &[usize]) -> Result<Vec<u8>> {
    let width: usize = item_dims.iter().product();
    crate::error::check_len("IDX item dims", x.cols(), width)?;
    let mut dims = vec![x.rows()];
    dims.extend_from_slice(item_dims);
    let mut out = header(TYPE_U8, &dims);
    out.extend(
        x.data()
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    Ok(out)
}

pub fn encode_idx_labels(labels: &[usize]) -> Result<Vec<u8>, IdxError> {
    let mut out = header(TYPE_U8, &[labels.len()]);
    for (index, &value) in labels.iter().enumerate() {
        let b = u8::try_from(value).map_err(|_| IdxError::LabelTooLarge { index, value })?;
        out.push(b);
    }
    Ok(out)
}
