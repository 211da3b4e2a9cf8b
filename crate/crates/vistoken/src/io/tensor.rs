//! Binary tensor files.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size      | field                          |
//! |--------|-----------|--------------------------------|
//! | 0      | 4         | magic `b"FVLM"`                |
//! | 4      | 4         | version `u32` = 1              |
//! | 8      | 1         | dtype `u8` = 1 (`f32`)         |
//! | 9      | 1         | rank `u8` (1 or 2)             |
//! | 10     | 2         | zero padding                   |
//! | 12     | 8 · rank  | dims, `u64` each               |
//! | …      | 4 · ∏dims | row-major `f32` payload        |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::{FeatureMatrix, ScoreVector};

pub const MAGIC: [u8; 4] = *b"FVLM";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 1;
const HEADER_LEN: u64 = 12;

/// Contents of a tensor file.
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Vector(ScoreVector),
    Matrix(FeatureMatrix),
}

impl Tensor {
    pub fn into_matrix(self) -> Result<FeatureMatrix> {
        match self {
            Tensor::Matrix(m) => Ok(m),
            Tensor::Vector(v) => Err(Error::Shape(format!("expected a rank-2 tensor, found a vector of {}", v.len()))),
        }
    }

    pub fn into_vector(self) -> Result<ScoreVector> {
        match self {
            Tensor::Vector(v) => Ok(v),
            Tensor::Matrix(m) => {
                Err(Error::Shape(format!("expected a rank-1 tensor, found a {}x{} matrix", m.rows(), m.cols())))
            }
        }
    }
}

fn format_err(offset: u64, message: impl Into<String>) -> Error {
    Error::Format { offset, message: message.into() }
}

fn encode(dims: &[u64], values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN as usize + 8 * dims.len() + 4 * values.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(DTYPE_F32);
    out.push(dims.len() as u8);
    out.extend_from_slice(&[0, 0]);
    for d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn encode_matrix(m: &FeatureMatrix) -> Vec<u8> {
    encode(&[m.rows() as u64, m.cols() as u64], m.as_slice())
}

pub fn encode_vector(v: &ScoreVector) -> Vec<u8> {
    encode(&[v.len() as u64], v.as_slice())
}

/// Parses a complete tensor file image.
pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    let mut r = bytes;
    decode_from(&mut r, Some(bytes.len() as u64))
}

fn read_exact_at<R: Read>(r: &mut R, buf: &mut [u8], offset: u64, what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => format_err(offset, format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

fn decode_from<R: Read>(r: &mut R, total_len: Option<u64>) -> Result<Tensor> {
    let mut header = [0u8; HEADER_LEN as usize];
    read_exact_at(r, &mut header, 0, "header")?;
    if header[0..4] != MAGIC {
        return Err(format_err(0, format!("bad magic {:?}", String::from_utf8_lossy(&header[0..4]))));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(format_err(4, format!("unsupported version {version}")));
    }
    if header[8] != DTYPE_F32 {
        return Err(format_err(8, format!("unsupported dtype {}", header[8])));
    }
    let rank = header[9];
    if header[10..12] != [0, 0] {
        return Err(format_err(10, "nonzero padding"));
    }
    if !(1..=2).contains(&rank) {
        return Err(Error::UnsupportedRank(rank));
    }

    let mut dims = Vec::with_capacity(rank as usize);
    for k in 0..rank as u64 {
        let mut buf = [0u8; 8];
        read_exact_at(r, &mut buf, HEADER_LEN + 8 * k, "dims")?;
        dims.push(u64::from_le_bytes(buf));
    }
    let payload_offset = HEADER_LEN + 8 * rank as u64;
    let count = dims
        .iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d))
        .filter(|&c| c.checked_mul(4).is_some_and(|b| b <= isize::MAX as u64))
        .ok_or_else(|| format_err(HEADER_LEN, format!("dims {dims:?} overflow addressable memory")))?;
    if let Some(total) = total_len {
        let available = total.saturating_sub(payload_offset);
        if available < count * 4 {
            return Err(format_err(
                payload_offset + available,
                format!("truncated payload: need {} bytes, have {available}", count * 4),
            ));
        }
    }

    let mut payload = vec![0u8; (count * 4) as usize];
    read_exact_at(r, &mut payload, payload_offset, "payload")?;
    let values: Vec<f64> =
        payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();

    match dims[..] {
        [_] => Ok(Tensor::Vector(ScoreVector::raw(values)?)),
        [rows, cols] => Ok(Tensor::Matrix(FeatureMatrix::new(rows as usize, cols as usize, values)?)),
        _ => unreachable!("rank checked above"),
    }
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::File { path: path.to_owned(), source })?;
    let len = file.metadata().map(|m| m.len()).ok();
    decode_from(&mut BufReader::new(file), len)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::File { path: path.to_owned(), source })?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes)?;
    w.flush()?;
    Ok(())
}

pub fn write_matrix(path: impl AsRef<Path>, m: &FeatureMatrix) -> Result<()> {
    write_bytes(path.as_ref(), &encode_matrix(m))
}

pub fn write_vector(path: impl AsRef<Path>, v: &ScoreVector) -> Result<()> {
    write_bytes(path.as_ref(), &encode_vector(v))
}
