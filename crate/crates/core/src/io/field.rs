use std::path::Path;

use super::{read_all, write_all};
use crate::error::{Error, Result};
use crate::numerics::{ClassLayout, FeatureField, ProbabilityField};

pub const FIELD_VERSION: u32 = 1;
const HEADER_BYTES: usize = 12;

/// A dense row-major `f32` matrix as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < HEADER_BYTES {
        return Err(Error::MalformedField(format!(
            "{} bytes is shorter than the 12-byte header",
            bytes.len()
        )));
    }
    let word = |o: usize| u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
    let (rows, cols, version) = (word(0) as usize, word(4) as usize, word(8));
    if version != FIELD_VERSION {
        return Err(Error::MalformedField(format!(
            "unsupported version {version}"
        )));
    }
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::MalformedField("shape overflows".into()))?;
    let body = &bytes[HEADER_BYTES..];
    if body.len() != expected {
        return Err(Error::MalformedField(format!(
            "{rows}x{cols} needs {expected} payload bytes, found {}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Matrix { rows, cols, data })
}

pub fn encode_matrix(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_BYTES + m.data.len() * 4);
    out.extend_from_slice(&(m.rows as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols as u32).to_le_bytes());
    out.extend_from_slice(&FIELD_VERSION.to_le_bytes());
    for v in &m.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    decode_matrix(&read_all(path.as_ref())?)
}

pub fn write_matrix(m: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    if m.data.len() != m.rows * m.cols {
        return Err(Error::MalformedField(
            "data length does not match shape".into(),
        ));
    }
    write_all(path.as_ref(), &encode_matrix(m))
}

/// Rows are validated after widening to `f64`; each must still sum to one
/// within [`crate::numerics::ROW_SUM_TOLERANCE`].
pub fn read_probability_field(
    path: impl AsRef<Path>,
    layout: ClassLayout,
) -> Result<ProbabilityField> {
    let m = read_matrix(path)?;
    let data: Vec<f64> = m.data.iter().map(|&v| v as f64).collect();
    ProbabilityField::new(m.rows, m.cols, data, layout)
}

pub fn write_probability_field(field: &ProbabilityField, path: impl AsRef<Path>) -> Result<()> {
    write_matrix(
        &Matrix {
            rows: field.rows(),
            cols: field.cols(),
            data: field.as_slice().iter().map(|&v| v as f32).collect(),
        },
        path,
    )
}

pub fn read_feature_field(path: impl AsRef<Path>) -> Result<FeatureField> {
    let m = read_matrix(path)?;
    FeatureField::new(m.rows, m.cols, m.data.iter().map(|&v| v as f64).collect())
}

pub fn write_feature_field(field: &FeatureField, path: impl AsRef<Path>) -> Result<()> {
    write_matrix(
        &Matrix {
            rows: field.rows(),
            cols: field.dim(),
            data: field.as_slice().iter().map(|&v| v as f32).collect(),
        },
        path,
    )
}
