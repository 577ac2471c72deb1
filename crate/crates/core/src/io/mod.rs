//! On-disk formats.
//!
//! * `.bin`: little-endian `f32 × 4` per point (x, y, z, intensity).
//! * `.label`: little-endian `u32` per point; low 16 bits semantic class,
//!   high 16 bits instance id.
//! * `.profile`: UTF-8 `key: value` lines ending in a `counts:` line.
//! * field files: three little-endian `u32` (rows, cols, version) followed by
//!   `rows × cols` little-endian `f32` in row-major order.

mod bin;
mod field;
mod profile;

pub use bin::{
    decode_labels, decode_scan, encode_labels, encode_scan, read_labels, read_scan,
    read_scan_with_labels, write_labels, write_scan, Labels,
};
pub use field::{
    decode_matrix, encode_matrix, read_feature_field, read_matrix, read_probability_field,
    write_feature_field, write_matrix, write_probability_field, Matrix, FIELD_VERSION,
};
pub use profile::{format_profile, load_profile, parse_profile, save_profile, PROFILE_VERSION};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_all(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
