use std::path::Path;

use super::{read_all, write_all};
use crate::error::{Error, Result};
use crate::scan::{Point, Scan, SensorSpec};

const POINT_BYTES: usize = 16;
const LABEL_BYTES: usize = 4;

/// Per-point semantic classes and instance ids as stored in a `.label` file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Labels {
    pub semantic: Vec<u16>,
    pub instance: Vec<u16>,
}

impl Labels {
    pub fn len(&self) -> usize {
        self.semantic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.semantic.is_empty()
    }

    pub fn from_records(records: &[u32]) -> Self {
        Labels {
            semantic: records.iter().map(|&r| (r & 0xFFFF) as u16).collect(),
            instance: records.iter().map(|&r| (r >> 16) as u16).collect(),
        }
    }

    pub fn record(&self, i: usize) -> u32 {
        (self.instance[i] as u32) << 16 | self.semantic[i] as u32
    }
}

pub fn decode_scan(bytes: &[u8]) -> Result<Vec<Point>> {
    if !bytes.len().is_multiple_of(POINT_BYTES) {
        return Err(Error::MalformedScan {
            len: bytes.len() as u64,
        });
    }
    let mut points = Vec::with_capacity(bytes.len() / POINT_BYTES);
    for (index, rec) in bytes.chunks_exact(POINT_BYTES).enumerate() {
        let f = |o: usize| f32::from_le_bytes([rec[o], rec[o + 1], rec[o + 2], rec[o + 3]]);
        let p = Point::with_intensity(f(0), f(4), f(8), f(12));
        if !p.is_finite() {
            return Err(Error::NonFinitePoint { index });
        }
        points.push(p);
    }
    Ok(points)
}

pub fn encode_scan(points: &[Point]) -> Vec<u8> {
    let mut out = Vec::with_capacity(points.len() * POINT_BYTES);
    for p in points {
        out.extend_from_slice(&p.x.to_le_bytes());
        out.extend_from_slice(&p.y.to_le_bytes());
        out.extend_from_slice(&p.z.to_le_bytes());
        out.extend_from_slice(&p.intensity.to_le_bytes());
    }
    out
}

/// Read a `.bin` scan. The scan carries the default [`SensorSpec`]; callers
/// that know the sensor attach it with [`Scan::with_sensor`].
pub fn read_scan(path: impl AsRef<Path>) -> Result<Scan> {
    let path = path.as_ref();
    let points = decode_scan(&read_all(path)?)?;
    Scan::new(points, SensorSpec::default())
}

pub fn write_scan(scan: &Scan, path: impl AsRef<Path>) -> Result<()> {
    write_all(path.as_ref(), &encode_scan(scan.points()))
}

pub fn decode_labels(bytes: &[u8]) -> Result<Labels> {
    if !bytes.len().is_multiple_of(LABEL_BYTES) {
        return Err(Error::MalformedLabels {
            len: bytes.len() as u64,
        });
    }
    let records: Vec<u32> = bytes
        .chunks_exact(LABEL_BYTES)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Labels::from_records(&records))
}

pub fn encode_labels(labels: &Labels) -> Vec<u8> {
    let mut out = Vec::with_capacity(labels.len() * LABEL_BYTES);
    for i in 0..labels.len() {
        out.extend_from_slice(&labels.record(i).to_le_bytes());
    }
    out
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Labels> {
    decode_labels(&read_all(path.as_ref())?)
}

pub fn write_labels(labels: &Labels, path: impl AsRef<Path>) -> Result<()> {
    if labels.semantic.len() != labels.instance.len() {
        return Err(Error::LengthMismatch {
            what: "instance ids",
            expected: labels.semantic.len(),
            got: labels.instance.len(),
        });
    }
    write_all(path.as_ref(), &encode_labels(labels))
}

/// Read a scan and, when `label_path` is given, pair it with its labels. A
/// count mismatch between the two files is reported here.
pub fn read_scan_with_labels(
    scan_path: impl AsRef<Path>,
    label_path: Option<&Path>,
) -> Result<Scan> {
    let scan = read_scan(scan_path)?;
    match label_path {
        None => Ok(scan),
        Some(lp) => {
            let labels = read_labels(lp)?;
            scan.with_labels(labels.semantic)?
                .with_instance_ids(labels.instance)
        }
    }
}
