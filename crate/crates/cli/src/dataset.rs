//! On-disk dataset layout.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/scans/000000.bin     x, y, z, intensity as little-endian f32
//! <dir>/labels/000000.label  instance << 16 | semantic, little-endian u32
//! <dir>/maps/000000.idx      input index of each output point, little-endian u32
//! ```
//!
//! Readers also accept a flat directory of `.bin` files with `.label` files
//! beside them.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use dgt_core::io::{read_scan_with_labels, write_labels, write_scan, Labels};
use dgt_core::{Scan, SensorSpec};

use crate::manifest::{self, Manifest};

pub const SCANS_DIR: &str = "scans";
pub const LABELS_DIR: &str = "labels";
pub const MAPS_DIR: &str = "maps";

/// Everything a run may have written into its output directory.
const OWNED_ENTRIES: &[&str] = &[
    SCANS_DIR,
    LABELS_DIR,
    MAPS_DIR,
    "mix1",
    "mix2",
    manifest::MANIFEST_FILE,
];

pub fn scan_name(index: usize) -> String {
    format!("{index:06}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanEntry {
    pub stem: String,
    pub scan: PathBuf,
    pub labels: Option<PathBuf>,
}

impl ScanEntry {
    pub fn load(&self) -> Result<Scan> {
        read_scan_with_labels(&self.scan, self.labels.as_deref())
            .with_context(|| format!("reading {}", self.scan.display()))
    }
}

/// Scans of a dataset directory in file-name order.
pub fn list_scans(dir: &Path) -> Result<Vec<ScanEntry>> {
    if !dir.is_dir() {
        bail!("input directory {} does not exist", dir.display());
    }
    let nested = dir.join(SCANS_DIR);
    let (scan_dir, label_dir) = if nested.is_dir() {
        (nested, dir.join(LABELS_DIR))
    } else {
        (dir.to_path_buf(), dir.to_path_buf())
    };
    let mut entries = Vec::new();
    for item in
        fs::read_dir(&scan_dir).with_context(|| format!("listing {}", scan_dir.display()))?
    {
        let path = item?.path();
        if path.extension().is_some_and(|e| e == "bin") && path.is_file() {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| anyhow!("non-UTF-8 file name {}", path.display()))?
                .to_string();
            let label = label_dir.join(format!("{stem}.label"));
            entries.push(ScanEntry {
                labels: label.is_file().then_some(label),
                stem,
                scan: path,
            });
        }
    }
    entries.sort_by(|a, b| a.stem.cmp(&b.stem));
    Ok(entries)
}

/// Files of `dir` with extension `ext`, sorted by name, as `(stem, path)`.
pub fn list_files(dir: &Path, ext: &str) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for item in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = item?.path();
        if path.extension().is_some_and(|e| e == ext) && path.is_file() {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_string(), path.clone()));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Make `dir` ready to receive a run's outputs. A non-empty directory is an
/// error unless `force` is set, in which case earlier run outputs are removed.
pub fn prepare_output_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(crate::usage(format!(
                "{} exists and is not a directory",
                dir.display()
            )));
        }
        let non_empty = fs::read_dir(dir)?.next().is_some();
        if non_empty && !force {
            return Err(crate::usage(format!(
                "output directory {} is not empty (pass --force to replace it)",
                dir.display()
            )));
        }
        for name in OWNED_ENTRIES {
            let p = dir.join(name);
            if p.is_dir() {
                fs::remove_dir_all(&p)?;
            } else if p.exists() {
                fs::remove_file(&p)?;
            }
        }
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

/// Create `scans/` under `dir`, plus `labels/` and `maps/` when asked.
pub fn create_layout(dir: &Path, labeled: bool, maps: bool) -> Result<()> {
    fs::create_dir_all(dir.join(SCANS_DIR))?;
    if labeled {
        fs::create_dir_all(dir.join(LABELS_DIR))?;
    }
    if maps {
        fs::create_dir_all(dir.join(MAPS_DIR))?;
    }
    Ok(())
}

pub fn labels_of(scan: &Scan) -> Option<Labels> {
    scan.labels().map(|sem| Labels {
        semantic: sem.to_vec(),
        instance: scan
            .instance_ids()
            .map(<[u16]>::to_vec)
            .unwrap_or_else(|| vec![0; sem.len()]),
    })
}

/// Write `scans/<stem>.bin` and, for labeled scans, `labels/<stem>.label`.
pub fn write_scan_files(dir: &Path, stem: &str, scan: &Scan) -> Result<()> {
    let path = dir.join(SCANS_DIR).join(format!("{stem}.bin"));
    write_scan(scan, &path).with_context(|| format!("writing {}", path.display()))?;
    if let Some(labels) = labels_of(scan) {
        let path = dir.join(LABELS_DIR).join(format!("{stem}.label"));
        write_labels(&labels, &path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

pub fn write_index_map(path: &Path, map: &[usize]) -> Result<()> {
    let mut bytes = Vec::with_capacity(map.len() * 4);
    for &i in map {
        let i = u32::try_from(i).map_err(|_| anyhow!("index {i} does not fit in u32"))?;
        bytes.extend_from_slice(&i.to_le_bytes());
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn read_index_map(path: &Path) -> Result<Vec<usize>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.len() % 4 != 0 {
        bail!("{}: index map size is not a multiple of 4", path.display());
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect())
}

/// Sensor recorded in a dataset's manifest, if any.
pub fn recorded_sensor(dir: &Path) -> Option<SensorSpec> {
    let m = Manifest::load(&manifest::for_dir(dir)).ok()?;
    serde_json::from_value(m.outputs.get("sensor")?.clone()).ok()
}
