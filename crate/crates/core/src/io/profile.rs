use std::path::Path;

use super::{read_all, write_all};
use crate::density::DensityProfile;
use crate::error::{Error, Result};
use crate::scan::RadialPartition;

pub const PROFILE_VERSION: &str = "dgt-profile/1";

pub fn format_profile(profile: &DensityProfile) -> Result<String> {
    let domain = profile.domain();
    if domain.contains(['\n', '\r']) {
        return Err(Error::MalformedProfile(
            "domain name contains a line break".into(),
        ));
    }
    if profile.scan_count() == 0 {
        return Err(Error::MalformedProfile("scan_count must be >= 1".into()));
    }
    let part = profile.partition();
    let counts: Vec<String> = profile.totals().iter().map(u64::to_string).collect();
    Ok(format!(
        "version: {PROFILE_VERSION}\ndomain: {domain}\nm: {}\nr_max: {}\nmode: {}\nscan_count: {}\ncounts: {}\n",
        part.m(),
        part.r_max(),
        part.mode(),
        profile.scan_count(),
        counts.join(",")
    ))
}

pub fn parse_profile(text: &str) -> Result<DensityProfile> {
    let mut version = None;
    let mut domain = None;
    let mut m = None;
    let mut r_max = None;
    let mut mode = None;
    let mut scan_count = None;
    let mut counts = None;

    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (key, value) = line.split_once(':').ok_or_else(|| {
            Error::MalformedProfile(format!("line {}: expected `key: value`", lineno + 1))
        })?;
        let value = value.strip_prefix(' ').unwrap_or(value);
        let slot = match key {
            "version" => &mut version,
            "domain" => &mut domain,
            "m" => &mut m,
            "r_max" => &mut r_max,
            "mode" => &mut mode,
            "scan_count" => &mut scan_count,
            "counts" => &mut counts,
            other => {
                return Err(Error::MalformedProfile(format!("unknown key {other:?}")));
            }
        };
        if slot.replace(value).is_some() {
            return Err(Error::MalformedProfile(format!("duplicate key {key:?}")));
        }
    }

    let missing = |k: &str| Error::MalformedProfile(format!("missing key {k:?}"));
    let version = version.ok_or_else(|| missing("version"))?;
    if version != PROFILE_VERSION {
        return Err(Error::ProfileVersion(version.to_string()));
    }
    let bad = |k: &str, v: &str| Error::MalformedProfile(format!("bad {k} value {v:?}"));
    let domain = domain.ok_or_else(|| missing("domain"))?.to_string();
    let m_raw = m.ok_or_else(|| missing("m"))?;
    let m: usize = m_raw.parse().map_err(|_| bad("m", m_raw))?;
    let r_raw = r_max.ok_or_else(|| missing("r_max"))?;
    let r_max: f64 = r_raw.parse().map_err(|_| bad("r_max", r_raw))?;
    let mode = mode.ok_or_else(|| missing("mode"))?.parse()?;
    let sc_raw = scan_count.ok_or_else(|| missing("scan_count"))?;
    let scan_count: u64 = sc_raw.parse().map_err(|_| bad("scan_count", sc_raw))?;
    if scan_count == 0 {
        return Err(Error::MalformedProfile("scan_count must be >= 1".into()));
    }
    let counts_raw = counts.ok_or_else(|| missing("counts"))?;
    let totals = if counts_raw.trim().is_empty() {
        Vec::new()
    } else {
        counts_raw
            .split(',')
            .map(|c| c.trim().parse::<u64>().map_err(|_| bad("counts", c)))
            .collect::<Result<Vec<_>>>()?
    };
    if totals.len() != m {
        return Err(Error::ProfileLengthMismatch {
            m,
            got: totals.len(),
        });
    }
    let partition = RadialPartition::new(m, r_max, mode)?;
    DensityProfile::from_totals(partition, domain, totals, scan_count)
}

pub fn save_profile(profile: &DensityProfile, path: impl AsRef<Path>) -> Result<()> {
    write_all(path.as_ref(), format_profile(profile)?.as_bytes())
}

pub fn load_profile(path: impl AsRef<Path>) -> Result<DensityProfile> {
    let path = path.as_ref();
    let bytes = read_all(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| Error::MalformedProfile(format!("{} is not UTF-8", path.display())))?;
    parse_profile(text)
}
