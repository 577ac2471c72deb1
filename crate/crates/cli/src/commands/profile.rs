use std::path::PathBuf;

use anyhow::{Context, Result};
use dgt_core::density::{merge_profiles, DensityProfile};
use dgt_core::io::save_profile;
use dgt_core::DistanceMode;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::{partition, serde_enum};
use crate::dataset;
use crate::manifest::{self, Manifest};
use crate::Command;

/// Scans per accumulation chunk. Fixed so the merge order never depends on
/// the thread count.
const CHUNK: usize = 16;

/// Number of coarse distance bands in summaries.
pub const SUMMARY_BANDS: usize = 5;

#[derive(Debug, Clone, clap::Args, Serialize, Deserialize)]
pub struct ProfileArgs {
    /// Dataset directory.
    #[arg(long)]
    pub input: PathBuf,
    /// Profile file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Domain name stored in the profile (default: input directory name).
    #[arg(long)]
    pub domain: Option<String>,
    /// Number of radial areas.
    #[arg(long, default_value_t = 50)]
    pub m: usize,
    /// Radius in meters covered by the areas.
    #[arg(long, default_value_t = 100.0)]
    pub r_max: f64,
    /// Distance used for binning: range3d or planar.
    #[arg(long, default_value = "range3d", value_parser = serde_enum::<DistanceMode>)]
    pub mode: DistanceMode,
}

#[derive(Serialize)]
struct ProfileOutputs {
    domain: String,
    scans: u64,
    total_points: u64,
    band_means: Vec<f64>,
    far_field_decay: bool,
}

pub fn run(args: &ProfileArgs, threads: Option<usize>) -> Result<()> {
    let part = partition(args.m, args.r_max, args.mode)?;
    let domain = args.domain.clone().unwrap_or_else(|| {
        args.input
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or("dataset")
            .to_string()
    });
    if domain.is_empty() || domain.contains('\n') {
        return Err(crate::usage("domain name must be a non-empty single line"));
    }
    let manifest = Manifest::new(Command::Profile(args.clone()), threads);
    let manifest_path = manifest::for_file(&args.out);
    manifest.write(&manifest_path)?;

    let entries = dataset::list_scans(&args.input)?;
    let partials = entries
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut p = DensityProfile::new(part, domain.clone());
            for e in chunk {
                p.accumulate(&e.load()?);
            }
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    let profile = partials
        .iter()
        .try_fold(DensityProfile::new(part, domain.clone()), |acc, p| {
            merge_profiles(&acc, p)
        })?;
    if profile.scan_count() == 0 {
        anyhow::bail!("no scans found in {}", args.input.display());
    }
    save_profile(&profile, &args.out).with_context(|| format!("writing {}", args.out.display()))?;

    let bands = band_means(&profile, SUMMARY_BANDS);
    let decay = far_field_decays(&profile);
    println!(
        "profile {}: {} scans, {} points, {:.1} points/scan",
        profile.domain(),
        profile.scan_count(),
        profile.total_points(),
        profile.total_points() as f64 / profile.scan_count() as f64
    );
    for (i, mean) in bands.iter().enumerate() {
        let (lo, hi) = band_bounds(&profile, SUMMARY_BANDS, i);
        println!("  {lo:>6.1}-{hi:<6.1} m  {mean:>12.2} points/scan");
    }
    println!("  far-field decay: {}", if decay { "yes" } else { "no" });

    manifest.finish(
        ProfileOutputs {
            domain: profile.domain().to_string(),
            scans: profile.scan_count(),
            total_points: profile.total_points(),
            band_means: bands,
            far_field_decay: decay,
        },
        &manifest_path,
    )
}

fn band_range(m: usize, bands: usize, band: usize) -> std::ops::Range<usize> {
    let bands = bands.min(m).max(1);
    (band * m / bands)..((band + 1) * m / bands)
}

/// Meters spanned by coarse band `band` of `bands`.
pub fn band_bounds(profile: &DensityProfile, bands: usize, band: usize) -> (f64, f64) {
    let r = band_range(profile.partition().m(), bands, band);
    let w = profile.partition().bin_width();
    (r.start as f64 * w, r.end as f64 * w)
}

/// Mean points per scan in each of `bands` contiguous groups of areas.
pub fn band_means(profile: &DensityProfile, bands: usize) -> Vec<f64> {
    let means = profile.mean_per_scan();
    let bands = bands.min(means.len()).max(1);
    (0..bands)
        .map(|b| band_range(means.len(), bands, b).map(|i| means[i]).sum())
        .collect()
}

/// Whether the coarse band counts never rise again past the densest band.
pub fn far_field_decays(profile: &DensityProfile) -> bool {
    let bands = band_means(profile, SUMMARY_BANDS);
    let peak = bands
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > bands[best] { i } else { best });
    bands[peak..].windows(2).all(|w| w[1] <= w[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use dgt_core::RadialPartition;

    #[test]
    fn bands_and_decay() {
        let part = RadialPartition::new(10, 10.0, DistanceMode::Range3d).unwrap();
        let p =
            DensityProfile::from_totals(part, "d".into(), vec![0, 2, 9, 9, 5, 4, 3, 3, 1, 0], 1)
                .unwrap();
        assert_eq!(band_means(&p, 5), vec![2.0, 18.0, 9.0, 6.0, 1.0]);
        assert_eq!(band_bounds(&p, 5, 1), (2.0, 4.0));
        assert!(far_field_decays(&p));
        let q =
            DensityProfile::from_totals(part, "d".into(), vec![9, 9, 1, 1, 0, 5, 0, 0, 0, 0], 1)
                .unwrap();
        assert!(!far_field_decays(&q));
    }
}
