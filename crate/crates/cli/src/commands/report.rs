use std::path::PathBuf;

use anyhow::{Context, Result};
use dgt_core::density::{compute_ratios, DensityProfile, Direction, Normalization};
use dgt_core::io::load_profile;
use serde::{Deserialize, Serialize};

use crate::commands::profile::{band_means, SUMMARY_BANDS};
use crate::commands::serde_enum;
use crate::manifest::{self, Manifest};
use crate::{usage, Command};

#[derive(Debug, Clone, clap::Args, Serialize, Deserialize)]
pub struct ReportArgs {
    /// Profile file; give one to three.
    #[arg(long = "profile", required = true)]
    pub profiles: Vec<PathBuf>,
    /// CSV file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// per_scan_mean or totals, used for the ratio columns.
    #[arg(long, default_value = "per_scan_mean", value_parser = serde_enum::<Normalization>)]
    pub normalization: Normalization,
}

#[derive(Serialize)]
struct RatioSummary {
    from: String,
    to: String,
    near_field_mean: f64,
    far_field_mean: f64,
}

#[derive(Serialize)]
struct ReportOutputs {
    columns: Vec<String>,
    ratios: Vec<RatioSummary>,
}

/// Column-safe names for the profiles, suffixed with their position when two
/// share a domain.
fn names(profiles: &[DensityProfile]) -> Vec<String> {
    let clean = |p: &DensityProfile| -> String {
        p.domain()
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' {
                    c
                } else {
                    '_'
                }
            })
            .collect()
    };
    let base: Vec<String> = profiles.iter().map(clean).collect();
    base.iter()
        .enumerate()
        .map(|(i, b)| {
            if base.iter().filter(|o| *o == b).count() > 1 {
                format!("{b}{}", i + 1)
            } else {
                b.clone()
            }
        })
        .collect()
}

pub fn run(args: &ReportArgs, threads: Option<usize>) -> Result<()> {
    if args.profiles.is_empty() || args.profiles.len() > 3 {
        return Err(usage("report takes one to three --profile files"));
    }
    let manifest = Manifest::new(Command::Report(args.clone()), threads);
    let manifest_path = manifest::for_file(&args.out);
    manifest.write(&manifest_path)?;

    let profiles = args
        .profiles
        .iter()
        .map(|p| load_profile(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let part = *profiles[0].partition();
    if let Some(p) = profiles.iter().find(|p| *p.partition() != part) {
        return Err(usage(format!(
            "profiles use different partitions: {:?} vs {:?}",
            part,
            p.partition()
        )));
    }
    let names = names(&profiles);

    let mut header = vec!["area".to_string(), "lo_m".into(), "hi_m".into()];
    if profiles.len() == 1 {
        header.push("mean_count".into());
    } else {
        header.extend(names.iter().map(|n| format!("mean_count_{n}")));
    }
    let mut ratio_cols = Vec::new();
    for (a, pa) in profiles.iter().enumerate() {
        for (b, pb) in profiles.iter().enumerate() {
            if a != b {
                header.push(format!("r_{}_to_{}", names[a], names[b]));
                let r = compute_ratios(pa, pb, Direction::SourceToTarget, args.normalization)?;
                ratio_cols.push((a, b, r));
            }
        }
    }

    let means: Vec<Vec<f64>> = profiles.iter().map(DensityProfile::mean_per_scan).collect();
    let mut csv = csv::Writer::from_path(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    csv.write_record(&header)?;
    for i in 0..part.m() {
        let (lo, hi) = part.bounds(i);
        let mut row = vec![i.to_string(), lo.to_string(), hi.to_string()];
        row.extend(means.iter().map(|m| m[i].to_string()));
        row.extend(ratio_cols.iter().map(|(_, _, r)| r.values()[i].to_string()));
        csv.write_record(&row)?;
    }
    csv.flush()?;

    let band = |v: &[f64], b: usize| {
        let n = (v.len() / SUMMARY_BANDS).max(1);
        let slice = if b == 0 { &v[..n] } else { &v[v.len() - n..] };
        slice.iter().sum::<f64>() / slice.len() as f64
    };
    for (p, name) in profiles.iter().zip(&names) {
        let bands: Vec<String> = band_means(p, SUMMARY_BANDS)
            .iter()
            .map(|v| format!("{v:.1}"))
            .collect();
        println!(
            "{name}: {} scans, {:.1} points/scan, bands [{}]",
            p.scan_count(),
            p.total_points() as f64 / p.scan_count().max(1) as f64,
            bands.join(", ")
        );
    }
    let mut ratios = Vec::new();
    for (a, b, r) in &ratio_cols {
        let s = RatioSummary {
            from: names[*a].clone(),
            to: names[*b].clone(),
            near_field_mean: band(r.values(), 0),
            far_field_mean: band(r.values(), 1),
        };
        println!(
            "r {} -> {}: near-field mean {:.3}, far-field mean {:.3}",
            s.from, s.to, s.near_field_mean, s.far_field_mean
        );
        ratios.push(s);
    }

    manifest.finish(
        ReportOutputs {
            columns: header,
            ratios,
        },
        &manifest_path,
    )
}
