use std::path::PathBuf;

use anyhow::{Context, Result};
use dgt_core::beams::{reduce_beams, BeamSelect};
use dgt_core::density::{
    area_locality_violations, compute_ratios, translate_scan, Direction, NoiseAxes, NoiseConfig,
    Normalization, TranslateMode, TranslationRatios, DEFAULT_NOISE_SIGMA,
};
use dgt_core::io::load_profile;
use dgt_core::rng::derive_seed;
use dgt_core::{DistanceMode, RadialPartition, SensorSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::serde_enum;
use crate::dataset::{self, MAPS_DIR};
use crate::manifest::{self, Manifest};
use crate::{usage, Command};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSwitch {
    /// On for source-to-target, off for target-to-source.
    #[default]
    Auto,
    On,
    Off,
}

#[derive(Debug, Clone, clap::Args, Serialize, Deserialize)]
pub struct TranslateArgs {
    /// Dataset directory holding the scans to translate.
    #[arg(long)]
    pub input: PathBuf,
    /// Profile of the source domain.
    #[arg(long)]
    pub source_profile: PathBuf,
    /// Profile of the target domain.
    #[arg(long)]
    pub target_profile: PathBuf,
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// source_to_target or target_to_source.
    #[arg(long, default_value = "source_to_target", value_parser = serde_enum::<Direction>)]
    pub direction: Direction,
    /// per_scan_mean or totals.
    #[arg(long, default_value = "per_scan_mean", value_parser = serde_enum::<Normalization>)]
    pub normalization: Normalization,
    /// auto, on or off.
    #[arg(long, default_value = "auto", value_parser = serde_enum::<NoiseSwitch>)]
    pub noise: NoiseSwitch,
    /// Noise standard deviation in meters.
    #[arg(long, default_value_t = DEFAULT_NOISE_SIGMA)]
    pub sigma: f64,
    /// xy or xyz.
    #[arg(long, default_value = "xy", value_parser = serde_enum::<NoiseAxes>)]
    pub noise_axes: NoiseAxes,
    /// density, or random_global for the area-blind baseline.
    #[arg(long, default_value = "density", value_parser = serde_enum::<TranslateMode>)]
    pub mode: TranslateMode,
    /// Expected number of areas; must match the profiles when given.
    #[arg(long)]
    pub m: Option<usize>,
    /// Expected area radius; must match the profiles when given.
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Expected distance mode; must match the profiles when given.
    #[arg(long, value_parser = serde_enum::<DistanceMode>)]
    pub distance_mode: Option<DistanceMode>,
    /// Beams in the input scans (default: from the input manifest).
    #[arg(long)]
    pub source_beams: Option<usize>,
    /// Discard whole beams down to this count before translating.
    #[arg(long)]
    pub target_beams: Option<usize>,
    /// even or random.
    #[arg(long, default_value = "even", value_parser = serde_enum::<BeamSelect>)]
    pub beam_select: BeamSelect,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replace an existing non-empty output directory.
    #[arg(long)]
    #[serde(skip)]
    pub force: bool,
}

#[derive(Serialize)]
struct TranslateOutputs {
    sensor: SensorSpec,
    scans: usize,
    noise: NoiseConfig,
    ratios: Vec<f64>,
    points_in: u64,
    points_after_beams: u64,
    points_out: u64,
    /// Per area, summed over scans: points before the density step.
    area_points: Vec<u64>,
    /// Per area, summed over scans: points the density plan removed.
    area_discards: Vec<u64>,
    /// Removed points lying in areas with ratio 1.
    locality_violations: u64,
}

struct ScanStats {
    points_in: u64,
    points_after_beams: u64,
    points_out: u64,
    area_points: Vec<u64>,
    area_discards: Vec<u64>,
    violations: u64,
}

fn load_ratios(args: &TranslateArgs) -> Result<(RadialPartition, TranslationRatios)> {
    let src = load_profile(&args.source_profile)
        .with_context(|| format!("reading {}", args.source_profile.display()))?;
    let tgt = load_profile(&args.target_profile)
        .with_context(|| format!("reading {}", args.target_profile.display()))?;
    let part = *src.partition();
    if *tgt.partition() != part {
        return Err(usage(format!(
            "profile partition mismatch: {} has {:?}, {} has {:?}",
            args.source_profile.display(),
            part,
            args.target_profile.display(),
            tgt.partition()
        )));
    }
    let mismatch = args.m.is_some_and(|m| m != part.m())
        || args.r_max.is_some_and(|r| r != part.r_max())
        || args.distance_mode.is_some_and(|d| d != part.mode());
    if mismatch {
        return Err(usage(format!(
            "profile partition mismatch vs config: profiles use m={} r_max={} mode={}",
            part.m(),
            part.r_max(),
            part.mode()
        )));
    }
    let ratios = compute_ratios(&src, &tgt, args.direction, args.normalization)?;
    Ok((part, ratios))
}

pub fn run(args: &TranslateArgs, threads: Option<usize>) -> Result<()> {
    let (part, ratios) = load_ratios(args)?;
    let noise_on = match args.noise {
        NoiseSwitch::Auto => args.direction == Direction::SourceToTarget,
        NoiseSwitch::On => true,
        NoiseSwitch::Off => false,
    };
    let noise = NoiseConfig {
        enabled: noise_on,
        sigma: args.sigma,
        axes: args.noise_axes,
    };
    if !(args.sigma.is_finite() && args.sigma >= 0.0) {
        return Err(usage("--sigma must be finite and >= 0"));
    }
    let input_sensor = dataset::recorded_sensor(&args.input);
    let source_beams = args
        .source_beams
        .or(input_sensor.map(|s| s.beam_count as usize));
    let beam_step = match (args.target_beams, source_beams) {
        (None, _) => None,
        (Some(0), _) => return Err(usage("--target-beams must be at least 1")),
        (Some(t), Some(s)) => Some((s, t)),
        (Some(_), None) => {
            return Err(usage(
                "--target-beams needs --source-beams when the input has no manifest",
            ))
        }
    };
    let base_sensor = input_sensor.unwrap_or_default();
    let sensor = match beam_step {
        Some((s, t)) if t < s => SensorSpec {
            beam_count: t as u32,
            ..base_sensor
        },
        _ => base_sensor,
    };

    let entries = dataset::list_scans(&args.input)?;
    dataset::prepare_output_dir(&args.out, args.force)?;
    let manifest = Manifest::new(Command::Translate(args.clone()), threads);
    let manifest_path = manifest::for_dir(&args.out);
    manifest.write(&manifest_path)?;
    let labeled = entries.iter().any(|e| e.labels.is_some());
    dataset::create_layout(&args.out, labeled, true)?;

    let stats = entries
        .par_iter()
        .enumerate()
        .map(|(i, entry)| -> Result<ScanStats> {
            let scan = entry.load()?;
            let seed = derive_seed(args.seed, i as u64);
            let (reduced, beam_map) = match beam_step {
                Some((s, t)) => reduce_beams(&scan, s, t, args.beam_select, seed)
                    .with_context(|| format!("discarding beams of {}", entry.scan.display()))?,
                None => (scan.clone(), (0..scan.len()).collect()),
            };
            let out = translate_scan(&reduced, &part, &ratios, &noise, args.mode, seed)?;
            let map: Vec<usize> = out.kept_index_map.iter().map(|&k| beam_map[k]).collect();
            dataset::write_scan_files(&args.out, &entry.stem, &out.scan)?;
            dataset::write_index_map(
                &args.out.join(MAPS_DIR).join(format!("{}.idx", entry.stem)),
                &map,
            )?;
            let violations =
                area_locality_violations(&reduced, &part, &ratios, &out.plan.selected).len();
            Ok(ScanStats {
                points_in: scan.len() as u64,
                points_after_beams: reduced.len() as u64,
                points_out: out.scan.len() as u64,
                area_points: out.plan.area_counts,
                area_discards: out.plan.discard_counts,
                violations: violations as u64,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut area_points = vec![0u64; part.m()];
    let mut area_discards = vec![0u64; part.m()];
    for s in &stats {
        for i in 0..part.m() {
            area_points[i] += s.area_points[i];
            area_discards[i] += s.area_discards[i];
        }
    }
    let outputs = TranslateOutputs {
        sensor,
        scans: stats.len(),
        noise,
        ratios: ratios.values().to_vec(),
        points_in: stats.iter().map(|s| s.points_in).sum(),
        points_after_beams: stats.iter().map(|s| s.points_after_beams).sum(),
        points_out: stats.iter().map(|s| s.points_out).sum(),
        area_points,
        area_discards,
        locality_violations: stats.iter().map(|s| s.violations).sum(),
    };
    if outputs.locality_violations > 0 {
        eprintln!(
            "note: {} removed points lie in areas with ratio 1",
            outputs.locality_violations
        );
    }
    manifest.finish(outputs, &manifest_path)
}
