use std::path::PathBuf;

use anyhow::Result;
use dgt_core::synth::{generate_synthetic_scan, SyntheticSceneSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, scan_name};
use crate::manifest::{self, Manifest};
use crate::Command;

#[derive(Debug, Clone, clap::Args, Serialize, Deserialize)]
pub struct GenArgs {
    /// Scene preset.
    #[arg(long, value_parser = ["dense64", "sparse40"])]
    pub preset: String,
    /// Number of scans.
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Replace an existing non-empty output directory.
    #[arg(long)]
    #[serde(skip)]
    pub force: bool,
}

#[derive(Serialize)]
struct GenOutputs {
    sensor: dgt_core::SensorSpec,
    spec: SyntheticSceneSpec,
    scans: usize,
    /// Points in each scan; scan `i` is generated from `(spec.seed, i)`.
    points: Vec<usize>,
}

pub fn run(args: &GenArgs, threads: Option<usize>) -> Result<()> {
    let spec = SyntheticSceneSpec::preset(&args.preset, args.seed)
        .map_err(|e| crate::usage(e.to_string()))?;
    dataset::prepare_output_dir(&args.out, args.force)?;
    let manifest = Manifest::new(Command::Gen(args.clone()), threads);
    let manifest_path = manifest::for_dir(&args.out);
    manifest.write(&manifest_path)?;
    dataset::create_layout(&args.out, true, false)?;

    let points = (0..args.count)
        .into_par_iter()
        .map(|i| {
            let scan = generate_synthetic_scan(&spec, i as u64)?;
            dataset::write_scan_files(&args.out, &scan_name(i), &scan)?;
            Ok(scan.len())
        })
        .collect::<Result<Vec<usize>>>()?;

    manifest.finish(
        GenOutputs {
            sensor: spec.sensor(),
            spec,
            scans: args.count,
            points,
        },
        &manifest_path,
    )
}
