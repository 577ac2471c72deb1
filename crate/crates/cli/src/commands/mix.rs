use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use dgt_core::io::read_probability_field;
use dgt_core::lasermix::{
    default_partition, generate_pseudo_labels, laser_mix, verify_mix, DEFAULT_MIX_AREAS,
    DEFAULT_PSEUDO_THRESHOLD,
};
use dgt_core::numerics::ClassLayout;
use dgt_core::rng::{self, derive_seed};
use dgt_core::InclinationPartition;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::serde_enum;
use crate::dataset::{self, scan_name, ScanEntry};
use crate::manifest::{self, Manifest};
use crate::{usage, Command};

#[derive(Debug, Clone, clap::Args, Serialize, Deserialize)]
pub struct MixArgs {
    /// Labeled source dataset directory.
    #[arg(long)]
    pub source: PathBuf,
    /// Target dataset directory.
    #[arg(long)]
    pub target: PathBuf,
    /// Output directory; mixes go to `mix1/` and, with `--both`, `mix2/`.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of inclination areas.
    #[arg(long, default_value_t = DEFAULT_MIX_AREAS)]
    pub n: usize,
    /// Lowest inclination in radians (default: per pair, from the data).
    #[arg(long, requires = "phi_max", allow_hyphen_values = true)]
    pub phi_min: Option<f64>,
    /// Highest inclination in radians (default: per pair, from the data).
    #[arg(long, requires = "phi_min", allow_hyphen_values = true)]
    pub phi_max: Option<f64>,
    /// Also write the complementary mix.
    #[arg(long)]
    pub both: bool,
    /// Check every mix with the brute-force verifier.
    #[arg(long)]
    pub verify: bool,
    /// Directory of `<stem>.prob` probability files giving target
    /// pseudo-labels instead of the target label files.
    #[arg(long)]
    pub target_probs: Option<PathBuf>,
    /// Pseudo-label confidence threshold (strictly greater passes).
    #[arg(long, default_value_t = DEFAULT_PSEUDO_THRESHOLD)]
    pub th_p: f64,
    /// with_unlabeled or semantic_only column layout of the probability files.
    #[arg(long, default_value = "with_unlabeled", value_parser = serde_enum::<ClassLayout>)]
    pub layout: ClassLayout,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replace an existing non-empty output directory.
    #[arg(long)]
    #[serde(skip)]
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub output: String,
    pub source: String,
    pub target: String,
}

#[derive(Serialize)]
struct MixOutputs {
    pairs: Vec<Pair>,
    points_mix1: u64,
    points_mix2: u64,
    verified: bool,
}

/// Source scan `i` is paired with target `perm[i mod |targets|]`, where
/// `perm` is a seeded shuffle of the target scans.
pub fn pairing(sources: usize, targets: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut perm: Vec<usize> = (0..targets).collect();
    perm.shuffle(&mut rng::stream(seed, rng::purpose::PAIRING));
    (0..sources).map(|i| (i, perm[i % targets])).collect()
}

fn load_target(entry: &ScanEntry, args: &MixArgs) -> Result<dgt_core::Scan> {
    let Some(dir) = &args.target_probs else {
        let scan = entry.load()?;
        if scan.labels().is_none() {
            bail!(
                "{} has no label file; pass --target-probs for pseudo-labels",
                entry.scan.display()
            );
        }
        return Ok(scan);
    };
    let path = dir.join(format!("{}.prob", entry.stem));
    let probs = read_probability_field(&path, args.layout)
        .with_context(|| format!("reading {}", path.display()))?;
    let pseudo = generate_pseudo_labels(&probs, args.th_p)?;
    let scan = dgt_core::io::read_scan(&entry.scan)
        .with_context(|| format!("reading {}", entry.scan.display()))?;
    scan.with_labels(pseudo.classes().to_vec())
        .with_context(|| format!("pairing {} with {}", entry.scan.display(), path.display()))
}

pub fn run(args: &MixArgs, threads: Option<usize>) -> Result<()> {
    if args.n < 2 {
        return Err(usage("--n must be at least 2"));
    }
    if !(0.0..=1.0).contains(&args.th_p) {
        return Err(usage("--th-p must lie in [0, 1]"));
    }
    let fixed = match (args.phi_min, args.phi_max) {
        (Some(lo), Some(hi)) => {
            Some(InclinationPartition::new(args.n, lo, hi).map_err(|e| usage(e.to_string()))?)
        }
        _ => None,
    };
    let sources = dataset::list_scans(&args.source)?;
    let targets = dataset::list_scans(&args.target)?;
    if sources.is_empty() {
        bail!("no scans in {}", args.source.display());
    }
    if targets.is_empty() {
        bail!("no scans in {}", args.target.display());
    }

    dataset::prepare_output_dir(&args.out, args.force)?;
    let manifest = Manifest::new(Command::Mix(args.clone()), threads);
    let manifest_path = manifest::for_dir(&args.out);
    manifest.write(&manifest_path)?;
    let (dir1, dir2) = (args.out.join("mix1"), args.out.join("mix2"));
    dataset::create_layout(&dir1, true, false)?;
    if args.both {
        dataset::create_layout(&dir2, true, false)?;
    }

    let pairs = pairing(sources.len(), targets.len(), derive_seed(args.seed, 0));
    let counts = pairs
        .par_iter()
        .map(|&(i, j)| -> Result<(u64, u64)> {
            let (es, et) = (&sources[i], &targets[j]);
            let s = es.load()?;
            let t = load_target(et, args)?;
            let part = match fixed {
                Some(p) => p,
                None => default_partition(&s, &t, args.n)?,
            };
            let mix = laser_mix(&s, &t, &part).with_context(|| {
                format!("mixing {} with {}", es.scan.display(), et.scan.display())
            })?;
            if args.verify {
                let problems = verify_mix(&s, &t, &part, &mix);
                if !problems.is_empty() {
                    bail!(
                        "mix of {} and {} failed verification: {}",
                        es.scan.display(),
                        et.scan.display(),
                        problems.join("; ")
                    );
                }
            }
            let name = scan_name(i);
            dataset::write_scan_files(&dir1, &name, &mix.mix1)?;
            if args.both {
                dataset::write_scan_files(&dir2, &name, &mix.mix2)?;
            }
            Ok((mix.mix1.len() as u64, mix.mix2.len() as u64))
        })
        .collect::<Result<Vec<_>>>()?;

    let outputs = MixOutputs {
        pairs: pairs
            .iter()
            .map(|&(i, j)| Pair {
                output: scan_name(i),
                source: sources[i].stem.clone(),
                target: targets[j].stem.clone(),
            })
            .collect(),
        points_mix1: counts.iter().map(|c| c.0).sum(),
        points_mix2: if args.both {
            counts.iter().map(|c| c.1).sum()
        } else {
            0
        },
        verified: args.verify,
    };
    if args.verify {
        eprintln!("verified {} mixes", outputs.pairs.len());
    }
    manifest.finish(outputs, &manifest_path)
}
