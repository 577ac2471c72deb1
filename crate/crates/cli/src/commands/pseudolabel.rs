use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use dgt_core::io::{read_probability_field, write_labels, Labels};
use dgt_core::lasermix::{generate_pseudo_labels, DEFAULT_PSEUDO_THRESHOLD};
use dgt_core::numerics::ClassLayout;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::serde_enum;
use crate::dataset::{self, LABELS_DIR};
use crate::manifest::{self, Manifest};
use crate::{usage, Command};

#[derive(Debug, Clone, clap::Args, Serialize, Deserialize)]
pub struct PseudoLabelArgs {
    /// Directory of `<stem>.prob` probability files.
    #[arg(long)]
    pub probs: PathBuf,
    /// Output directory; labels go to `labels/<stem>.label`.
    #[arg(long)]
    pub out: PathBuf,
    /// Confidence threshold; a point keeps its class only when its top
    /// probability is strictly greater.
    #[arg(long, default_value_t = DEFAULT_PSEUDO_THRESHOLD)]
    pub th_p: f64,
    /// with_unlabeled or semantic_only column layout.
    #[arg(long, default_value = "with_unlabeled", value_parser = serde_enum::<ClassLayout>)]
    pub layout: ClassLayout,
    /// Replace an existing non-empty output directory.
    #[arg(long)]
    #[serde(skip)]
    pub force: bool,
}

#[derive(Debug, Serialize)]
struct FileStats {
    stem: String,
    points: usize,
    accepted: usize,
}

#[derive(Serialize)]
struct PseudoLabelOutputs {
    files: Vec<FileStats>,
    points: usize,
    accepted: usize,
}

pub fn run(args: &PseudoLabelArgs, threads: Option<usize>) -> Result<()> {
    if !(0.0..=1.0).contains(&args.th_p) {
        return Err(usage("--th-p must lie in [0, 1]"));
    }
    let files = dataset::list_files(&args.probs, "prob")?;
    dataset::prepare_output_dir(&args.out, args.force)?;
    let manifest = Manifest::new(Command::Pseudolabel(args.clone()), threads);
    let manifest_path = manifest::for_dir(&args.out);
    manifest.write(&manifest_path)?;
    let label_dir = args.out.join(LABELS_DIR);
    fs::create_dir_all(&label_dir)?;

    let stats = files
        .par_iter()
        .map(|(stem, path)| -> Result<FileStats> {
            let probs = read_probability_field(path, args.layout)
                .with_context(|| format!("reading {}", path.display()))?;
            let pseudo = generate_pseudo_labels(&probs, args.th_p)?;
            let labels = Labels {
                semantic: pseudo.classes().to_vec(),
                instance: vec![0; pseudo.len()],
            };
            let out = label_dir.join(format!("{stem}.label"));
            write_labels(&labels, &out).with_context(|| format!("writing {}", out.display()))?;
            Ok(FileStats {
                stem: stem.clone(),
                points: pseudo.len(),
                accepted: pseudo.accepted(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    manifest.finish(
        PseudoLabelOutputs {
            points: stats.iter().map(|s| s.points).sum(),
            accepted: stats.iter().map(|s| s.accepted).sum(),
            files: stats,
        },
        &manifest_path,
    )
}
