//! The `dgt` command-line tool.
//!
//! Every run writes a JSON manifest holding its full configuration before it
//! touches any output, and rewrites it with summary statistics when done.
//! `dgt replay <manifest>` re-executes a run from that file.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub mod commands;
pub mod dataset;
pub mod manifest;

use commands::{GenArgs, MixArgs, ProfileArgs, PseudoLabelArgs, ReportArgs, TranslateArgs};
use manifest::Manifest;

/// Environment variable holding the default worker thread count.
pub const THREADS_ENV: &str = "DGT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "dgt",
    version,
    about = "Density-guided LiDAR scan translation and mixing"
)]
pub struct Cli {
    /// Worker threads for per-scan steps (default: all cores).
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "snake_case")]
pub enum Command {
    /// Generate a synthetic dataset from a preset.
    Gen(GenArgs),
    /// Count points per radial area over a dataset.
    Profile(ProfileArgs),
    /// Translate a dataset toward another domain's density.
    Translate(TranslateArgs),
    /// Mix scans of two datasets by inclination area.
    Mix(MixArgs),
    /// Turn probability sidecars into thresholded pseudo-labels.
    Pseudolabel(PseudoLabelArgs),
    /// Per-area density table and ratios for up to three profiles.
    Report(ReportArgs),
    /// Re-run a command from its manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, clap::Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
    /// Write to this path instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Allow replacing a non-empty output when `--out` is given.
    #[arg(long)]
    pub force: bool,
}

/// Bad flags or inconsistent configuration; exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// 1 for usage or configuration errors, 2 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<dgt_core::Error>() {
            if matches!(
                e,
                dgt_core::Error::InvalidParameter(_)
                    | dgt_core::Error::TargetCountOutOfRange { .. }
            ) {
                return 1;
            }
        }
    }
    2
}

/// Parse `args` (program name first), run, and return the process exit code.
/// Diagnostics go to standard error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Replay(args) => replay(&args, cli.threads),
        command => execute(command, cli.threads),
    }
}

/// Run one command inside a thread pool of the requested size.
pub fn execute(command: Command, threads: Option<usize>) -> Result<()> {
    if threads == Some(0) {
        return Err(usage("--threads must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .context("starting worker threads")?;
    pool.install(|| match &command {
        Command::Gen(a) => commands::gen::run(a, threads),
        Command::Profile(a) => commands::profile::run(a, threads),
        Command::Translate(a) => commands::translate::run(a, threads),
        Command::Mix(a) => commands::mix::run(a, threads),
        Command::Pseudolabel(a) => commands::pseudolabel::run(a, threads),
        Command::Report(a) => commands::report::run(a, threads),
        Command::Replay(_) => Err(usage("replay cannot be nested")),
    })
}

fn replay(args: &ReplayArgs, threads: Option<usize>) -> Result<()> {
    let manifest = Manifest::load(&args.manifest)?;
    let mut command = manifest.run;
    match &args.out {
        Some(out) => command.set_output(out.clone(), args.force),
        // same destination: the recorded run owns it
        None => command.set_force(true),
    }
    execute(command, threads.or(manifest.threads))
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Profile(_) => "profile",
            Command::Translate(_) => "translate",
            Command::Mix(_) => "mix",
            Command::Pseudolabel(_) => "pseudolabel",
            Command::Report(_) => "report",
            Command::Replay(_) => "replay",
        }
    }

    fn set_output(&mut self, out: PathBuf, force: bool) {
        match self {
            Command::Gen(a) => a.out = out,
            Command::Profile(a) => a.out = out,
            Command::Translate(a) => a.out = out,
            Command::Mix(a) => a.out = out,
            Command::Pseudolabel(a) => a.out = out,
            Command::Report(a) => a.out = out,
            Command::Replay(_) => {}
        }
        self.set_force(force);
    }

    fn set_force(&mut self, force: bool) {
        match self {
            Command::Gen(a) => a.force = force,
            Command::Translate(a) => a.force = force,
            Command::Mix(a) => a.force = force,
            Command::Pseudolabel(a) => a.force = force,
            Command::Profile(_) | Command::Report(_) | Command::Replay(_) => {}
        }
    }
}
