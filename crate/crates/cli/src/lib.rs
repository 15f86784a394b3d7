//! `strainveil` command-line front end: argument parsing, exit codes and
//! thread-pool setup around the subcommands in [`commands`].

pub mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use strainveil_core::eval::Deform;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "strainveil", version, about = "Suppress facial expressions in aligned face video using optical strain")]
pub struct Cli {
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Seed for every random choice, recorded in the manifest.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replace high-strain pixels from a neutral reference frame.
    Suppress(SuppressArgs),
    /// Export per-frame strain maps without suppressing.
    Strainmap(StrainmapArgs),
    /// Score suppression from before/after detector intensities.
    Eval(EvalArgs),
    /// Generate a synthetic deformation sequence with ground-truth flow.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Frame directory, `%0Nd` file pattern, or `.y4m` file.
    #[arg(long)]
    pub frames: String,

    /// Image format of the frames; inferred when omitted.
    #[arg(long, value_parser = ["png", "pgm", "ppm"])]
    pub format: Option<String>,

    /// Landmark CSV (`frame,idx,x,y`); frames are taken as pre-aligned
    /// when omitted.
    #[arg(long)]
    pub landmarks: Option<PathBuf>,

    /// Single-frame landmark CSV giving the canonical pose in crop
    /// coordinates.
    #[arg(long, requires = "landmarks")]
    pub template: Option<PathBuf>,

    /// Side of the square aligned crop, pixels.
    #[arg(long, default_value_t = 256)]
    pub crop: usize,

    /// Key = value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SuppressArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Overrides `threshold_percentile` from the config.
    #[arg(long)]
    pub percentile: Option<f64>,

    /// Write normalized strain maps as PGM plus raw SVSM dumps.
    #[arg(long)]
    pub dump_strain: bool,

    /// Write replacement masks as PGM.
    #[arg(long)]
    pub dump_masks: bool,

    /// Also write the suppressed sequence as a Y4M file.
    #[arg(long)]
    pub y4m: bool,
}

#[derive(Debug, Args)]
pub struct StrainmapArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Also write the flow fields as SVFL dumps.
    #[arg(long)]
    pub dump_flow: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Intensity CSV scored on the original videos.
    #[arg(long)]
    pub before: PathBuf,

    /// Intensity CSV scored on the suppressed videos.
    #[arg(long)]
    pub after: PathBuf,

    #[arg(long)]
    pub out: PathBuf,

    /// Mean intensity at or below which an expression counts as removed.
    #[arg(long, default_value_t = strainveil_core::eval::DEFAULT_NOISE_FLOOR)]
    pub noise_floor: f64,

    /// Prefix for the case names in the text report, e.g. "Smile".
    #[arg(long, default_value = "")]
    pub label: String,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Base image; a seeded random texture when omitted.
    #[arg(long)]
    pub base: Option<PathBuf>,

    #[arg(long, default_value = "bulge")]
    pub deform: Deform,

    /// Peak displacement, pixels.
    #[arg(long, default_value_t = 4.0)]
    pub amplitude: f64,

    #[arg(long, default_value_t = 20)]
    pub frames: usize,

    /// Side of the generated texture when no base image is given.
    #[arg(long, default_value_t = 256)]
    pub size: usize,

    #[arg(long, default_value = "pgm", value_parser = ["png", "pgm", "ppm"])]
    pub format: String,

    #[arg(long)]
    pub out: PathBuf,
}

/// A failed run: the exit code and the error chain to report.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: EXIT_INPUT,
            error: error.into(),
        }
    }

    pub fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: EXIT_RUNTIME,
            error: error.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

/// Parses `args`, runs the subcommand and returns the process exit code.
/// Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {f}");
            f.code
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), Failure> {
    let threads = match cli.threads {
        Some(0) => return Err(Failure::input(anyhow::anyhow!("--threads must be at least 1"))),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(Failure::runtime)?;
    let ctx = commands::Context {
        seed: cli.seed,
        threads,
    };
    pool.install(|| match &cli.command {
        Command::Suppress(a) => commands::suppress(&ctx, a),
        Command::Strainmap(a) => commands::strainmap(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::Synth(a) => commands::synth(&ctx, a),
    })
    .map(|_| ())
}
