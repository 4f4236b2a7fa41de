//! The `blockface` command line: extract, enroll, identify, evaluate and
//! inspect.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod gallery;

/// Exit status classes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, configuration values or parameter mismatches.
    Usage(String),
    /// Unreadable or malformed inputs.
    Data(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<blockface::Error> for CliError {
    fn from(e: blockface::Error) -> Self {
        match e {
            blockface::Error::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "blockface", version, about = "Block-based face identification")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

/// Knobs shared by every command that extracts signatures.
#[derive(Debug, Default, Args)]
pub struct Knobs {
    /// File of `key = value` lines; flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for block sampling and impostor selection (falls back to BLOCKFACE_SEED).
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long, value_name = "N")]
    pub grid_cols: Option<String>,
    #[arg(long, value_name = "N")]
    pub grid_rows: Option<String>,
    /// Blocks kept per image.
    #[arg(long, value_name = "N")]
    pub retain: Option<String>,
    /// Random block positions tried per image.
    #[arg(long, value_name = "N")]
    pub iterations: Option<String>,
    /// Posterization levels.
    #[arg(long, value_name = "N")]
    pub levels: Option<String>,
    /// Gray levels of the co-occurrence matrices.
    #[arg(long, value_name = "N")]
    pub glcm_levels: Option<String>,
    /// Co-occurrence distances, comma separated.
    #[arg(long, value_name = "D,..")]
    pub distances: Option<String>,
    /// Fraction of each side kept by a center crop before resizing.
    #[arg(long, value_name = "FRACTION")]
    pub center_crop: Option<String>,
    #[command(flatten)]
    pub matching: MatchKnobs,
}

#[derive(Debug, Default, Args)]
pub struct MatchKnobs {
    /// Spatial gate radius in pixels (`auto` uses the block size).
    #[arg(long, value_name = "PIXELS")]
    pub th1: Option<String>,
    /// `gated-min` or `paper-literal-max`.
    #[arg(long)]
    pub mode: Option<String>,
    /// Reject matches whose dissimilarity exceeds this value.
    #[arg(long)]
    pub threshold: Option<String>,
    /// Ranked gallery entries shown per probe.
    #[arg(long, value_name = "N")]
    pub top: Option<String>,
}

impl MatchKnobs {
    fn pairs(&self, out: &mut Vec<(String, String)>) {
        for (k, v) in [
            ("th1", &self.th1),
            ("mode", &self.mode),
            ("threshold", &self.threshold),
            ("top", &self.top),
        ] {
            if let Some(v) = v {
                out.push((k.to_string(), v.clone()));
            }
        }
    }
}

impl Knobs {
    pub fn pairs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (k, v) in [
            ("seed", &self.seed),
            ("grid-cols", &self.grid_cols),
            ("grid-rows", &self.grid_rows),
            ("retain", &self.retain),
            ("iterations", &self.iterations),
            ("levels", &self.levels),
            ("glcm-levels", &self.glcm_levels),
            ("distances", &self.distances),
            ("center-crop", &self.center_crop),
        ] {
            if let Some(v) = v {
                out.push((k.to_string(), v.clone()));
            }
        }
        self.matching.pairs(&mut out);
        out
    }

    pub fn resolve(&self) -> Result<config::RunConfig, CliError> {
        let env_seed = std::env::var(config::SEED_ENV).ok();
        config::resolve(self.config.as_deref(), env_seed.as_deref(), &self.pairs())
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one signature document per image.
    Extract {
        #[arg(required = true)]
        images: Vec<PathBuf>,
        #[command(flatten)]
        knobs: Knobs,
        /// Output directory; signatures go to stdout without it.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump the preprocessing stages as PGM files here.
        #[arg(long, value_name = "DIR")]
        debug_dir: Option<PathBuf>,
    },
    /// Enroll the first training images of every subject into a gallery.
    Enroll {
        dataset: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
        #[arg(long)]
        train_per_subject: Option<String>,
        /// Gallery file, extended when it already exists.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank gallery images against probe images.
    Identify {
        gallery: PathBuf,
        #[arg(required = true)]
        probes: Vec<PathBuf>,
        /// Only matching keys are read from this file.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[command(flatten)]
        matching: MatchKnobs,
        #[arg(long)]
        json: bool,
    },
    /// Run a train/probe experiment and write a report.
    Evaluate {
        dataset: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
        #[arg(long)]
        train_per_subject: Option<String>,
        #[arg(long, value_name = "N")]
        impostors_per_subject: Option<String>,
        /// Identification accuracy to compare against in the report.
        #[arg(long, value_name = "ACCURACY")]
        reference_accuracy: Option<String>,
        /// Directory for report.json and report.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the full report instead of a summary.
        #[arg(long)]
        json: bool,
    },
    /// Print a signature or gallery file in readable form.
    Inspect { path: PathBuf },
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    match panic::catch_unwind(AssertUnwindSafe(|| commands::dispatch(cli.command, out))) {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => {
            eprintln!("error: internal failure");
            3
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}
