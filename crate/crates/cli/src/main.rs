//! `symfuse` command-line tool.
//!
//! Exit status: 0 success, 1 usage error, 2 data or format error,
//! 3 numeric or invariant error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use symfuse::ErrorKind;

#[derive(Debug, Parser)]
#[command(
    name = "symfuse",
    version,
    about = "Fingerprint quality and quality-aware score fusion"
)]
struct Cli {
    /// Run configuration (key = value lines).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assess the quality of a fingerprint image.
    Quality {
        image: PathBuf,
        /// Write the block-wise quality map as CSV.
        #[arg(long, value_name = "OUT.csv")]
        map: Option<PathBuf>,
    },
    /// Generate synthetic data.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Train or apply score fusion.
    #[command(subcommand)]
    Fuse(FuseCommand),
    /// Quality-triggered cascaded fusion.
    #[command(subcommand)]
    Cascade(CascadeCommand),
    /// Error-rate evaluation.
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Debug, Subcommand)]
enum SynthCommand {
    /// Render a symmetry test pattern as PGM (or PNG by extension).
    Pattern {
        #[arg(long, allow_negative_numbers = true)]
        order: i32,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long, default_value_t = 8.0)]
        wavelength: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a labelled synthetic score panel.
    Scores {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TrainWeighting {
    Uniform,
    Quality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FuseMode {
    Bayes,
    BayesAdaptive,
    Sum,
    Max,
}

#[derive(Debug, Subcommand)]
enum FuseCommand {
    /// Train the Bayesian supervisor on labelled scores.
    Train {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Variance weighting used during training.
        #[arg(long, value_enum, default_value_t = TrainWeighting::Quality)]
        weighting: TrainWeighting,
    },
    /// Fuse every panel of a score file.
    Run {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, value_enum)]
        mode: FuseMode,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum CascadeCommand {
    /// Run the cascade over every panel of a score file.
    Run {
        #[arg(long)]
        scores: PathBuf,
        /// Comma-separated, strictly decreasing thresholds.
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
        #[arg(long, value_parser = ["max", "sum"])]
        rule: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum JackknifeArg {
    Pooled,
    FoldMean,
}

#[derive(Debug, Args)]
struct ScoresArg {
    #[arg(long)]
    scores: PathBuf,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Equal error rate, per expert when the file holds several.
    Eer {
        #[command(flatten)]
        input: ScoresArg,
    },
    /// EER within quality groups of fingers.
    Groups {
        #[command(flatten)]
        input: ScoresArg,
        #[arg(long)]
        k: Option<usize>,
        /// Expert to evaluate when the file holds several.
        #[arg(long)]
        expert: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Leave-one-claim-out EER of Bayesian fusion.
    Jackknife {
        #[command(flatten)]
        input: ScoresArg,
        #[arg(long, value_enum)]
        mode: Option<JackknifeArg>,
        /// Fuse held-out panels with quality-adaptive weights.
        #[arg(long)]
        adaptive: Option<bool>,
    },
}

/// Failure of a command, mapped onto the exit status.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Core(symfuse::Error),
}

impl From<symfuse::Error> for Failure {
    fn from(e: symfuse::Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core(e) => match e.kind() {
                ErrorKind::Data => 2,
                ErrorKind::Numeric => 3,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Core(e) => e.fmt(f),
        }
    }
}

/// Help and version requests are not errors.
fn parse_exit_code(e: &clap::Error) -> u8 {
    u8::from(e.use_stderr())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(parse_exit_code(&e));
        }
    };
    match commands::run(cli, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("symfuse: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
