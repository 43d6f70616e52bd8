//! `skgkit`: build SKG instruction corpora, report token statistics, score
//! predictions and inspect rendered records.
//!
//! Exit codes: 0 success, 1 validation failure, 2 I/O failure, 3 internal
//! invariant breach. Diagnostics go to standard error. Commands that write a
//! JSON report print its path as the last line of standard output.

mod cmd;
mod fail;
mod output;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use skgkit::budget::FitMode;
use skgkit::ingest::Split;
use skgkit::metrics::{MetricKind, Normalization, Smoothing};

use crate::cmd::stats::ModeArg;
use crate::fail::Failure;
use crate::setup::{with_jobs, Overrides};

#[derive(Parser, Debug)]
#[command(name = "skgkit", version, about = "Structured knowledge grounding corpus toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FitModeArg {
    Train,
    Inference,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum MetricArg {
    ExactMatch,
    Accuracy,
    TokenF1,
    CorpusBleu,
    JointAccuracy,
    DenotationMatch,
    MicroEntityF1,
}

impl From<MetricArg> for MetricKind {
    fn from(m: MetricArg) -> MetricKind {
        match m {
            MetricArg::ExactMatch => MetricKind::ExactMatch,
            MetricArg::Accuracy => MetricKind::Accuracy,
            MetricArg::TokenF1 => MetricKind::TokenF1,
            MetricArg::CorpusBleu => MetricKind::CorpusBleu,
            MetricArg::JointAccuracy => MetricKind::JointAccuracy,
            MetricArg::DenotationMatch => MetricKind::DenotationMatch,
            MetricArg::MicroEntityF1 => MetricKind::MicroEntityF1,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SmoothingArg {
    None,
    AddK,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render the train split of every dataset and mix in general data.
    Build {
        /// Corpus manifest (TOML).
        #[arg(long)]
        manifest: PathBuf,
        /// Corpus JSON Lines output; the report goes to `<out>.report.json`.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Worker threads; 1 runs sequentially.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Token-length statistics per dataset.
    Stats {
        /// Corpus manifest (TOML).
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "train")]
        split: SplitArg,
        /// Budget mode; defaults to train for the train split and inference
        /// for the test split.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// JSON sidecar path; defaults to `<manifest>.stats.<split>.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Score predictions against references.
    Eval {
        #[arg(long, value_enum)]
        metric: MetricArg,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Report path; defaults to `<pred>.<metric>.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Compare case-sensitively.
        #[arg(long)]
        keep_case: bool,
        /// Drop punctuation and symbols before comparing.
        #[arg(long)]
        strip_punct: bool,
        /// Keep whitespace runs as they are.
        #[arg(long)]
        keep_whitespace: bool,
        #[arg(long, value_enum, default_value = "add-k")]
        smoothing: SmoothingArg,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print one rendered record with token counts per segment.
    Inspect {
        id: String,
        /// Corpus manifest (TOML).
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "train")]
        split: SplitArg,
        #[arg(long, value_enum, default_value = "train")]
        mode: FitModeArg,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<Option<PathBuf>, Failure> {
    match cli.command {
        Command::Build {
            manifest,
            out,
            overrides,
            jobs,
        } => with_jobs(jobs, |exec| cmd::build::run(&manifest, &out, &overrides, exec)).map(Some),
        Command::Stats {
            manifest,
            split,
            mode,
            out,
            overrides,
            jobs,
        } => {
            let split = Split::from(split);
            let mode = mode.unwrap_or(ModeArg::default_for(split));
            let out = out.unwrap_or_else(|| cmd::stats::default_out(&manifest, split));
            with_jobs(jobs, |exec| {
                cmd::stats::run(&manifest, split, mode, &out, &overrides, exec)
            })
            .map(Some)
        }
        Command::Eval {
            metric,
            pred,
            reference,
            out,
            keep_case,
            strip_punct,
            keep_whitespace,
            smoothing,
            jobs,
        } => {
            let kind = MetricKind::from(metric);
            let norm = Normalization {
                lowercase: !keep_case,
                strip_punct,
                collapse_ws: !keep_whitespace,
            };
            let smoothing = match smoothing {
                SmoothingArg::None => Smoothing::None,
                SmoothingArg::AddK => Smoothing::AddK,
            };
            let out = out.unwrap_or_else(|| cmd::eval::default_out(&pred, kind));
            with_jobs(jobs, |exec| {
                cmd::eval::run(&pred, &reference, kind, norm, smoothing, &out, exec)
            })
            .map(Some)
        }
        Command::Inspect {
            id,
            manifest,
            split,
            mode,
            overrides,
            jobs,
        } => {
            let mode = match mode {
                FitModeArg::Train => FitMode::Train,
                FitModeArg::Inference => FitMode::Inference,
            };
            with_jobs(jobs, |exec| {
                cmd::inspect::run(&manifest, &id, split.into(), mode, &overrides, exec)
            })
            .map(|()| None)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            if let Some(path) = report {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprintln!("error: {failure}");
            failure.exit_code()
        }
    }
}
