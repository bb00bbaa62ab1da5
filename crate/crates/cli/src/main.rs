//! `neuromamba` command-line interface.
//!
//! Every subcommand reads and writes plain files, so stages can be chained
//! from a shell script. Failures print one JSON line to stderr and exit with
//! 2 (usage), 3 (data) or 4 (numeric).

mod commands;
mod session;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use session::{CliError, Session};

#[derive(Parser)]
#[command(name = "neuromamba", version, about = "Behavior-score prediction from parcellated fMRI timeseries")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct GlobalArgs {
    /// Master seed; overrides the seed of any config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Never changes results.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Precision::F32)]
    precision: Precision,
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Also write the pooled region vector of every subject.
    #[arg(long, global = true)]
    dump_intermediate: bool,
    /// Use raw scores instead of z-scores against the normative subjects.
    #[arg(long, global = true)]
    no_zscore: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeatureKind {
    Fcm,
    Iica,
    Gica,
    Alff,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeadArg {
    Regression,
    Bce,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort with planted temporal signal.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract baseline features (connectivity, ICA or ALFF).
    Features {
        #[arg(long, value_enum)]
        method: FeatureKind,
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// ICA components.
        #[arg(long, default_value_t = 10)]
        components: usize,
        #[arg(long, default_value_t = neuromamba::baselines::DEFAULT_BAND.0)]
        band_lo: f64,
        #[arg(long, default_value_t = neuromamba::baselines::DEFAULT_BAND.1)]
        band_hi: f64,
    },
    /// Kernel ridge regression on a feature table.
    Krr {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        cohort: PathBuf,
        /// RBF width; with --ridge skips the grid search.
        #[arg(long, requires = "ridge")]
        gamma: Option<f64>,
        #[arg(long, requires = "gamma")]
        ridge: Option<f64>,
        /// Leave-one-out predictions; without it predictions are in-sample.
        #[arg(long)]
        loocv: bool,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        scatter: Option<PathBuf>,
        #[arg(long, default_value_t = neuromamba::regression::DEFAULT_PERMUTATIONS)]
        permutations: usize,
    },
    /// Train on a whole cohort and write a checkpoint.
    Train {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = HeadArg::Regression)]
        head: HeadArg,
        /// Per-epoch training loss as JSON.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Leave-one-out evaluation of NeuroMamba.
    Loocv {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        scatter: Option<PathBuf>,
        #[arg(long, default_value_t = neuromamba::regression::DEFAULT_PERMUTATIONS)]
        permutations: usize,
    },
    /// Permutation feature importance of a trained checkpoint.
    Pfi {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        report: PathBuf,
        /// Ranking table as CSV.
        #[arg(long)]
        ranking: Option<PathBuf>,
        /// Region metadata CSV (first column: region label) joined into the ranking.
        #[arg(long, requires = "ranking")]
        regions: Option<PathBuf>,
    },
    /// Impaired-vs-CN classification with the BCE head and a MoCA-only baseline.
    Classify {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        cohort: PathBuf,
        /// ROC of the NeuroMamba-BCE model (fpr, tpr, threshold).
        #[arg(long)]
        roc: PathBuf,
        /// Leave-one-out finetuning of a fresh BCE head from the checkpoint.
        #[arg(long)]
        loocv: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Zero-, few- or all-shot adaptation of a checkpoint to a target cohort.
    Adapt {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        cohort: PathBuf,
        /// Subjects per diagnosis used for finetuning, or "all".
        #[arg(long)]
        shots: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        scatter: Option<PathBuf>,
        /// Where to save the finetuned model.
        #[arg(long)]
        out_checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = neuromamba::regression::DEFAULT_PERMUTATIONS)]
        permutations: usize,
    },
    /// Finite-difference check of every parameter gradient (64-bit only).
    Gradcheck {
        /// Model config JSON; defaults to a small 4-region model.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        timepoints: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let session = Session::new(&cli.global)?;
    session.install(|| commands::dispatch(&session, cli.command))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", CliError::usage("usage", first).to_json());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
