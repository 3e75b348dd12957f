//! `cheeger-lab`: generate datasets of random regular graphs, compute exact
//! and estimated Cheeger constants, and reproduce the accuracy reports.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Exact and estimated Cheeger constants of random regular graphs.
#[derive(Debug, Parser)]
#[command(name = "cheeger-lab", version, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate random regular graphs with their spectra and exact h
    Generate(GenerateArgs),
    /// Compute the exact Cheeger constant of one graph
    Solve(GraphArgs),
    /// Print the adjacency eigenvalues of one graph, largest first
    Spectrum(GraphArgs),
    /// Evaluate the spectral and size bounds on h
    Bounds(BoundsArgs),
    /// Fit a linear model of h on the leading eigenvalues
    Fit(FitArgs),
    /// Train a neural estimator of h on the leading eigenvalues
    Train(TrainArgs),
    /// Estimate h for every record of a dataset with a saved model
    Predict(PredictArgs),
    /// Reproduce the bound, regression and network accuracy reports
    Report(ReportArgs),
    /// Cross-check the exact solver, spectra and bounds on random graphs
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RegimeArg {
    Moderate,
    Full,
}

impl From<RegimeArg> for cheeger_core::Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Moderate => cheeger_core::Regime::Moderate,
            RegimeArg::Full => cheeger_core::Regime::Full,
        }
    }
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Single graph size; use --sizes for several
    #[arg(long, conflicts_with = "sizes")]
    n: Option<usize>,
    /// Comma-separated graph sizes
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    /// Use a single degree instead of the default spread over 3..=min(8, n-2)
    #[arg(long)]
    k: Option<usize>,
    /// Records per size [default: 2000 up to n=20, fewer above]
    #[arg(long)]
    count: Option<usize>,
    /// Master seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; output does not depend on this
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Output directory [default: $CHEEGER_LAB_DIR/data]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GraphArgs {
    /// Edge-list file, one "u v" pair per line, 0-indexed
    #[arg(conflicts_with_all = ["n", "k"])]
    file: Option<PathBuf>,
    /// Generate a random graph with this many vertices instead
    #[arg(long, requires = "k")]
    n: Option<usize>,
    /// Degree of the generated graph
    #[arg(long, requires = "n")]
    k: Option<usize>,
    /// Seed of the generated graph
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Machine-readable output instead of text
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// Degree
    #[arg(long)]
    k: usize,
    /// Number of vertices
    #[arg(long)]
    n: usize,
    /// Second-largest adjacency eigenvalue
    #[arg(long, allow_negative_numbers = true)]
    lambda1: f64,
    /// Machine-readable output instead of text
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Dataset directory or records file [default: $CHEEGER_LAB_DIR/data]
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Graph size to fit on
    #[arg(long)]
    n: usize,
    /// Number of leading eigenvalues used as features
    #[arg(long, default_value_t = 2)]
    eigs: usize,
    /// Model file [default: $CHEEGER_LAB_DIR/models/linear_n<N>_m<EIGS>.txt]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Dataset directory or records file [default: $CHEEGER_LAB_DIR/data]
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Graph size to train on
    #[arg(long)]
    n: usize,
    /// Number of leading eigenvalues used as inputs
    #[arg(long, default_value_t = 2)]
    eigs: usize,
    /// Training schedule
    #[arg(long, value_enum, default_value = "full")]
    regime: RegimeArg,
    /// Override the regime's epoch limit
    #[arg(long)]
    epochs: Option<usize>,
    /// Seed for the split, initial weights and batch order
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model file; the report goes next to it as <stem>.report.json
    /// [default: $CHEEGER_LAB_DIR/models/mlp_n<N>_<REGIME>.txt]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Linear or network model file written by `fit` or `train`
    #[arg(long)]
    model: PathBuf,
    /// Dataset directory or records file [default: $CHEEGER_LAB_DIR/data]
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Only predict records of these sizes (comma-separated)
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    /// Output format
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Dataset directory or records file [default: $CHEEGER_LAB_DIR/data]
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Sizes to report on (comma-separated) [default: all in the dataset]
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    /// Also train networks under this schedule and report on them
    #[arg(long, value_enum)]
    regime: Option<RegimeArg>,
    /// Number of leading eigenvalues fed to the networks
    #[arg(long, default_value_t = 2)]
    eigs: usize,
    /// Master seed for network training
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for charts and tables [default: $CHEEGER_LAB_DIR/report]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Largest graph size in the sweep (6..=16)
    #[arg(long, default_value_t = 12)]
    max_n: usize,
    /// Number of random graphs to check
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// Master seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also re-check every record of this dataset
    #[arg(long)]
    dataset: Option<PathBuf>,
}

/// Failure classes with distinct exit codes.
#[derive(Debug)]
enum Failure {
    /// Bad flags or flag combinations (exit 1).
    Usage(String),
    /// Unreadable data or a solver error (exit 2).
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<cheeger_core::Error> for Failure {
    fn from(e: cheeger_core::Error) -> Self {
        Failure::Data(e.into())
    }
}

/// First paragraph of a clap error, joined onto one line.
fn one_line(err: &clap::Error) -> String {
    let rendered = err.render().to_string();
    rendered
        .lines()
        .take_while(|l| !l.trim().is_empty())
        .map(str::trim)
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", one_line(&e));
            return ExitCode::from(1);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn errors_collapse_to_one_line() {
        let e = Cli::try_parse_from(["cheeger-lab", "bounds", "--n", "4"]).unwrap_err();
        let line = one_line(&e);
        assert!(!line.contains('\n'));
        assert!(line.contains("--k"), "{line}");
        assert!(line.contains("--lambda1"), "{line}");

        let e = Cli::try_parse_from(["cheeger-lab", "solve", "--bogus"]).unwrap_err();
        assert!(one_line(&e).contains("--bogus"));
    }

    #[test]
    fn negative_eigenvalues_parse() {
        let cli = Cli::try_parse_from([
            "cheeger-lab",
            "bounds",
            "--k",
            "3",
            "--n",
            "4",
            "--lambda1",
            "-1",
        ])
        .unwrap();
        match cli.command {
            Command::Bounds(b) => assert_eq!(b.lambda1, -1.0),
            other => panic!("parsed {other:?}"),
        }
    }
}
