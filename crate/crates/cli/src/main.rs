use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use citestat::BinningKey;

mod commands;
mod output;

#[derive(Debug, Parser)]
#[command(name = "citestat", version, about = "Citation-record statistics and indicator evaluation")]
struct Cli {
    #[command(flatten)]
    shared: Shared,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Csv,
    Json,
}

/// Flags accepted by every command.
#[derive(Debug, Args)]
pub struct Shared {
    /// Corpus file (CSV or JSON; JSON if the extension is `.json`).
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Override input format detection.
    #[arg(long, global = true, value_enum)]
    input_format: Option<InputFormat>,

    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,

    /// JSON array of citation-bin lower edges (default: 0,1,10,50,100,500).
    #[arg(long, global = true)]
    bins: Option<PathBuf>,

    /// Indicator name, or `hash` for the null indicator.
    #[arg(long, global = true, default_value = "mean_citations")]
    indicator: BinningKey,

    #[arg(long = "num-bins", global = true, default_value_t = citestat::bayes::DEFAULT_NUM_BINS)]
    num_bins: usize,

    #[arg(long, global = true, default_value_t = citestat::bayes::DEFAULT_PSEUDOCOUNT)]
    pseudocount: f64,

    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    #[arg(long = "leave-one-out", global = true)]
    leave_one_out: bool,

    /// Write data here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

/// Where eval-indicator and curve take authors from.
#[derive(Debug, Args)]
pub struct SimulationSource {
    /// Generate the corpus from a preset instead of reading `--input`.
    #[arg(long)]
    simulate: Option<String>,

    /// Tilt strength for the `separated` preset.
    #[arg(long)]
    separation: Option<f64>,

    #[arg(long, default_value_t = 1000)]
    authors: usize,

    /// Papers per author (defaults to the preset's value).
    #[arg(long)]
    papers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Unlikelihood r of every author's record.
    Score {
        /// JSON array of citation-bin probabilities (default: built-in SPIRES distribution).
        #[arg(long)]
        distribution: Option<PathBuf>,

        /// Rescale the distribution to sum to exactly one.
        #[arg(long)]
        renormalize: bool,
    },
    /// Confusion matrix, assignment metrics and adjacent-bin KL divergences
    /// of an author indicator.
    EvalIndicator {
        #[command(flatten)]
        source: SimulationSource,

        /// Also write the confusion matrix CSV to this path.
        #[arg(long)]
        matrix_out: Option<PathBuf>,

        /// Report KL divergences in bits instead of nats.
        #[arg(long)]
        kl_bits: bool,
    },
    /// Assignment accuracy against the number of papers per author (TSV).
    Curve {
        #[command(flatten)]
        source: SimulationSource,

        /// Comma-separated paper counts.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        ns: Vec<usize>,

        #[arg(long, default_value_t = 5)]
        trials: usize,
    },
    /// Chi-square homogeneity and mean-citation ratio for each field pair.
    Homogeneity,
    /// Per-field percentiles and combined score of every author.
    Rank,
    /// Write a synthetic corpus.
    Simulate {
        /// separated | homogeneous | table1_global | two_field
        #[arg(long, default_value = "separated")]
        preset: String,

        /// Custom model JSON; overrides `--preset`.
        #[arg(long)]
        model: Option<PathBuf>,

        #[arg(long, default_value_t = 1000)]
        authors: usize,

        #[arg(long)]
        papers: Option<usize>,

        #[arg(long)]
        separation: Option<f64>,

        /// Citation scale of the second field for `two_field`.
        #[arg(long, default_value_t = 2.0)]
        scale: f64,

        /// Write `author_id,true_class` (synthetic classes) to this path.
        #[arg(long)]
        truth_out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Score {
            distribution,
            renormalize,
        } => commands::score(&cli.shared, distribution.as_deref(), renormalize),
        Command::EvalIndicator {
            source,
            matrix_out,
            kl_bits,
        } => commands::eval_indicator(&cli.shared, &source, matrix_out.as_deref(), kl_bits),
        Command::Curve { source, ns, trials } => commands::curve(&cli.shared, &source, &ns, trials),
        Command::Homogeneity => commands::homogeneity(&cli.shared),
        Command::Rank => commands::rank(&cli.shared),
        Command::Simulate {
            preset,
            model,
            authors,
            papers,
            separation,
            scale,
            truth_out,
        } => commands::simulate(
            &cli.shared,
            &commands::SimulateArgs {
                preset,
                model,
                authors,
                papers,
                separation,
                scale,
                truth_out,
            },
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
