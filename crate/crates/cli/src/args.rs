use std::path::PathBuf;

use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "clenshaw",
    version,
    about = "Chebyshev-U residual graph filters: checks, training and graph statistics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum Command {
    /// Run a randomized verification suite and emit a JSON report.
    Verify(VerifyArgs),
    /// Train a model on files or a synthetic block model, one run per seed.
    Train(TrainArgs),
    /// Tabulate a polynomial filter response as CSV.
    FilterResponse(FilterArgs),
    /// Node-level homophily of a labeled graph.
    Homophily(HomophilyArgs),
    /// Eigenvalues of the propagation operator, ascending.
    Spectrum(SpectrumArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn out(&self) -> Option<&PathBuf> {
        match self {
            Command::Verify(a) => a.out.as_ref(),
            Command::Train(a) => a.out.as_ref(),
            Command::FilterResponse(a) => a.out.as_ref(),
            Command::Homophily(a) => a.out.as_ref(),
            Command::Spectrum(a) => a.out.as_ref(),
            Command::Replay(a) => a.out.as_ref(),
        }
    }

    pub fn set_out(&mut self, out: Option<PathBuf>) {
        match self {
            Command::Verify(a) => a.out = out,
            Command::Train(a) => a.out = out,
            Command::FilterResponse(a) => a.out = out,
            Command::Homophily(a) => a.out = out,
            Command::Spectrum(a) => a.out = out,
            Command::Replay(a) => a.out = out,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(long, value_parser = PossibleValuesParser::new(
        ["clenshaw-scalar", "theorem1", "theorem2", "gcnii-unfold", "gradients", "spectral", "models", "all"]
    ))]
    pub suite: String,
    #[arg(long, env = "CLENSHAW_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Random cases per check; each suite has its own default.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GraphFiles {
    /// Edge list, `u v` or `u v w` per line.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// CSV, one row per node.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// One integer class per line.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub files: GraphFiles,
    /// Synthetic two-block model instead of files; regenerated per seed.
    #[arg(long, value_parser = PossibleValuesParser::new(["hetero-default", "homo-default"]),
          conflicts_with_all = ["edges", "features", "labels"])]
    pub sbm: Option<String>,
    #[arg(long)]
    pub normalize_features: bool,
    #[arg(long, default_value = "clenshaw",
          value_parser = PossibleValuesParser::new(["clenshaw", "horner", "fixed-param", "gcn", "gcnii"]))]
    pub variant: String,
    #[arg(long, default_value_t = 16)]
    pub k: usize,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    /// Drop out only before the input and output layers, not inside the stack.
    #[arg(long)]
    pub no_layer_dropout: bool,
    #[arg(long, default_value_t = 0.1)]
    pub lr_alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    pub lr_weights: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub weight_decay: f64,
    /// Teleport weight of fixed-param and gcnii.
    #[arg(long, default_value_t = 0.1)]
    pub fixed_alpha: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 300)]
    pub patience: usize,
    /// `a..b` (inclusive) or a comma list.
    #[arg(long, env = "CLENSHAW_SEED", default_value = "0")]
    pub seeds: String,
    /// Train/validation/test fractions.
    #[arg(long, default_value = "0.6,0.2,0.2")]
    pub split: String,
    /// Results JSON; checkpoints are written beside it. Stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FilterArgs {
    /// Comma-separated coefficients.
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["alphas_file", "checkpoint"])]
    pub alphas: Option<String>,
    /// File of whitespace- or comma-separated coefficients.
    #[arg(long, conflicts_with = "checkpoint")]
    pub alphas_file: Option<PathBuf>,
    /// Use the filter learned by a trained model.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "chebyshev-u",
          value_parser = PossibleValuesParser::new(["monomial", "chebyshev-u", "chebyshev-t"]))]
    pub basis: String,
    /// Coefficients are residues in layer order; reverse them into degree order.
    #[arg(long)]
    pub reverse: bool,
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    /// Evaluate at the spectrum of this graph instead of a uniform grid.
    #[arg(long)]
    pub spectrum_of: Option<PathBuf>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long, default_value_t = clenshaw_core::spectral::DEFAULT_DENSE_LIMIT)]
    pub dense_limit: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct HomophilyArgs {
    #[arg(long)]
    pub edges: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub edges: PathBuf,
    /// Node count; defaults to one past the largest index in the edge list.
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long, default_value_t = clenshaw_core::spectral::DEFAULT_DENSE_LIMIT)]
    pub dense_limit: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write to this path instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
