use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "gilbert",
    version,
    about = "Closest separable state and entanglement indicators for bipartite states"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run Gilbert's algorithm on one state and compute its indicators.
    Run {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sample a family plane, run every point and interpolate charts.
    Chart {
        /// Chart specification (JSON).
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Fraction of PPT states in the magic simplex and their indicators.
    Volumetry {
        #[arg(long, value_enum)]
        sampler: SamplerArg,
        /// Number of PPT states to collect.
        #[arg(long)]
        n_ppt: usize,
        /// Only count PPT draws; skip the Gilbert runs.
        #[arg(long)]
        count_only: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Decay estimate as a function of the number of corrections.
    Dynamics {
        #[command(flatten)]
        state: StateArgs,
        /// Planted trace `l_k = a0 + b / k` instead of a Gilbert run.
        #[arg(long, value_name = "A0,B", allow_hyphen_values = true)]
        synthetic: Option<String>,
        /// Number of entries of the planted trace.
        #[arg(long, default_value_t = 200)]
        synthetic_len: usize,
        /// Corrections between re-evaluations of the decay estimate.
        #[arg(long, default_value_t = 500)]
        checkpoint_every: u64,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Simplex,
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    #[value(name = "A")]
    A,
    #[value(name = "B")]
    B,
    #[value(name = "B1")]
    B1,
    #[value(name = "B2")]
    B2,
    #[value(name = "B3")]
    B3,
}

/// One of: a family point, nine raw Bell weights, or a density-matrix file.
#[derive(Debug, Clone, Args)]
pub struct StateArgs {
    #[arg(long, value_enum, ignore_case = true)]
    pub family: Option<FamilyArg>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Bell weights p00,p01,...,p22 (row-major, comma separated).
    #[arg(long, allow_hyphen_values = true)]
    pub weights: Option<String>,
    /// Density matrix as {"dims": [dA, dB], "re": [[...]], "im": [[...]]}.
    #[arg(long)]
    pub state: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Output directory.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
    /// Gilbert configuration (JSON); flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for batches (default: available cores).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub max_corrections: Option<u64>,
    #[arg(long)]
    pub max_trials: Option<u64>,
    /// Halt once the squared distance is below this value.
    #[arg(long)]
    pub halt_d2: Option<f64>,
    /// Corrections between logged distances.
    #[arg(long)]
    pub cadence: Option<u64>,
    /// Local-unitary rounds per accepted trial.
    #[arg(long)]
    pub lu_iters: Option<u64>,
    /// Local-unitary rotation angle (radians).
    #[arg(long)]
    pub lu_phase: Option<f64>,
    /// Disable local-unitary trial optimization.
    #[arg(long)]
    pub no_lu_opt: bool,
    /// Seesaw restarts for the witness offset.
    #[arg(long)]
    pub witness_restarts: Option<usize>,
}
