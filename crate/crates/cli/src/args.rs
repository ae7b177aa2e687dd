use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "tfe10", version, about = "Similarity profiles, interface oscillations and asymptotics of the tenth-order thin-film equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Similarity profiles f_k(y) for each (n, k).
    EigenSolve(EigenSolveArgs),
    /// Continuation of α_k(n) and y0(n) over a range of n.
    EigenBranch(EigenBranchArgs),
    /// Limit cycle of the interface oscillation equation.
    Cycle(CycleArgs),
    /// Bisection for the exponent at which the limit cycle is destroyed.
    Heteroclinic(HeteroclinicArgs),
    /// Closed-form laws and bounds.
    #[command(subcommand)]
    Asymptotics(AsymptoticsCommand),
    /// Runs the invariant suites and prints a pass/fail table.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output directory (default: $TFE_OUT_DIR, then the working directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also render SVG line plots.
    #[arg(long)]
    pub svg: bool,
    /// TOML file of key = value overrides.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EigenSolveArgs {
    /// Mobility exponent(s), comma separated.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub n: Vec<f64>,
    /// Mode number(s), comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub k: Vec<usize>,
    /// Mobility regularisation δ.
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Newton tolerance on the shooting residual.
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    /// Initial free-boundary guess (skips the cold-start ladder).
    #[arg(long)]
    pub y0_guess: Option<f64>,
    /// Worker threads for independent solves.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EigenBranchArgs {
    /// Mode number(s), comma separated; each branch runs on its own worker.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub k: Vec<usize>,
    /// start:stop:step, stop included.
    #[arg(long, allow_hyphen_values = true)]
    pub n_range: String,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Formulation {
    Auto,
    Original,
    Normalized,
    Truncated,
}

#[derive(Debug, Clone, Args)]
pub struct CycleArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub n: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub lambda0: f64,
    /// Write ψ(s), s = 9η/n, instead of φ(η).
    #[arg(long)]
    pub rescaled: bool,
    #[arg(long, value_enum)]
    pub formulation: Option<Formulation>,
    /// Integrator relative tolerance.
    #[arg(long)]
    pub rtol: Option<f64>,
    /// Relative agreement of successive returns.
    #[arg(long)]
    pub cycle_tol: Option<f64>,
    /// Integration budget in η.
    #[arg(long)]
    pub max_eta: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct HeteroclinicArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub lambda0: f64,
    /// Final bracket width in n; at least 1e-5.
    #[arg(long, default_value_t = 5e-3, allow_negative_numbers = true)]
    pub tol: f64,
    #[arg(long, default_value_t = 1.13)]
    pub low: f64,
    #[arg(long, default_value_t = 1.25)]
    pub high: f64,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Subcommand)]
pub enum AsymptoticsCommand {
    /// Interface position y0(n) and x0(n, t).
    Interface {
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        n: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1", allow_negative_numbers = true)]
        t: Vec<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Spectra of B and B_n and the eigenvalue predictor.
    Spectrum {
        #[arg(long = "N", default_value_t = 1)]
        big_n: u32,
        #[arg(long = "K", default_value_t = 3)]
        k_max: usize,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        n: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// The root tan(4π/9) and its polynomial residuals.
    Lambda {
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Residual of the closed-form Hamilton–Jacobi potential under step halving.
    Hj {
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        t: f64,
        #[arg(long, default_value_t = 1e-2)]
        h: f64,
        #[arg(long, default_value_t = 6)]
        levels: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Measured operator difference against its bound for a Gaussian.
    Kato {
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2")]
        n: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long = "N", default_value_t = 1)]
        big_n: u32,
        #[arg(long, default_value_t = 2001)]
        points: usize,
        /// Gaussian width on [0, 1].
        #[arg(long, default_value_t = 0.15)]
        width: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Fast,
    Full,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[arg(long, value_enum, default_value_t = Suite::Fast)]
    pub suite: Suite,
    /// Replace the named check's tolerance with NaN so that it must fail.
    #[arg(long)]
    pub inject_failure: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}
