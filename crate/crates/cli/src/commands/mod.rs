mod asymptotics;
mod eigen;
mod oscillator;

use crate::args::{Cli, Command};
use crate::CliError;

pub use eigen::{branch_grid, eigen_config};

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::EigenSolve(a) => eigen::solve(a),
        Command::EigenBranch(a) => eigen::branch(a),
        Command::Cycle(a) => oscillator::cycle(a),
        Command::Heteroclinic(a) => oscillator::heteroclinic(a),
        Command::Asymptotics(a) => asymptotics::run(a),
        Command::Check(a) => crate::check::run(a),
    }
}

/// Thread pool for independent work items; `0` uses every core.
pub(crate) fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))
}
