//! Nonlinear eigenfunctions of the N = 1 similarity equation
//!
//! ```text
//! (|f|^n f⁽⁹⁾)' + (1 - αn)/10 · y f' + α f = 0,
//! ```
//!
//! with compact support on `[-y0, y0]`, by multiple shooting and damped
//! Newton; continuation in `n`; and the `n = 0` linear baseline on a long
//! finite domain with decay conditions from the WKBJ modes.
//!
//! The mobility `|f|^n` is regularised as `(f² + δ²)^(n/2)`.

mod branch;
mod newton;
mod shooting;
mod solve;
#[cfg(test)]
mod tests;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::odecore::{IntegratorConfig, OdeError};

pub use branch::{continue_branch, BranchConfig, BranchPoint, ContinuationBranch, StepLog};
pub use newton::{fd_jacobian, newton_shoot, newton_shoot_with, NewtonConfig, NewtonReport};
pub use solve::{cold_start_ladder, default_y0_guess, segments_for, solve, solve_k, solve_k0, solve_linear_n0, LINEAR_DECAY_LEVEL};

pub const DEFAULT_REG_DELTA: f64 = 1e-10;
/// Mobilities below this are treated as underflow.
pub const MOBILITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("mobility underflow at f = {f:e}")]
    MobilityUnderflow { f: f64 },
    #[error("Newton stalled at residual {residual:e} after {iterations} iterations")]
    NewtonStalled {
        residual: f64,
        iterations: usize,
        iterate: Vec<f64>,
    },
    #[error("bad initial guess: {0}")]
    BadInitialGuess(String),
    #[error("domain too short: {0}")]
    DomainTooShort(String),
    #[error("branch stalled; furthest n reached {n_reached}")]
    BranchStalled { n_reached: f64, branch: Box<ContinuationBranch> },
    #[error("invalid problem: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// `m(f) = (f² + δ²)^(n/2)`.
#[inline]
pub(crate) fn mobility(f: f64, n: f64, delta: f64) -> f64 {
    if n == 0.0 {
        1.0
    } else {
        (f * f + delta * delta).powf(0.5 * n)
    }
}

/// Similarity exponents `α` and `β = (1 - nα)/10`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub alpha: f64,
    pub beta: f64,
    pub n: f64,
    pub big_n: u32,
}

impl SimilarityTransform {
    pub fn new(n: f64, alpha: f64, big_n: u32) -> Self {
        Self {
            alpha,
            beta: (1.0 - n * alpha) / 10.0,
            n,
            big_n,
        }
    }

    /// The mass-conserving pair `α0 = N/(10 + Nn)`, `β0 = 1/(10 + Nn)`.
    pub fn mass_conserving(n: f64, big_n: u32) -> Self {
        let nn = f64::from(big_n);
        Self::new(n, nn / (10.0 + nn * n), big_n)
    }
}

/// `α_0(n) = 1/(10 + n)`.
pub fn alpha0(n: f64) -> f64 {
    1.0 / (10.0 + n)
}

/// Predictor `α_k(n) = 1/(10 + n) + k/10`.
pub fn alpha_predictor(n: f64, k: usize) -> f64 {
    1.0 / (10.0 + n) + k as f64 / 10.0
}

/// Tolerances and discretisation shared by every solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenConfig {
    pub reg_delta: f64,
    pub newton: NewtonConfig,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Number of shooting segments on `[0, y0]`.
    pub segments: usize,
    /// Output samples per segment (even, for Simpson).
    pub samples_per_segment: usize,
    /// Default upper end of the `n` range.
    pub n_max: f64,
    /// Domain length for the `n = 0` baseline.
    pub linear_length: f64,
    /// Initial free-boundary guess; `None` runs the cold-start ladder.
    pub y0_guess: Option<f64>,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            reg_delta: DEFAULT_REG_DELTA,
            newton: NewtonConfig::default(),
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            segments: 24,
            samples_per_segment: 64,
            n_max: 1.5,
            linear_length: 160.0,
            y0_guess: None,
        }
    }
}

impl EigenConfig {
    pub(crate) fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            max_steps: 200_000,
            ..IntegratorConfig::with_tolerances(self.rel_tol, self.abs_tol)
        }
    }

    pub fn validate(&self) -> Result<(), EigenError> {
        if !(self.reg_delta > 0.0) {
            return Err(EigenError::InvalidSpec(format!("reg_delta must be positive, got {}", self.reg_delta)));
        }
        if self.segments == 0 || self.samples_per_segment < 2 || self.samples_per_segment % 2 != 0 {
            return Err(EigenError::InvalidSpec(
                "need at least one segment and an even number (≥ 2) of samples per segment".into(),
            ));
        }
        Ok(())
    }
}

/// One eigenproblem: exponent `n`, index `k`, and solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenProblemSpec {
    pub n: f64,
    pub k: usize,
    pub config: EigenConfig,
}

impl EigenProblemSpec {
    pub fn new(n: f64, k: usize) -> Self {
        Self {
            n,
            k,
            config: EigenConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), EigenError> {
        self.config.validate()?;
        if !(self.n >= 0.0) || self.n > self.config.n_max {
            return Err(EigenError::InvalidSpec(format!(
                "n must lie in [0, {}], got {}",
                self.config.n_max, self.n
            )));
        }
        Ok(())
    }

    /// State dimension of the shooting system.
    pub fn dim(&self) -> usize {
        if self.k == 0 {
            9
        } else {
            10
        }
    }

    /// The `α` fixed by the problem, if any.
    pub fn fixed_alpha(&self) -> Option<f64> {
        (self.k == 0).then(|| alpha0(self.n))
    }
}

/// Newton unknowns plus the interior node states.
///
/// `free` holds `f″, f⁗, f⁽⁶⁾, f⁽⁸⁾` at `y = 0` for even `k`; for odd `k` it
/// holds `f‴, f⁽⁵⁾, f⁽⁷⁾` and the flux `m(f) f⁽⁹⁾`, which stays finite where
/// `f⁽⁹⁾` itself grows like `δ^(-n)`. Nodes sit at `y = y0·j/M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingState {
    pub free: [f64; 4],
    pub y0: f64,
    pub alpha: Option<f64>,
    pub nodes: Vec<Vec<f64>>,
}

impl ShootingState {
    /// `f⁽⁹⁾(0)` for odd `k`, recovered from the flux.
    pub fn ninth_derivative_at_centre(&self, n: f64, delta: f64) -> f64 {
        self.free[3] / mobility(0.0, n, delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `‖R‖∞` of the accepted Newton iterate.
    pub newton_residual: f64,
    pub newton_iterations: usize,
    pub newton_history: Vec<f64>,
    /// `max_i |f⁽ⁱ⁾(y0)|` over the imposed interface conditions.
    pub interface_residual: f64,
    /// Sup over the samples of `|m(f) f⁽⁹⁾ - F| / max(1, |f⁽⁹⁾|)`, where
    /// `f⁽⁹⁾` is a central difference of the sampled `f⁽⁸⁾` and `F` is the
    /// flux (`-α y f` for `k = 0`).
    pub flux_residual: f64,
    /// Sup over interior samples of the divergence-form residual
    /// `|F' + β y f' + α f|`, scaled by `max(1, |F'|)`, with `F'` from
    /// central differences of the sampled flux.
    pub ode_residual: f64,
    /// Free-boundary guesses tried before the accepted one (cold starts only).
    pub cold_starts: Vec<ColdStart>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColdStart {
    pub y0_guess: f64,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityProfile {
    pub k: usize,
    pub n: f64,
    pub alpha: f64,
    pub y0: f64,
    pub reg_delta: f64,
    pub grid: Vec<f64>,
    pub f: Vec<f64>,
    /// `f′ … f⁽⁴⁾` at the grid points.
    pub derivatives: Vec<[f64; 4]>,
    /// `m(f) f⁽⁹⁾` at the grid points.
    pub flux: Vec<f64>,
    pub residual: ResidualReport,
    pub shooting: ShootingState,
    pub manifest_id: Option<String>,
}

impl SimilarityProfile {
    pub fn transform(&self) -> SimilarityTransform {
        SimilarityTransform::new(self.n, self.alpha, 1)
    }

    /// Number of sign changes of `f` on `(0, y0)`, ignoring samples with
    /// `|f| ≤ threshold`.
    pub fn sign_changes(&self, threshold: f64) -> usize {
        let mut last = 0.0f64;
        let mut count = 0;
        for &v in &self.f[1..self.f.len().saturating_sub(1)] {
            if v.abs() <= threshold {
                continue;
            }
            if last != 0.0 && v.signum() != last.signum() {
                count += 1;
            }
            last = v;
        }
        count
    }

    /// Value at `y`, extended by zero beyond `y0` and by parity to `y < 0`.
    pub fn eval(&self, y: f64) -> f64 {
        let (a, s) = if y < 0.0 {
            (-y, if self.k % 2 == 0 { 1.0 } else { -1.0 })
        } else {
            (y, 1.0)
        };
        if a >= self.y0 {
            return 0.0;
        }
        let i = self.grid.partition_point(|&g| g <= a).clamp(1, self.grid.len() - 1);
        let (g0, g1) = (self.grid[i - 1], self.grid[i]);
        let w = (a - g0) / (g1 - g0);
        s * ((1.0 - w) * self.f[i - 1] + w * self.f[i])
    }
}

/// Simpson integral of `f` over `[0, y0]` together with the relative change
/// when the quadrature uses every other sample.
pub fn mass_with_check(profile: &SimilarityProfile) -> (f64, f64) {
    let fine = simpson(&profile.grid, &profile.f);
    let coarse_grid: Vec<f64> = profile.grid.iter().step_by(2).copied().collect();
    let coarse_f: Vec<f64> = profile.f.iter().step_by(2).copied().collect();
    let coarse = if coarse_grid.len() == profile.grid.len().div_ceil(2) && coarse_grid.last() == profile.grid.last() {
        simpson(&coarse_grid, &coarse_f)
    } else {
        fine
    };
    let rel = if fine == 0.0 {
        (coarse - fine).abs()
    } else {
        ((coarse - fine) / fine).abs()
    };
    (fine, rel)
}

/// Half-line mass `∫_0^{y0} f dy`.
pub fn mass(profile: &SimilarityProfile) -> f64 {
    mass_with_check(profile).0
}

/// Mass over `[-y0, y0]` under the parity extension: double for even `k`,
/// zero for odd `k`.
pub fn total_mass(profile: &SimilarityProfile) -> f64 {
    if profile.k % 2 == 0 {
        2.0 * mass(profile)
    } else {
        0.0
    }
}

/// Composite Simpson on a uniform grid; falls back to trapezoid on an odd
/// number of intervals.
fn simpson(x: &[f64], f: &[f64]) -> f64 {
    let m = x.len().saturating_sub(1);
    if m == 0 {
        return 0.0;
    }
    if m % 2 == 1 {
        return x.windows(2).zip(f.windows(2)).map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0] + f[1])).sum();
    }
    let h = (x[m] - x[0]) / m as f64;
    let mut s = f[0] + f[m];
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f[i];
    }
    s * h / 3.0
}

/// `ε(n) = exp(-1/√n)` and the product `n |ln ε| = √n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub n: f64,
    pub epsilon: f64,
    pub product: f64,
}

pub fn epsilon_schedule(n: f64) -> EpsilonSchedule {
    let r = n.sqrt();
    EpsilonSchedule {
        n,
        epsilon: (-1.0 / r).exp(),
        product: r,
    }
}

/// Highest derivative of the similarity equation.
///
/// With a 9-component state `(f, …, f⁽⁸⁾)` this is the once-integrated
/// `k = 0` form `f⁽⁹⁾ = -α y f / m(f)`. With 10 components `(f, …, f⁽⁹⁾)` the
/// divergence is expanded,
/// `m f⁽¹⁰⁾ + m′ f′ f⁽⁹⁾ + β y f′ + α f = 0`, and solved for `f⁽¹⁰⁾`.
pub fn profile_rhs(y: f64, state: &[f64], n: f64, alpha: f64, delta: f64) -> Result<f64, EigenError> {
    let f = state[0];
    let m = mobility(f, n, delta);
    if !(m >= MOBILITY_FLOOR) {
        return Err(EigenError::MobilityUnderflow { f });
    }
    match state.len() {
        9 => Ok(-alpha * y * f / m),
        10 => {
            let beta = (1.0 - alpha * n) / 10.0;
            let dm = n * f * (f * f + delta * delta).powf(0.5 * n - 1.0);
            Ok(-(dm * state[1] * state[9] + beta * y * state[1] + alpha * f) / m)
        }
        d => Err(EigenError::InvalidSpec(format!("state must have 9 or 10 components, got {d}"))),
    }
}
