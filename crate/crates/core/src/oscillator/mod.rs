//! Oscillatory structure of similarity profiles near an interface.
//!
//! Writing `f(y) = (y0 - y)^μ φ(η)` with `η = ln(y0 - y)` and `μ = 9/n`
//! turns the flux balance `|f|^n f^(9) ~ λ0 f` into the autonomous
//! ninth-order equation
//!
//! ```text
//! Σ_{k=0}^{9} a_k φ^(9-k) + λ0 |φ|^{-n} φ = 0,
//! ```
//!
//! where `a_k` is the `k`-th elementary symmetric polynomial of
//! `{μ - i : i = 0..8}`. Its amplitude is of order `(n/9)^(9/n)`, so all
//! long integrations run on the amplitude-normalised form
//! `φ(η) = (n/9)^(9/n) ψ(s)`, `s = 9η/n`.

mod cycle;
mod heteroclinic;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::odecore::{OdeError, OdeProblem};

pub use cycle::{default_cycle_init, find_limit_cycle, RELAXATION_FLOOR, CycleConfig, CycleFormulation, LimitCycle};
pub use heteroclinic::{
    classify_trajectory, locate_heteroclinic, trace_from_equilibrium, unstable_direction, ClassifyConfig,
    HeteroclinicResult, TraceReport, TrajectoryClass, UnstableMode,
};

/// Number of derivative components in the oscillation ODE state.
pub const ORDER: usize = 9;

/// Below this exponent only the truncated small-`n` system is integrated.
pub const SMALL_N_SWITCHOVER: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfaceOscillatorParams {
    pub n: f64,
    pub lambda0: f64,
    pub mu: f64,
    pub reg_delta: f64,
}

impl InterfaceOscillatorParams {
    pub const DEFAULT_REG_DELTA: f64 = 1e-10;

    pub fn new(n: f64, lambda0: f64) -> Result<Self, OscillatorError> {
        Self::with_reg_delta(n, lambda0, Self::DEFAULT_REG_DELTA)
    }

    pub fn with_reg_delta(n: f64, lambda0: f64, reg_delta: f64) -> Result<Self, OscillatorError> {
        if !(n > 0.0 && n.is_finite()) {
            return Err(OscillatorError::InvalidParams(format!("n must be positive, got {n}")));
        }
        if !(lambda0 > 0.0 && lambda0.is_finite()) {
            return Err(OscillatorError::InvalidParams(format!(
                "lambda0 must be positive, got {lambda0}"
            )));
        }
        if !(reg_delta > 0.0) {
            return Err(OscillatorError::InvalidParams(format!(
                "regularisation must be positive, got {reg_delta}"
            )));
        }
        Ok(Self {
            n,
            lambda0,
            mu: 9.0 / n,
            reg_delta,
        })
    }

    /// `log10` of the natural amplitude scale `(n/9)^(9/n)`.
    pub fn log10_amplitude_scale(&self) -> f64 {
        self.mu * (self.n / 9.0).log10()
    }

    /// The amplitude scale itself; underflows to zero for `n ≲ 0.06`.
    pub fn amplitude_scale(&self) -> f64 {
        10f64.powf(self.log10_amplitude_scale())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OscillatorError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no real equilibrium: Π(μ-i) = {product} is not negative (n = {n})")]
    NoRealEquilibrium { n: f64, product: f64 },
    #[error("no convergence to a limit cycle by η = {eta} ({reason})")]
    NoConvergence { eta: f64, reason: String },
    #[error("trajectory settled at the equilibrium {sign}φ0 by η = {eta}")]
    EscapedToEquilibrium { eta: f64, sign: f64 },
    #[error("bracket [{low}, {high}] has the same outcome ({outcome:?}) at both ends")]
    InconsistentBracket {
        low: f64,
        high: f64,
        outcome: TrajectoryClass,
    },
    #[error("classification undecided at n = {n}")]
    UndecidedRegion { n: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// Coefficients `a_0 … a_9` of the Euler-type operator `Π_{i=0}^{8}(D + μ - i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerCoefficients {
    pub a: [f64; 10],
}

impl EulerCoefficients {
    /// `Σ a_k x^(9-k)`, evaluated by Horner's rule.
    pub fn eval(&self, x: f64) -> f64 {
        self.a.iter().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.a.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }
}

/// Elementary symmetric polynomials of `{μ - i : i = 0..8}` by the
/// one-root-at-a-time recurrence `e_k ← e_k + x·e_{k-1}`.
pub fn euler_coefficients(mu: f64) -> EulerCoefficients {
    elementary_symmetric((0..9).map(|i| mu - i as f64))
}

fn elementary_symmetric(roots: impl Iterator<Item = f64>) -> EulerCoefficients {
    let mut e = [0.0; 10];
    e[0] = 1.0;
    let mut m = 0;
    for x in roots {
        m += 1;
        for k in (1..=m).rev() {
            e[k] += x * e[k - 1];
        }
    }
    EulerCoefficients { a: e }
}

/// `x (x² + δ²)^(-n/2)`, the regularised `|x|^{-n} x`.
#[inline]
pub(crate) fn regularized_power(x: f64, n: f64, delta: f64) -> f64 {
    x * (x * x + delta * delta).powf(-0.5 * n)
}

pub(crate) fn companion_problem(coeffs: [f64; 10], lambda: f64, n: f64, delta: f64) -> OdeProblem {
    OdeProblem::new(ORDER, move |_, y, dy| {
        dy[..ORDER - 1].copy_from_slice(&y[1..ORDER]);
        let mut acc = lambda * regularized_power(y[0], n, delta);
        for k in 1..=9 {
            acc += coeffs[k] * y[9 - k];
        }
        dy[ORDER - 1] = -acc;
    })
}

/// The oscillation ODE in the original variables; component `j` is `φ^(j)`.
pub fn eqlc_problem(params: &InterfaceOscillatorParams) -> OdeProblem {
    let a = euler_coefficients(params.mu).a;
    companion_problem(a, params.lambda0, params.n, params.reg_delta)
}

/// The same equation after `φ(η) = (n/9)^(9/n) ψ(s)`, `s = 9η/n`, with no
/// terms dropped: `Σ a_k μ^{-k} ψ^(9-k) + λ0 |ψ|^{-n} ψ = 0`.
pub fn normalized_problem(params: &InterfaceOscillatorParams) -> OdeProblem {
    companion_problem(normalized_coefficients(params.mu), params.lambda0, params.n, params.reg_delta)
}

pub(crate) fn normalized_coefficients(mu: f64) -> [f64; 10] {
    let mut b = elementary_symmetric((0..9).map(|i| 1.0 - i as f64 / mu)).a;
    // a_k / μ^k, computed from the scaled roots to avoid overflow for large μ
    b[0] = 1.0;
    b
}

/// Row 9 of Pascal's triangle.
pub const BINOMIAL_9: [f64; 10] = [1.0, 9.0, 36.0, 84.0, 126.0, 126.0, 84.0, 36.0, 9.0, 1.0];

/// Small-`n` limit of [`normalized_problem`]:
/// `Σ C(9,k) ψ^(9-k) = -λ0 ψ/|ψ|^n`, i.e. `e^{-s} (e^s ψ)^(9) = -λ0 ψ/|ψ|^n`.
pub fn rescaled_problem(n: f64, lambda0: f64) -> OdeProblem {
    rescaled_problem_with_delta(n, lambda0, InterfaceOscillatorParams::DEFAULT_REG_DELTA)
}

pub fn rescaled_problem_with_delta(n: f64, lambda0: f64, delta: f64) -> OdeProblem {
    companion_problem(BINOMIAL_9, lambda0, n, delta)
}

/// `log10 ‖φ‖∞` from a `ψ`-amplitude via `φ = (n/9)^(9/n) ψ`.
pub fn log10_phi_amplitude(n: f64, psi_amplitude: f64) -> f64 {
    (9.0 / n) * (n / 9.0).log10() + psi_amplitude.abs().log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPair {
    /// The equilibria are `±phi0`.
    pub phi0: f64,
    /// Open interval of `n` in which the pair exists, `(9/8, 9/7)`.
    pub validity_window: (f64, f64),
}

impl EquilibriumPair {
    /// State vector of the constant solution `sign·φ0`.
    pub fn state(&self, sign: f64) -> Vec<f64> {
        let mut s = vec![0.0; ORDER];
        s[0] = sign * self.phi0;
        s
    }
}

/// Constant solutions `φ ≡ ±φ0`, `φ0 = (-λ0 / Π(μ-i))^(1/n)`.
pub fn equilibrium(params: &InterfaceOscillatorParams) -> Result<EquilibriumPair, OscillatorError> {
    let product = euler_coefficients(params.mu).a[9];
    if !(product < 0.0) {
        return Err(OscillatorError::NoRealEquilibrium { n: params.n, product });
    }
    Ok(EquilibriumPair {
        phi0: (-params.lambda0 / product).powf(1.0 / params.n),
        validity_window: (9.0 / 8.0, 9.0 / 7.0),
    })
}

/// Roots of `(ν + 1)^9 + λ0 = 0` and the dominant oscillatory mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearModes {
    pub roots: Vec<Complex64>,
    /// `λ0^(1/9) cos(π/9) - 1`.
    pub decay_rate: f64,
    /// `λ0^(1/9) sin(π/9)`.
    pub frequency: f64,
}

pub fn linear_limit_modes(lambda0: f64) -> LinearModes {
    let r = lambda0.powf(1.0 / 9.0);
    let roots = (0..9)
        .map(|m| {
            let theta = std::f64::consts::PI * (2 * m + 1) as f64 / 9.0;
            Complex64::new(-1.0, 0.0) + Complex64::from_polar(r, theta)
        })
        .collect();
    let base = std::f64::consts::PI / 9.0;
    LinearModes {
        roots,
        decay_rate: r * base.cos() - 1.0,
        frequency: r * base.sin(),
    }
}

#[cfg(test)]
mod tests;
