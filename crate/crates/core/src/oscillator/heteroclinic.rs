use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::cycle::{run_relaxed, CycleConfig, CycleFormulation, Formulated, RunEnd};
use super::{normalized_coefficients, InterfaceOscillatorParams, OscillatorError, ORDER};
use crate::odecore::jacobian_fd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryClass {
    ConvergesToCycle,
    HeteroclinicToOpposite,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub cycle: CycleConfig,
    /// Displacement from `φ0` in units of `φ0`, along the unstable direction.
    pub perturbation: f64,
    /// Perturb along the unstable eigenvector rather than `φ` alone.
    pub along_eigenvector: bool,
    /// `+1` starts at `+φ0`, `-1` at the mirror image `-φ0`.
    pub start_sign: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            cycle: CycleConfig {
                formulation: CycleFormulation::Normalized,
                max_eta: 2_000.0,
                ..CycleConfig::default()
            },
            perturbation: -1e-3,
            along_eigenvector: true,
            start_sign: 1.0,
        }
    }
}

/// The unstable mode of the linearisation at `φ0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnstableMode {
    /// Growth rate per unit `η`.
    pub rate: f64,
    /// Eigenvector in `ψ` units, first component `1`.
    pub vector: Vec<f64>,
    /// Largest real part among the eigenvalues of the finite-difference Jacobian.
    pub jacobian_rate: f64,
}

/// Most unstable eigendirection at `+φ0`.
///
/// The finite-difference Jacobian's spectrum selects the mode; its real
/// eigenvalue is then polished on `B(ν) = (1 - n) b_9`, where `B` is the
/// characteristic polynomial of the normalised linear part.
pub fn unstable_direction(params: &InterfaceOscillatorParams) -> Result<UnstableMode, OscillatorError> {
    let form = Formulated::new(params, CycleFormulation::Normalized)?;
    let psi0 = form.eq.ok_or(OscillatorError::NoRealEquilibrium {
        n: params.n,
        product: super::euler_coefficients(params.mu).a[9],
    })?;
    let mut state = vec![0.0; ORDER];
    state[0] = psi0;
    let jac: DMatrix<f64> = jacobian_fd(&form.problem, 0.0, &state, 1e-7)?;
    let eig = jac.complex_eigenvalues();
    let lead = eig.iter().max_by(|a, b| a.re.total_cmp(&b.re)).copied().expect("nine eigenvalues");

    let b = normalized_coefficients(params.mu);
    let target = (1.0 - params.n) * b[9];
    let poly = |x: f64| b.iter().fold(0.0, |acc, &c| acc * x + c) - target;
    let dpoly = |x: f64| {
        b.iter()
            .take(9)
            .enumerate()
            .fold(0.0, |acc, (k, &c)| acc * x + (9 - k) as f64 * c)
    };
    let mut nu = lead.re;
    for _ in 0..50 {
        let step = poly(nu) / dpoly(nu);
        nu -= step;
        if step.abs() <= 1e-15 * nu.abs().max(1.0) {
            break;
        }
    }
    let vector = (0..ORDER).map(|j| nu.powi(j as i32)).collect();
    Ok(UnstableMode {
        rate: nu * params.mu,
        vector,
        jacobian_rate: lead.re * params.mu,
    })
}

/// Outcome of following the unstable manifold of `φ0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub n: f64,
    pub class: TrajectoryClass,
    /// How the integration ended.
    pub reason: String,
    /// Closest approach to the opposite equilibrium, in units of `φ0`.
    pub min_dist_opposite: f64,
    pub eta_end: f64,
    /// Relative tolerance actually used, after any automatic relaxation.
    pub rel_tol: f64,
}

/// Follows the unstable manifold of `φ0` and reports where it goes.
pub fn classify_trajectory(
    params: &InterfaceOscillatorParams,
    config: &ClassifyConfig,
) -> Result<TrajectoryClass, OscillatorError> {
    Ok(trace_from_equilibrium(params, config)?.class)
}

/// Starts at `±(φ0 + p φ0 v)` (`v` the unstable eigenvector with `v_0 = 1`, or
/// `e_0`) and integrates forward in `η`.
///
/// Converging section returns mean the manifold feeds the limit cycle;
/// dwelling near `-φ0`, or passing it and escaping to infinity, means the
/// cycle no longer captures it.
pub fn trace_from_equilibrium(
    params: &InterfaceOscillatorParams,
    config: &ClassifyConfig,
) -> Result<TraceReport, OscillatorError> {
    if config.perturbation == 0.0 || !config.perturbation.is_finite() {
        return Err(OscillatorError::InvalidParams("perturbation must be non-zero".into()));
    }
    let form = Formulated::new(params, config.cycle.formulation)?;
    let psi0_internal = form.eq.ok_or(OscillatorError::NoRealEquilibrium {
        n: params.n,
        product: super::euler_coefficients(params.mu).a[9],
    })?;
    let psi0 = psi0_internal * form.weights[0];
    let dir = if config.along_eigenvector {
        unstable_direction(params)?.vector
    } else {
        let mut e = vec![0.0; ORDER];
        e[0] = 1.0;
        e
    };
    let sign = if config.start_sign < 0.0 { -1.0 } else { 1.0 };
    let mut start = vec![0.0; ORDER];
    start[0] = psi0;
    for j in 0..ORDER {
        start[j] = sign * (start[j] + config.perturbation * psi0 * dir[j]);
    }
    let y0 = form.from_psi_state(&start);
    let (out, used) = run_relaxed(&form, &y0, &config.cycle, true);
    let class = match out.end {
        RunEnd::Converged => TrajectoryClass::ConvergesToCycle,
        RunEnd::Settled { sign: s } if s == -sign => TrajectoryClass::HeteroclinicToOpposite,
        RunEnd::Escaped { .. } => TrajectoryClass::HeteroclinicToOpposite,
        _ => TrajectoryClass::Undecided,
    };
    Ok(TraceReport {
        n: params.n,
        class,
        reason: out.end.describe(),
        min_dist_opposite: if sign > 0.0 { out.min_dist_neg } else { out.min_dist_pos },
        eta_end: out.t / form.time_factor,
        rel_tol: used.integrator.rel_tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroclinicResult {
    pub lambda0: f64,
    pub n_h: f64,
    pub bracket: (f64, f64),
    /// Every classification made, in evaluation order.
    pub classifications: Vec<(f64, TrajectoryClass)>,
    /// `(n, rel_tol)` for every classification that needed a relaxed tolerance.
    pub relaxed: Vec<(f64, f64)>,
}

/// Bisection on `n` for the exponent at which the unstable manifold of `φ0`
/// stops feeding the limit cycle.
pub fn locate_heteroclinic(
    lambda0: f64,
    bracket: (f64, f64),
    tol: f64,
    config: &ClassifyConfig,
) -> Result<HeteroclinicResult, OscillatorError> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || !(tol > 0.0) {
        return Err(OscillatorError::InvalidParams(format!(
            "need n_low < n_high and tol > 0, got ({lo}, {hi}), {tol}"
        )));
    }
    let mut log = Vec::new();
    let mut relaxed = Vec::new();
    let requested = config.cycle.integrator.rel_tol;
    let mut classify = |n: f64, log: &mut Vec<(f64, TrajectoryClass)>| -> Result<TrajectoryClass, OscillatorError> {
        let params = InterfaceOscillatorParams::new(n, lambda0)?;
        let report = trace_from_equilibrium(&params, config)?;
        if report.rel_tol > requested {
            relaxed.push((n, report.rel_tol));
        }
        let c = report.class;
        log.push((n, c));
        match c {
            TrajectoryClass::Undecided => Err(OscillatorError::UndecidedRegion { n }),
            c => Ok(c),
        }
    };
    let c_lo = classify(lo, &mut log)?;
    let c_hi = classify(hi, &mut log)?;
    if c_lo == c_hi {
        return Err(OscillatorError::InconsistentBracket {
            low: lo,
            high: hi,
            outcome: c_lo,
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if classify(mid, &mut log)? == c_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(HeteroclinicResult {
        lambda0,
        n_h: 0.5 * (lo + hi),
        bracket: (lo, hi),
        classifications: log,
        relaxed,
    })
}
