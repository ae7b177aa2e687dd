use serde::{Deserialize, Serialize};

use super::{
    companion_problem, equilibrium, normalized_coefficients, InterfaceOscillatorParams, OscillatorError,
    BINOMIAL_9, ORDER, SMALL_N_SWITCHOVER,
};
use crate::odecore::{
    AbsTol, Direction, EventSpec, EventTracker, IntegratorConfig, OdeError, OdeProblem, RadauStepper,
};

/// Which form of the oscillation equation is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CycleFormulation {
    /// `Truncated` below [`SMALL_N_SWITCHOVER`], `Normalized` otherwise.
    Auto,
    /// `φ(η)` directly, with tolerances and regularisation scaled by `(n/9)^(9/n)`.
    Original,
    /// `ψ(s)` with the exact coefficients `a_k μ^{-k}`.
    Normalized,
    /// `ψ(s)` with binomial coefficients (small-`n` limit).
    Truncated,
}

impl CycleFormulation {
    pub fn resolve(self, n: f64) -> CycleFormulation {
        match self {
            CycleFormulation::Auto if n < SMALL_N_SWITCHOVER => CycleFormulation::Truncated,
            CycleFormulation::Auto => CycleFormulation::Normalized,
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleConfig {
    /// Tolerances in units of the normalised amplitude `ψ`.
    pub integrator: IntegratorConfig,
    /// Relative change of period and amplitude between returns.
    pub cycle_tol: f64,
    /// Number of consecutive returns that must satisfy `cycle_tol`.
    pub consecutive: usize,
    /// Returns discarded as transient (capped at half the budget).
    pub transient_returns: usize,
    /// Integration budget in `η`.
    pub max_eta: f64,
    pub samples_per_period: usize,
    pub formulation: CycleFormulation,
    /// Radius of the ball around `±φ0`, relative to `φ0`.
    pub r_eq: f64,
    /// Residence time in `η` inside the ball that counts as settling.
    pub dwell: f64,
    /// `|ψ|` beyond which the trajectory is treated as escaping to infinity.
    pub blowup: f64,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig {
                max_steps: 20_000_000,
                ..IntegratorConfig::with_tolerances(1e-12, 1e-12)
            },
            cycle_tol: 1e-6,
            consecutive: 3,
            transient_returns: 10,
            max_eta: 5_000.0,
            samples_per_period: 256,
            formulation: CycleFormulation::Auto,
            r_eq: 0.05,
            dwell: 50.0,
            blowup: 1e12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCycle {
    pub n: f64,
    pub lambda0: f64,
    pub formulation: CycleFormulation,
    /// Period in `η`.
    pub period: f64,
    /// Period in the integration variable (`s = 9η/n` for the `ψ` forms).
    pub period_internal: f64,
    /// `max |ψ|` over one period.
    pub amplitude_psi: f64,
    /// `log10 max |φ|` over one period.
    pub log10_amplitude: f64,
    /// `log10` of the factor `c` in `φ = c ψ`.
    pub log10_phi_scale: f64,
    /// `η` values of the stored samples, starting at a section crossing.
    pub eta: Vec<f64>,
    /// `ψ` at the sample points; `φ = 10^log10_phi_scale · ψ`.
    pub psi: Vec<f64>,
    /// Sup-norm distance between consecutive section states, relative to the amplitude.
    pub poincare_residual: f64,
    /// `max |ψ(η+T) - ψ(η)|` over the samples, relative to the amplitude.
    pub periodicity_residual: f64,
    pub returns: usize,
    /// Relative tolerance actually used, after any automatic relaxation.
    pub rel_tol: f64,
    /// `η` at which convergence was declared.
    pub eta_converged: f64,
    /// Whether `ψ` takes both signs over the stored period.
    pub sign_changing: bool,
}

impl LimitCycle {
    /// `φ` at the samples; underflows to zero when the amplitude is below `1e-308`.
    pub fn phi(&self) -> Vec<f64> {
        let c = 10f64.powf(self.log10_phi_scale);
        self.psi.iter().map(|p| c * p).collect()
    }
}

/// An oscillation problem in the chosen variables.
pub(crate) struct Formulated {
    pub problem: OdeProblem,
    pub formulation: CycleFormulation,
    /// Internal time per unit `η`.
    pub time_factor: f64,
    /// `φ = 10^log10_scale · ψ`.
    pub log10_scale: f64,
    /// Component weights mapping the state into `ψ` units.
    pub weights: Vec<f64>,
    /// Equilibrium value in internal units, when one exists.
    pub eq: Option<f64>,
}

impl Formulated {
    pub fn new(params: &InterfaceOscillatorParams, formulation: CycleFormulation) -> Result<Self, OscillatorError> {
        let formulation = formulation.resolve(params.n);
        let mu = params.mu;
        let eq = equilibrium(params).ok().map(|e| e.phi0);
        match formulation {
            CycleFormulation::Original => {
                let log_a = params.log10_amplitude_scale();
                if log_a < -250.0 {
                    return Err(OscillatorError::InvalidParams(format!(
                        "φ-variables underflow at n = {}; use a ψ formulation",
                        params.n
                    )));
                }
                let a = 10f64.powf(log_a);
                let scaled = InterfaceOscillatorParams {
                    reg_delta: params.reg_delta * a,
                    ..*params
                };
                Ok(Self {
                    problem: super::eqlc_problem(&scaled),
                    formulation,
                    time_factor: 1.0,
                    log10_scale: log_a,
                    weights: (0..ORDER).map(|j| 1.0 / (a * mu.powi(j as i32))).collect(),
                    eq,
                })
            }
            CycleFormulation::Normalized => {
                let b = normalized_coefficients(mu);
                let eq = if b[9] < 0.0 {
                    Some((-params.lambda0 / b[9]).powf(1.0 / params.n))
                } else {
                    None
                };
                Ok(Self {
                    problem: companion_problem(b, params.lambda0, params.n, params.reg_delta),
                    formulation,
                    time_factor: mu,
                    log10_scale: params.log10_amplitude_scale(),
                    weights: vec![1.0; ORDER],
                    eq,
                })
            }
            CycleFormulation::Truncated => Ok(Self {
                problem: companion_problem(BINOMIAL_9, params.lambda0, params.n, params.reg_delta),
                formulation,
                time_factor: mu,
                log10_scale: params.log10_amplitude_scale(),
                weights: vec![1.0; ORDER],
                eq: None,
            }),
            CycleFormulation::Auto => unreachable!("resolved above"),
        }
    }

    /// Integrator settings with absolute tolerances mapped from `ψ` units.
    pub fn integrator(&self, base: &IntegratorConfig) -> IntegratorConfig {
        let atol: Vec<f64> = (0..ORDER).map(|j| base.abs_tol.get(j) / self.weights[j]).collect();
        IntegratorConfig {
            abs_tol: AbsTol::PerComponent(atol),
            ..base.clone()
        }
    }

    /// Converts a `ψ`-state (derivatives in `s`) to internal variables.
    pub fn from_psi_state(&self, psi: &[f64]) -> Vec<f64> {
        psi.iter().zip(&self.weights).map(|(p, w)| p / w).collect()
    }

    pub fn to_psi(&self, y: &[f64], j: usize) -> f64 {
        y[j] * self.weights[j]
    }
}

/// Section crossings and per-return diagnostics collected while integrating.
#[derive(Debug, Clone, Default)]
pub(crate) struct ReturnLog {
    /// Internal times of rising zero crossings of `ψ`.
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `max |ψ|` at extrema between consecutive crossings.
    pub amplitudes: Vec<f64>,
}

impl ReturnLog {
    pub fn periods(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `true` once the last `count` period and amplitude changes are below `tol`.
    pub fn converged(&self, tol: f64, count: usize) -> bool {
        let p = self.periods();
        let a = &self.amplitudes;
        if p.len() < count + 1 || a.len() < count + 1 {
            return false;
        }
        let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs());
        (0..count).all(|i| {
            let (ip, ia) = (p.len() - 1 - i, a.len() - 1 - i);
            rel(p[ip], p[ip - 1]) < tol && rel(a[ia], a[ia - 1]) < tol
        })
    }
}

pub(crate) enum RunEnd {
    Converged,
    /// Stayed within the equilibrium ball of `sign·φ0` for the dwell window.
    Settled { sign: f64 },
    /// `|ψ|` exceeded the blow-up threshold.
    Escaped { sign: f64 },
    Budget,
    Failed(OdeError),
}

impl RunEnd {
    pub fn describe(&self) -> String {
        match self {
            RunEnd::Converged => "section returns converged".into(),
            RunEnd::Settled { sign } => format!("settled at {}φ0", if *sign > 0.0 { "+" } else { "-" }),
            RunEnd::Escaped { sign } => format!("escaped towards {}∞", if *sign > 0.0 { "+" } else { "-" }),
            RunEnd::Budget => "η budget exhausted".into(),
            RunEnd::Failed(e) => e.to_string(),
        }
    }
}

/// Loosest relative tolerance reached by automatic relaxation.
pub const RELAXATION_FLOOR: f64 = 1e-8;
const RELAXATION_FACTOR: f64 = 100.0;

pub(crate) struct Run {
    pub end: RunEnd,
    pub log: ReturnLog,
    /// Internal time at which the run stopped.
    pub t: f64,
    pub state: Vec<f64>,
    /// Closest approach to `∓φ0` measured in units of `φ0`, by sign.
    pub min_dist_neg: f64,
    pub min_dist_pos: f64,
}

/// Integrates from `y0` until the section returns converge, the state
/// settles at an equilibrium, escapes, or the budget runs out.
pub(crate) fn run(form: &Formulated, y0: &[f64], cfg: &CycleConfig, detect_cycle: bool) -> Run {
    let integ = form.integrator(&cfg.integrator);
    let t_end = cfg.max_eta * form.time_factor;
    let dwell = cfg.dwell * form.time_factor;
    let transient = cfg.transient_returns;
    let half_budget = 0.5 * t_end;

    let mut out = Run {
        end: RunEnd::Budget,
        log: ReturnLog::default(),
        t: 0.0,
        state: y0.to_vec(),
        min_dist_neg: f64::INFINITY,
        min_dist_pos: f64::INFINITY,
    };
    let mut stepper = match RadauStepper::new(form.problem.clone(), 0.0, y0, t_end, integ) {
        Ok(s) => s,
        Err(e) => {
            out.end = RunEnd::Failed(e);
            return out;
        }
    };
    let events = [
        EventSpec::new("section", |_, y| y[0]).direction(Direction::Rising),
        EventSpec::new("extremum", |_, y| y[1]),
    ];
    let mut tracker = EventTracker::new(&events, 0.0, y0);
    let mut running_max = 0.0f64;
    let mut dwell_start: Option<(f64, f64)> = None;
    let (mut left_pos, mut left_neg) = (false, false);

    while !stepper.finished() {
        let seg = match stepper.step() {
            Ok(seg) => seg.clone(),
            Err(e) => {
                out.end = RunEnd::Failed(e);
                break;
            }
        };
        out.t = seg.t_end;
        out.state.clone_from(&seg.y_end);
        let fired = match tracker.process(&seg) {
            Ok(f) => f,
            Err(e) => {
                out.end = RunEnd::Failed(e);
                break;
            }
        };
        for ev in fired {
            let rec = ev.record;
            if rec.id == "extremum" {
                running_max = running_max.max(form.to_psi(&rec.state, 0).abs());
            } else {
                if !out.log.times.is_empty() {
                    out.log.amplitudes.push(running_max);
                }
                running_max = 0.0;
                out.log.times.push(rec.t);
                out.log.states.push(rec.state);
            }
        }

        let psi0 = form.to_psi(&seg.y_end, 0);
        if !psi0.is_finite() || psi0.abs() > cfg.blowup {
            out.end = RunEnd::Escaped { sign: psi0.signum() };
            break;
        }

        if let Some(eq) = form.eq {
            let dist = |sign: f64| -> f64 {
                let mut acc = 0.0;
                for j in 0..ORDER {
                    let target = if j == 0 { sign * eq } else { 0.0 };
                    let d = (seg.y_end[j] - target) * form.weights[j];
                    acc += d * d;
                }
                acc.sqrt() / (eq * form.weights[0])
            };
            let (dp, dn) = (dist(1.0), dist(-1.0));
            out.min_dist_pos = out.min_dist_pos.min(dp);
            out.min_dist_neg = out.min_dist_neg.min(dn);
            // a ball only counts once the trajectory has been outside it
            left_pos |= dp > cfg.r_eq;
            left_neg |= dn > cfg.r_eq;
            let inside = if left_pos && dp <= cfg.r_eq {
                Some(1.0)
            } else if left_neg && dn <= cfg.r_eq {
                Some(-1.0)
            } else {
                None
            };
            dwell_start = match (inside, dwell_start) {
                (Some(s), Some((s0, t0))) if s == s0 => Some((s0, t0)),
                (Some(s), _) => Some((s, seg.t_start)),
                (None, _) => None,
            };
            if let Some((sign, t0)) = dwell_start {
                if seg.t_end - t0 >= dwell {
                    out.end = RunEnd::Settled { sign };
                    break;
                }
            }
        }

        if detect_cycle {
            let past_transient = out.log.times.len() > transient || seg.t_end >= half_budget;
            if past_transient && out.log.converged(cfg.cycle_tol, cfg.consecutive) {
                out.end = RunEnd::Converged;
                break;
            }
        }
    }
    out
}

/// Runs [`run`], loosening both tolerances by a factor 100 after each
/// step-size underflow until the relative tolerance would pass
/// [`RELAXATION_FLOOR`]. Returns the run and the settings that produced it.
pub(crate) fn run_relaxed(
    form: &Formulated,
    y0: &[f64],
    cfg: &CycleConfig,
    detect_cycle: bool,
) -> (Run, CycleConfig) {
    let mut cfg = cfg.clone();
    loop {
        let out = run(form, y0, &cfg, detect_cycle);
        let underflow = matches!(out.end, RunEnd::Failed(OdeError::StepSizeUnderflow { .. }));
        if !underflow || cfg.integrator.rel_tol * RELAXATION_FACTOR > RELAXATION_FLOOR * (1.0 + 1e-9) {
            return (out, cfg);
        }
        cfg.integrator = cfg.integrator.relaxed(RELAXATION_FACTOR);
    }
}

/// Default initial data: `ψ = 1` with zero derivatives.
pub fn default_cycle_init() -> Vec<f64> {
    let mut y = vec![0.0; ORDER];
    y[0] = 1.0;
    y
}

/// Integrates the oscillation equation forward in `η` from `init` (a
/// `ψ`-state, derivatives taken in `s = 9η/n`) until successive returns to
/// the section `ψ = 0`, `ψ' > 0` agree, then samples one period.
pub fn find_limit_cycle(
    params: &InterfaceOscillatorParams,
    init: &[f64],
    config: &CycleConfig,
) -> Result<LimitCycle, OscillatorError> {
    if init.len() != ORDER {
        return Err(OdeError::DimensionMismatch {
            expected: ORDER,
            got: init.len(),
        }
        .into());
    }
    if init.iter().any(|v| !v.is_finite()) {
        return Err(OscillatorError::InvalidParams("initial state must be finite".into()));
    }
    let form = Formulated::new(params, config.formulation)?;
    let y0 = form.from_psi_state(init);
    let (result, used) = run_relaxed(&form, &y0, config, true);
    let eta_end = result.t / form.time_factor;
    match result.end {
        RunEnd::Converged => {}
        RunEnd::Settled { sign } => return Err(OscillatorError::EscapedToEquilibrium { eta: eta_end, sign }),
        RunEnd::Escaped { .. } => {
            return Err(OscillatorError::NoConvergence {
                eta: eta_end,
                reason: "amplitude grew without bound".into(),
            })
        }
        RunEnd::Budget => {
            return Err(OscillatorError::NoConvergence {
                eta: eta_end,
                reason: format!("{} returns without meeting the cycle tolerance", result.log.times.len()),
            })
        }
        RunEnd::Failed(e) => {
            return Err(OscillatorError::NoConvergence {
                eta: eta_end,
                reason: e.to_string(),
            })
        }
    }
    sample_cycle(params, &form, &result.log, eta_end, &used)
}

fn sample_cycle(
    params: &InterfaceOscillatorParams,
    form: &Formulated,
    log: &ReturnLog,
    eta_converged: f64,
    config: &CycleConfig,
) -> Result<LimitCycle, OscillatorError> {
    let k = log.times.len() - 1;
    let period = log.times[k] - log.times[k - 1];
    let start = &log.states[k];
    let amp_scale = *log.amplitudes.last().expect("converged log has amplitudes");

    let poincare_residual = start
        .iter()
        .zip(&log.states[k - 1])
        .enumerate()
        .map(|(j, (a, b))| ((a - b) * form.weights[j]).abs())
        .fold(0.0, f64::max)
        / amp_scale;

    // two periods of dense output starting on the section
    let integ = form.integrator(&config.integrator);
    let traj = crate::odecore::integrate(&form.problem, (0.0, 2.0 * period), start, &integ, &[])?;
    let m = config.samples_per_period.max(8);
    let dt = period / m as f64;
    let mut psi = Vec::with_capacity(m);
    let mut eta = Vec::with_capacity(m);
    let mut periodicity = 0.0f64;
    for i in 0..m {
        let t = i as f64 * dt;
        let a = traj.eval(t).expect("inside span");
        let b = traj.eval(t + period).expect("inside span");
        let pa = form.to_psi(&a, 0);
        periodicity = periodicity.max((form.to_psi(&b, 0) - pa).abs());
        psi.push(pa);
        eta.push((log.times[k] + t) / form.time_factor);
    }
    let amplitude_psi = psi.iter().fold(amp_scale, |m, p| m.max(p.abs()));
    let sign_changing = psi.iter().any(|&p| p > 0.0) && psi.iter().any(|&p| p < 0.0);
    Ok(LimitCycle {
        n: params.n,
        lambda0: params.lambda0,
        formulation: form.formulation,
        period: period / form.time_factor,
        period_internal: period,
        amplitude_psi,
        log10_amplitude: form.log10_scale + amplitude_psi.log10(),
        log10_phi_scale: form.log10_scale,
        eta,
        psi,
        poincare_residual,
        periodicity_residual: periodicity / amplitude_psi,
        returns: log.times.len(),
        rel_tol: config.integrator.rel_tol,
        eta_converged,
        sign_changing,
    })
}
