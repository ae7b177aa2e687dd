//! Stiff initial-value integration for first-order real systems.
//!
//! The stepper is the three-stage Radau IIA collocation method (order 5)
//! with a simplified Newton iteration on the full stage system, a
//! finite-difference Jacobian that is reused between steps while the
//! Newton contraction stays small, and the classical embedded error
//! estimate. Every accepted step carries its cubic collocation polynomial,
//! which is used both for dense output and for event location.

mod events;
mod jacobian;
mod radau;
mod reduce;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use events::{locate_event, Direction, EventRecord, EventSpec};
pub(crate) use events::EventTracker;
pub use jacobian::{jacobian_fd, jacobian_fd_central};
pub use radau::{DenseSegment, RadauStepper, StepStats};
pub use reduce::reduce_scalar_ode;

/// State of a first-order system; component `i` is the `i`-th unknown.
pub type StateVector = Vec<f64>;

type RhsFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// A first-order system `y' = F(t, y)` of fixed dimension.
///
/// The right-hand side writes into a caller-provided buffer. Problems are
/// cheap to clone and may be shared between threads.
#[derive(Clone)]
pub struct OdeProblem {
    dim: usize,
    rhs: Arc<RhsFn>,
    stiff: bool,
}

impl OdeProblem {
    pub fn new<F>(dim: usize, rhs: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        assert!(dim > 0, "an ODE system needs at least one component");
        Self {
            dim,
            rhs: Arc::new(rhs),
            stiff: true,
        }
    }

    pub fn with_stiffness_hint(mut self, stiff: bool) -> Self {
        self.stiff = stiff;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_stiff(&self) -> bool {
        self.stiff
    }

    #[inline]
    pub fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.rhs)(t, y, dy)
    }

    pub fn rhs_vec(&self, t: f64, y: &[f64]) -> StateVector {
        let mut dy = vec![0.0; self.dim];
        self.eval(t, y, &mut dy);
        dy
    }
}

impl fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeProblem")
            .field("dim", &self.dim)
            .field("stiff", &self.stiff)
            .finish_non_exhaustive()
    }
}

/// Absolute tolerance, either shared by all components or per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AbsTol {
    Scalar(f64),
    PerComponent(Vec<f64>),
}

impl AbsTol {
    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        match self {
            AbsTol::Scalar(a) => *a,
            AbsTol::PerComponent(v) => v[i],
        }
    }

    pub fn scaled(&self, factor: f64) -> AbsTol {
        match self {
            AbsTol::Scalar(a) => AbsTol::Scalar(a * factor),
            AbsTol::PerComponent(v) => AbsTol::PerComponent(v.iter().map(|a| a * factor).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: AbsTol,
    /// Upper bound on `|h|`.
    pub max_step: f64,
    /// First trial step; `0` selects one automatically.
    pub initial_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-13,
            abs_tol: AbsTol::Scalar(1e-13),
            max_step: f64::INFINITY,
            initial_step: 0.0,
            max_steps: 2_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol: AbsTol::Scalar(abs_tol),
            ..Self::default()
        }
    }

    /// Multiplies both tolerances by `factor`, capping the relative one at `1e-2`.
    pub fn relaxed(&self, factor: f64) -> Self {
        Self {
            rel_tol: (self.rel_tol * factor).min(1e-2),
            abs_tol: self.abs_tol.scaled(factor),
            ..self.clone()
        }
    }

    pub fn validate(&self, dim: usize) -> Result<(), OdeError> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-2) {
            return Err(OdeError::InvalidConfig(format!(
                "rel_tol must lie in (0, 1e-2], got {}",
                self.rel_tol
            )));
        }
        match &self.abs_tol {
            AbsTol::Scalar(a) if !(*a > 0.0) => {
                return Err(OdeError::InvalidConfig(format!("abs_tol must be positive, got {a}")))
            }
            AbsTol::PerComponent(v) if v.len() != dim => {
                return Err(OdeError::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                })
            }
            AbsTol::PerComponent(v) if v.iter().any(|a| !(*a > 0.0)) => {
                return Err(OdeError::InvalidConfig("abs_tol components must be positive".into()))
            }
            _ => {}
        }
        if !(self.max_step > 0.0) {
            return Err(OdeError::InvalidConfig("max_step must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(OdeError::InvalidConfig("max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("maximum number of steps exceeded at t = {t}")]
    MaxStepsExceeded { t: f64 },
    #[error("non-finite state encountered after t = {t}")]
    NonFiniteState { t: f64 },
    #[error("event function does not change sign on the segment")]
    NoSignChange,
    #[error("event could not be resolved to its tolerance near t = {t}")]
    EventNotResolved { t: f64 },
    #[error("non-finite Jacobian entry ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid integration span [{t0}, {t1}]")]
    InvalidSpan { t0: f64, t1: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl OdeError {
    /// Last accepted time for failures that occur mid-integration.
    pub fn last_t(&self) -> Option<f64> {
        match self {
            OdeError::StepSizeUnderflow { t }
            | OdeError::MaxStepsExceeded { t }
            | OdeError::NonFiniteState { t }
            | OdeError::EventNotResolved { t } => Some(*t),
            _ => None,
        }
    }
}

/// Result of one integration: accepted nodes, the piecewise dense
/// interpolant between them and any located events.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub segments: Vec<DenseSegment>,
    pub events: Vec<EventRecord>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one node")
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one node")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Dense output at `t`. Node times return the stored node exactly.
    pub fn eval(&self, t: f64) -> Option<StateVector> {
        let forward = self.t_end() >= self.t_start();
        let (lo, hi) = if forward {
            (self.t_start(), self.t_end())
        } else {
            (self.t_end(), self.t_start())
        };
        if !(lo..=hi).contains(&t) {
            return None;
        }
        // index of the first node at or beyond t in the direction of integration
        let idx = if forward {
            self.times.partition_point(|&x| x < t)
        } else {
            self.times.partition_point(|&x| x > t)
        };
        if idx < self.times.len() && self.times[idx] == t {
            return Some(self.states[idx].clone());
        }
        let seg = &self.segments[idx - 1];
        let mut out = vec![0.0; seg.dim()];
        seg.eval(t, &mut out);
        Some(out)
    }

    pub fn events_with_id<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a EventRecord> + 'a {
        self.events.iter().filter(move |e| e.id == id)
    }
}

/// Integrates `problem` over `span` starting from `y0`.
///
/// Events are checked after every accepted step; a terminal event ends the
/// integration at the located time and the final node is the event state.
pub fn integrate(
    problem: &OdeProblem,
    span: (f64, f64),
    y0: &[f64],
    config: &IntegratorConfig,
    events: &[EventSpec],
) -> Result<Trajectory, OdeError> {
    let mut stepper = RadauStepper::new(problem.clone(), span.0, y0, span.1, config.clone())?;
    let mut tracker = events::EventTracker::new(events, span.0, y0);

    let mut traj = Trajectory {
        times: vec![span.0],
        states: vec![y0.to_vec()],
        segments: Vec::new(),
        events: Vec::new(),
        stats: StepStats::default(),
    };

    while !stepper.finished() {
        let seg = stepper.step()?.clone();
        let hit = tracker.process(&seg)?;
        let terminal = hit.iter().any(|e| e.terminal);
        for rec in hit {
            traj.events.push(rec.record);
        }
        if terminal {
            let last = traj.events.last().expect("terminal event recorded");
            let (t_stop, y_stop) = (last.t, last.state.clone());
            traj.times.push(t_stop);
            traj.states.push(y_stop);
            traj.segments.push(seg.truncated(t_stop));
            break;
        }
        traj.times.push(seg.t_end);
        traj.states.push(seg.y_end.clone());
        traj.segments.push(seg);
    }
    traj.stats = stepper.stats().clone();
    Ok(traj)
}

/// RMS norm of `v` weighted by `atol + rtol·|y|`.
pub(crate) fn weighted_rms(v: &[f64], y: &[f64], rtol: f64, atol: &AbsTol) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        let sc = atol.get(i) + rtol * y[i].abs();
        let r = v[i] / sc;
        acc += r * r;
    }
    (acc / n as f64).sqrt()
}
