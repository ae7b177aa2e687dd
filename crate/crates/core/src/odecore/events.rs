use std::fmt;
use std::sync::Arc;

use super::radau::DenseSegment;
use super::{OdeError, StateVector};

/// Time tolerance for bracketed root refinement on the dense output.
const EVENT_TIME_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Rising,
    Falling,
    Either,
}

type EventFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;

/// A scalar event function `g(t, y)` whose sign changes are located.
#[derive(Clone)]
pub struct EventSpec {
    pub id: String,
    g: Arc<EventFn>,
    pub direction: Direction,
    pub terminal: bool,
    pub tol: f64,
}

impl EventSpec {
    pub fn new<G>(id: impl Into<String>, g: G) -> Self
    where
        G: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            id: id.into(),
            g: Arc::new(g),
            direction: Direction::Either,
            terminal: false,
            tol: 1e-10,
        }
    }

    pub fn direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn terminal(mut self, terminal: bool) -> Self {
        self.terminal = terminal;
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    #[inline]
    pub fn value(&self, t: f64, y: &[f64]) -> f64 {
        (self.g)(t, y)
    }

    fn fires(&self, g_prev: f64, g_new: f64) -> bool {
        let rising = g_prev < 0.0 && g_new >= 0.0;
        let falling = g_prev > 0.0 && g_new <= 0.0;
        match self.direction {
            Direction::Rising => rising,
            Direction::Falling => falling,
            Direction::Either => rising || falling,
        }
    }
}

impl fmt::Debug for EventSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EventSpec")
            .field("id", &self.id)
            .field("direction", &self.direction)
            .field("terminal", &self.terminal)
            .field("tol", &self.tol)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub t: f64,
    pub id: String,
    pub state: StateVector,
}

/// Locates the sign change of `event` inside one dense segment.
///
/// Uses the Illinois variant of regula falsi on the interpolant, then
/// bisects further if `|g|` is still above the event tolerance.
pub fn locate_event(segment: &DenseSegment, event: &EventSpec) -> Result<(f64, StateVector), OdeError> {
    let g_a = event.value(segment.t_start, &segment.y_start);
    let g_b = event.value(segment.t_end, &segment.y_end);
    if !event.fires(g_a, g_b) {
        return Err(OdeError::NoSignChange);
    }
    refine(segment, event, g_a, g_b)
}

fn refine(segment: &DenseSegment, event: &EventSpec, g_a: f64, g_b: f64) -> Result<(f64, StateVector), OdeError> {
    let mut y = vec![0.0; segment.dim()];
    let (mut a, mut b) = (segment.t_start, segment.t_end);
    let (mut ga, mut gb) = (g_a, g_b);
    if gb == 0.0 {
        return Ok((b, segment.y_end.clone()));
    }
    let time_tol = EVENT_TIME_TOL * a.abs().max(b.abs()).max(1.0);
    let mut side = 0i8;
    let mut best = (b, gb.abs());

    for _ in 0..200 {
        let width = (b - a).abs();
        let mut t = (a * gb - b * ga) / (gb - ga);
        if !t.is_finite() || !segment.contains(t) || t == a || t == b {
            t = 0.5 * (a + b);
        }
        if width <= time_tol {
            t = 0.5 * (a + b);
        }
        segment.eval(t, &mut y);
        let g = event.value(t, &y);
        if g.abs() < best.1 {
            best = (t, g.abs());
        }
        if g == 0.0 || (width <= time_tol && g.abs() <= event.tol) {
            return Ok((t, y));
        }
        if (g > 0.0) == (gb > 0.0) {
            b = t;
            gb = g;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = t;
            ga = g;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
        // bracket exhausted at floating-point resolution
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
    }
    let (t, gabs) = best;
    segment.eval(t, &mut y);
    if gabs <= event.tol {
        Ok((t, y))
    } else {
        Err(OdeError::EventNotResolved { t })
    }
}

pub(crate) struct FiredEvent {
    pub record: EventRecord,
    pub terminal: bool,
}

/// Tracks event-function signs across consecutive accepted steps.
pub(crate) struct EventTracker<'a> {
    specs: &'a [EventSpec],
    last: Vec<f64>,
}

impl<'a> EventTracker<'a> {
    pub fn new(specs: &'a [EventSpec], t0: f64, y0: &[f64]) -> Self {
        let last = specs.iter().map(|e| e.value(t0, y0)).collect();
        Self { specs, last }
    }

    /// Events fired inside `seg`, in time order; stops after the first terminal one.
    pub fn process(&mut self, seg: &DenseSegment) -> Result<Vec<FiredEvent>, OdeError> {
        let mut fired = Vec::new();
        for (i, spec) in self.specs.iter().enumerate() {
            let g_new = spec.value(seg.t_end, &seg.y_end);
            let g_prev = self.last[i];
            self.last[i] = g_new;
            if spec.fires(g_prev, g_new) {
                let (t, state) = refine(seg, spec, g_prev, g_new)?;
                fired.push(FiredEvent {
                    record: EventRecord {
                        t,
                        id: spec.id.clone(),
                        state,
                    },
                    terminal: spec.terminal,
                });
            }
        }
        let forward = seg.t_end >= seg.t_start;
        fired.sort_by(|a, b| {
            let o = a.record.t.total_cmp(&b.record.t);
            if forward {
                o
            } else {
                o.reverse()
            }
        });
        if let Some(pos) = fired.iter().position(|e| e.terminal) {
            fired.truncate(pos + 1);
        }
        Ok(fired)
    }
}
