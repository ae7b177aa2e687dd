use super::newton::{newton_shoot_with, NewtonReport};
use super::shooting::{decay_rows, FarEnd, System};
use super::{
    alpha0, alpha_predictor, mobility, EigenConfig, EigenError, EigenProblemSpec, ColdStart, ResidualReport, ShootingState,
    SimilarityProfile,
};
use crate::asymptotics::{interface_similarity, log_envelope};

/// Level below which the far-field envelope must fall at the end of the
/// `n = 0` domain, relative to `f(0)`.
pub const LINEAR_DECAY_LEVEL: f64 = 1e-13;

/// Number of interface conditions at `y0`.
fn interface_count(k: usize) -> usize {
    if k == 0 {
        5
    } else {
        6
    }
}

fn system(spec: &EigenProblemSpec, segments: usize, alpha: Option<f64>, y_end: Option<f64>, far: FarEnd) -> System {
    System {
        n: spec.n,
        k: spec.k,
        delta: spec.config.reg_delta,
        dim: spec.dim(),
        segments,
        alpha,
        y_end,
        far,
        integrator: spec.config.integrator(),
    }
}

/// Linear (`n = 0`) eigenfunction on `[0, L]` with `α = (1 + k)/10`.
///
/// Decay at `L` is imposed by removing the four growing modes of the
/// frozen-coefficient equation there.
pub fn solve_linear_n0(k: usize, length: f64, config: &EigenConfig) -> Result<SimilarityProfile, EigenError> {
    let spec = EigenProblemSpec {
        n: 0.0,
        k,
        config: config.clone(),
    };
    spec.validate()?;
    let (sys, report) = linear_system(&spec, length)?;
    finish(&sys, &spec, report)
}

fn linear_system(spec: &EigenProblemSpec, length: f64) -> Result<(System, NewtonReport), EigenError> {
    let alpha = (1 + spec.k) as f64 / 10.0;
    if !(length > 0.0) || log_envelope(length, alpha) > LINEAR_DECAY_LEVEL.ln() {
        return Err(EigenError::DomainTooShort(format!(
            "envelope at L = {length} is {:e}, above {LINEAR_DECAY_LEVEL:e}",
            log_envelope(length, alpha).exp()
        )));
    }
    let (rows, _) = decay_rows(spec.dim(), alpha, length)?;
    let segments = spec.config.segments.max((length / 4.0).ceil() as usize);
    let sys = system(spec, segments, Some(alpha), Some(length), FarEnd::Decay { rows });
    let guess = vec![0.0; sys.n_unknowns()];
    let report = newton(&sys, &guess, spec)?;
    Ok((sys, report))
}

/// `k = 0` profile; `α = 1/(10 + n)` is fixed and `y0` is an unknown.
pub fn solve_k0(n: f64, config: &EigenConfig, warm: Option<&ShootingState>) -> Result<SimilarityProfile, EigenError> {
    solve(
        &EigenProblemSpec {
            n,
            k: 0,
            config: config.clone(),
        },
        warm,
    )
}

/// `k ≥ 1` profile; `α` and `y0` are unknowns.
pub fn solve_k(
    n: f64,
    k: usize,
    config: &EigenConfig,
    warm: Option<&ShootingState>,
) -> Result<SimilarityProfile, EigenError> {
    if k == 0 {
        return Err(EigenError::InvalidSpec("solve_k needs k ≥ 1".into()));
    }
    solve(
        &EigenProblemSpec {
            n,
            k,
            config: config.clone(),
        },
        warm,
    )
}

/// Solves any `(n, k)`; `n = 0` goes to the linear baseline.
pub fn solve(spec: &EigenProblemSpec, warm: Option<&ShootingState>) -> Result<SimilarityProfile, EigenError> {
    spec.validate()?;
    if spec.n == 0.0 {
        return solve_linear_n0(spec.k, spec.config.linear_length, &spec.config);
    }
    if let Some(w) = warm {
        return solve_from(spec, w, Vec::new());
    }
    let guesses = match spec.config.y0_guess {
        Some(y) => vec![y],
        None => cold_start_ladder(spec),
    };
    let mut log = Vec::new();
    let mut last_err = None;
    for y0 in guesses {
        let attempt = linear_guess(spec, y0).and_then(|g| solve_from(spec, &g, log.clone()));
        match attempt {
            Ok(mut p) => {
                log.push(ColdStart {
                    y0_guess: y0,
                    outcome: format!("converged to y0 = {}", p.y0),
                });
                p.residual.cold_starts = log;
                return Ok(p);
            }
            Err(e) => {
                log.push(ColdStart {
                    y0_guess: y0,
                    outcome: e.to_string(),
                });
                last_err = Some(e);
            }
        }
    }
    Err(last_err.expect("at least one guess"))
}

/// Free-boundary guesses tried in turn on a cold start: the default, then
/// shorter intervals.
pub fn cold_start_ladder(spec: &EigenProblemSpec) -> Vec<f64> {
    let first = default_y0_guess(spec);
    let mut out = vec![first];
    out.extend([50.0, 40.0, 30.0, 20.0].into_iter().filter(|&y| y < 0.9 * first));
    out
}

fn solve_from(spec: &EigenProblemSpec, guess: &ShootingState, log: Vec<ColdStart>) -> Result<SimilarityProfile, EigenError> {
    let alpha = spec.fixed_alpha();
    let sys = system(
        spec,
        guess.nodes.len() + 1,
        alpha,
        None,
        FarEnd::Interface {
            count: interface_count(spec.k),
        },
    );
    let x0 = sys.pack(guess.free, guess.alpha.unwrap_or(alpha_predictor(spec.n, spec.k)), guess.y0, &guess.nodes);
    let report = newton(&sys, &x0, spec)?;
    let mut p = finish(&sys, spec, report)?;
    p.residual.cold_starts = log;
    Ok(p)
}

/// Cold-start free boundary: the small-`n` interface asymptote, capped
/// where the `n = 0` far-field envelope of the `k`-th mode falls to the
/// Newton tolerance. Cutting the linear profile any earlier distorts `α`.
pub fn default_y0_guess(spec: &EigenProblemSpec) -> f64 {
    let alpha = (1 + spec.k) as f64 / 10.0;
    let target = spec.config.newton.tol.ln();
    let (mut lo, mut hi) = (1.0, 1e4);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if log_envelope(mid, alpha) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let cap = hi;
    if spec.n > 0.0 {
        interface_similarity(spec.n).min(cap)
    } else {
        cap
    }
}

/// Shooting segments for a cold start on `[0, y0]`: at least one per two
/// units of `y`, so the growing modes gain at most a few e-folds per segment.
pub fn segments_for(config: &EigenConfig, y0: f64) -> usize {
    config.segments.max((y0 / 2.0).ceil() as usize)
}

/// Starting point from the linear eigenfunction, cut off at `y0`.
pub(crate) fn linear_guess(spec: &EigenProblemSpec, y0: f64) -> Result<ShootingState, EigenError> {
    let lin_spec = EigenProblemSpec {
        n: 0.0,
        k: spec.k,
        config: spec.config.clone(),
    };
    let length = spec.config.linear_length.max(y0);
    let (lin, report) = linear_system(&lin_spec, length)?;
    let x = &report.x;
    let u = lin.unpack(x);
    let m = segments_for(&spec.config, y0);
    let nodes = (1..m)
        .map(|j| lin.state_at(x, y0 * j as f64 / m as f64))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ShootingState {
        free: u.free,
        y0,
        alpha: (spec.k > 0).then(|| alpha_predictor(spec.n, spec.k)),
        nodes,
    })
}

fn newton(sys: &System, x0: &[f64], spec: &EigenProblemSpec) -> Result<NewtonReport, EigenError> {
    let cfg = &spec.config.newton;
    newton_shoot_with(
        |x| sys.residual(x),
        |x, r0| sys.jacobian(x, r0, cfg.fd_step),
        x0,
        cfg,
    )
}

/// Samples the accepted solution and fills in the residual report.
fn finish(sys: &System, spec: &EigenProblemSpec, report: NewtonReport) -> Result<SimilarityProfile, EigenError> {
    let x = &report.x;
    let u = sys.unpack(x);
    let (n, delta) = (spec.n, spec.config.reg_delta);
    let alpha = match spec.fixed_alpha() {
        Some(a) if n > 0.0 => a,
        _ => u.alpha,
    };
    let beta = (1.0 - alpha * n) / 10.0;
    let s = sys.sample(x, spec.config.samples_per_segment)?;
    let count = s.y.len();
    let flux: Vec<f64> = (0..count)
        .map(|i| {
            if sys.dim == 9 {
                -alpha * s.y[i] * s.states[i][0]
            } else {
                s.states[i][9]
            }
        })
        .collect();
    // samples whose difference stencil straddles a zero of f see the
    // δ-wide core of the regularised mobility and are skipped
    let stencil = 2e-5 * spec.config.samples_per_segment as f64 * (s.y[1] - s.y[0]);
    let flux_residual = (0..count)
        .filter(|&i| s.states[i][0].abs() > stencil * s.states[i][1].abs())
        .map(|i| {
            let f9 = s.d8[i];
            (mobility(s.states[i][0], n, delta) * f9 - flux[i]).abs() / f9.abs().max(1.0)
        })
        .fold(0.0, f64::max);
    // fourth-order central differences of the flux on the uniform grid
    let h = s.y[1] - s.y[0];
    let ode_residual = (2..count.saturating_sub(2))
        .map(|i| {
            let df = (flux[i - 2] - 8.0 * flux[i - 1] + 8.0 * flux[i + 1] - flux[i + 2]) / (12.0 * h);
            let st = &s.states[i];
            (df + beta * s.y[i] * st[1] + alpha * st[0]).abs() / df.abs().max(1.0)
        })
        .fold(0.0, f64::max);
    let interface_residual = match &sys.far {
        FarEnd::Interface { count } => s.end[..*count].iter().fold(0.0f64, |m, v| m.max(v.abs())),
        FarEnd::Decay { .. } => s.end[0].abs(),
    };
    let nodes = u.nodes.iter().map(|v| v.to_vec()).collect();
    let shooting = ShootingState {
        free: u.free,
        y0: u.y_end,
        alpha: sys.alpha.is_none().then_some(u.alpha),
        nodes,
    };
    Ok(SimilarityProfile {
        k: spec.k,
        n,
        alpha: if n == 0.0 { u.alpha } else if spec.k == 0 { alpha0(n) } else { u.alpha },
        y0: u.y_end,
        reg_delta: delta,
        f: s.states.iter().map(|v| v[0]).collect(),
        derivatives: s.states.iter().map(|v| [v[1], v[2], v[3], v[4]]).collect(),
        grid: s.y,
        flux,
        residual: ResidualReport {
            newton_residual: report.residual_norm,
            newton_iterations: report.iterations,
            newton_history: report.history,
            interface_residual,
            flux_residual,
            ode_residual,
            cold_starts: Vec::new(),
        },
        shooting,
        manifest_id: None,
    })
}
