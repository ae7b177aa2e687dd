use nalgebra::{DMatrix, DVector};

use super::jacobian::jacobian_fd_with_f0;
use super::{weighted_rms, IntegratorConfig, OdeError, OdeProblem};

const SQ6: f64 = 2.449_489_742_783_178;
const C1: f64 = (4.0 - SQ6) / 10.0;
const C2: f64 = (4.0 + SQ6) / 10.0;
const C1M1: f64 = C1 - 1.0;
const C2M1: f64 = C2 - 1.0;
const C1MC2: f64 = C1 - C2;
const DD1: f64 = -(13.0 + 7.0 * SQ6) / 3.0;
const DD2: f64 = (-13.0 + 7.0 * SQ6) / 3.0;
const DD3: f64 = -1.0 / 3.0;

const A: [[f64; 3]; 3] = [
    [
        (88.0 - 7.0 * SQ6) / 360.0,
        (296.0 - 169.0 * SQ6) / 1800.0,
        (-2.0 + 3.0 * SQ6) / 225.0,
    ],
    [
        (296.0 + 169.0 * SQ6) / 1800.0,
        (88.0 + 7.0 * SQ6) / 360.0,
        (-2.0 - 3.0 * SQ6) / 225.0,
    ],
    [(16.0 - SQ6) / 36.0, (16.0 + SQ6) / 36.0, 1.0 / 9.0],
];
const C: [f64; 3] = [C1, C2, 1.0];

const SAFE: f64 = 0.9;
const FAC_GROW: f64 = 8.0;
const FAC_SHRINK: f64 = 0.2;
const MAX_NEWTON: usize = 7;
const THETA_REUSE: f64 = 1e-3;
const JAC_SCALE: f64 = 1.490_116_119_384_765_6e-8;

/// Real eigenvalue of the inverse Radau IIA matrix, used by the error estimator.
fn gamma0() -> f64 {
    30.0 / (6.0 + 81f64.cbrt() - 9f64.cbrt())
}

/// Cubic collocation polynomial of one accepted step.
///
/// With `s = (t - t_end) / h` the state is
/// `y_end + s·(c1 + (s - c2 + 1)·(c2 + (s - c1 + 1)·c3))`.
#[derive(Debug, Clone)]
pub struct DenseSegment {
    pub t_start: f64,
    pub t_end: f64,
    h: f64,
    /// Time at which the polynomial is anchored (the untruncated step end).
    t_anchor: f64,
    pub y_start: Vec<f64>,
    pub y_end: Vec<f64>,
    y_anchor: Vec<f64>,
    cont: [Vec<f64>; 3],
}

impl DenseSegment {
    pub fn dim(&self) -> usize {
        self.y_end.len()
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = if self.t_end >= self.t_start {
            (self.t_start, self.t_end)
        } else {
            (self.t_end, self.t_start)
        };
        (lo..=hi).contains(&t)
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        if t == self.t_end {
            out.copy_from_slice(&self.y_end);
            return;
        }
        if t == self.t_start {
            out.copy_from_slice(&self.y_start);
            return;
        }
        self.eval_poly(t, out);
    }

    pub fn eval_vec(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval(t, &mut out);
        out
    }

    fn eval_poly(&self, t: f64, out: &mut [f64]) {
        let s = (t - self.t_anchor) / self.h;
        let [c1, c2, c3] = &self.cont;
        for i in 0..out.len() {
            out[i] = self.y_anchor[i] + s * (c1[i] + (s - C2M1) * (c2[i] + (s - C1M1) * c3[i]));
        }
    }

    /// Restricts the segment to `[t_start, t_stop]`.
    pub fn truncated(&self, t_stop: f64) -> DenseSegment {
        let mut seg = self.clone();
        let mut y = vec![0.0; self.dim()];
        self.eval(t_stop, &mut y);
        seg.t_end = t_stop;
        seg.y_end = y;
        seg
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct StepStats {
    pub rhs_evals: usize,
    pub jacobians: usize,
    pub factorizations: usize,
    pub accepted: usize,
    pub rejected: usize,
}

/// Adaptive Radau IIA (order 5) stepper.
///
/// Drive it with [`RadauStepper::step`] until [`RadauStepper::finished`];
/// each call returns the dense segment of one accepted step.
pub struct RadauStepper {
    problem: OdeProblem,
    config: IntegratorConfig,
    dim: usize,
    t: f64,
    t_end: f64,
    y: Vec<f64>,
    f0: Vec<f64>,
    h: f64,
    direction: f64,
    jac: DMatrix<f64>,
    jac_current: bool,
    need_jac: bool,
    first: bool,
    last_rejected: bool,
    finished: bool,
    prev: Option<DenseSegment>,
    last: Option<DenseSegment>,
    stats: StepStats,
    gamma0: f64,
    // scratch
    z: Vec<f64>,
    fz: Vec<f64>,
    ytmp: Vec<f64>,
}

impl RadauStepper {
    pub fn new(
        problem: OdeProblem,
        t0: f64,
        y0: &[f64],
        t_end: f64,
        config: IntegratorConfig,
    ) -> Result<Self, OdeError> {
        let dim = problem.dim();
        if y0.len() != dim {
            return Err(OdeError::DimensionMismatch {
                expected: dim,
                got: y0.len(),
            });
        }
        if !(t0.is_finite() && t_end.is_finite()) || t0 == t_end {
            return Err(OdeError::InvalidSpan { t0, t1: t_end });
        }
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(OdeError::NonFiniteState { t: t0 });
        }
        config.validate(dim)?;

        let mut stats = StepStats::default();
        let f0 = problem.rhs_vec(t0, y0);
        stats.rhs_evals += 1;
        if f0.iter().any(|v| !v.is_finite()) {
            return Err(OdeError::NonFiniteState { t: t0 });
        }
        let direction = (t_end - t0).signum();
        let span = (t_end - t0).abs();
        let h = if config.initial_step > 0.0 {
            config.initial_step
        } else {
            initial_step(&y0, &f0, &config)
        }
        .min(span)
        .min(config.max_step);

        Ok(Self {
            problem,
            dim,
            t: t0,
            t_end,
            y: y0.to_vec(),
            f0,
            h: h * direction,
            direction,
            jac: DMatrix::zeros(dim, dim),
            jac_current: false,
            need_jac: true,
            first: true,
            last_rejected: false,
            finished: false,
            prev: None,
            last: None,
            stats,
            gamma0: gamma0(),
            z: vec![0.0; 3 * dim],
            fz: vec![0.0; 3 * dim],
            ytmp: vec![0.0; dim],
            config,
        })
    }

    pub fn finished(&self) -> bool {
        self.finished
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64] {
        &self.y
    }

    pub fn stats(&self) -> &StepStats {
        &self.stats
    }

    pub fn last_segment(&self) -> Option<&DenseSegment> {
        self.last.as_ref()
    }

    fn eval_rhs(&mut self, t: f64, y: &[f64], out: &mut [f64]) {
        self.stats.rhs_evals += 1;
        self.problem.eval(t, y, out);
    }

    fn refresh_jacobian(&mut self) -> Result<(), OdeError> {
        let t = self.t;
        self.jac = jacobian_fd_with_f0(&self.problem, t, &self.y, &self.f0, JAC_SCALE)
            .map_err(|_| OdeError::NonFiniteState { t })?;
        self.stats.rhs_evals += self.dim;
        self.stats.jacobians += 1;
        self.jac_current = true;
        self.need_jac = false;
        Ok(())
    }

    /// Starting stage increments extrapolated from the previous step.
    fn predict_stages(&mut self) {
        let d = self.dim;
        match (&self.prev, self.first) {
            (Some(prev), false) => {
                let ratio = self.h / prev.h;
                for (k, &c) in C.iter().enumerate() {
                    let s = c * ratio;
                    for i in 0..d {
                        let [c1, c2, c3] = &prev.cont;
                        self.z[k * d + i] = s * (c1[i] + (s - C2M1) * (c2[i] + (s - C1M1) * c3[i]));
                    }
                }
            }
            _ => self.z.iter_mut().for_each(|v| *v = 0.0),
        }
    }

    /// Advances by one accepted step.
    pub fn step(&mut self) -> Result<&DenseSegment, OdeError> {
        assert!(!self.finished, "stepper already reached the end of the span");
        let d = self.dim;
        let rtol = self.config.rel_tol;
        let fnewt = (10.0 * f64::EPSILON / rtol).max(0.03f64.min(rtol.sqrt()));

        loop {
            if self.stats.accepted + self.stats.rejected >= self.config.max_steps {
                return Err(OdeError::MaxStepsExceeded { t: self.t });
            }
            let hmin = 16.0 * f64::EPSILON * self.t.abs().max(1e-300);
            if self.h.abs() <= hmin || !self.h.is_finite() {
                return Err(OdeError::StepSizeUnderflow { t: self.t });
            }
            // land exactly on the end of the span
            let mut last = false;
            if (self.t + 1.0001 * self.h - self.t_end) * self.direction >= 0.0 {
                self.h = self.t_end - self.t;
                last = true;
            }
            if self.need_jac {
                self.refresh_jacobian()?;
            }
            let h = self.h;

            // Newton matrix I - h (A ⊗ J) and error-estimator matrix γ0/h I - J
            let mut big = DMatrix::<f64>::zeros(3 * d, 3 * d);
            for bi in 0..3 {
                for bj in 0..3 {
                    let a = A[bi][bj] * h;
                    for r in 0..d {
                        for c in 0..d {
                            big[(bi * d + r, bj * d + c)] = -a * self.jac[(r, c)];
                        }
                    }
                }
            }
            for i in 0..3 * d {
                big[(i, i)] += 1.0;
            }
            let big_lu = big.lu();
            let fac1 = self.gamma0 / h;
            let mut e1 = -self.jac.clone();
            for i in 0..d {
                e1[(i, i)] += fac1;
            }
            let e1_lu = e1.lu();
            self.stats.factorizations += 1;

            self.predict_stages();

            // simplified Newton iteration on the stage increments
            let mut converged = false;
            let mut diverged = false;
            let mut theta = 0.0f64;
            let mut dyno_old = 0.0f64;
            let mut thq_old = 0.0f64;
            let mut faccon = 1.0f64;
            let mut iters = 0;
            let mut ynorm_ref = self.y.clone();
            for (i, v) in ynorm_ref.iter_mut().enumerate() {
                *v = v.abs().max((self.y[i] + self.z[2 * d + i]).abs());
            }
            for it in 0..MAX_NEWTON {
                iters = it + 1;
                for k in 0..3 {
                    for i in 0..d {
                        self.ytmp[i] = self.y[i] + self.z[k * d + i];
                    }
                    let tk = self.t + C[k] * h;
                    let ytmp = std::mem::take(&mut self.ytmp);
                    let mut fk = vec![0.0; d];
                    self.eval_rhs(tk, &ytmp, &mut fk);
                    self.ytmp = ytmp;
                    self.fz[k * d..(k + 1) * d].copy_from_slice(&fk);
                }
                if self.fz.iter().any(|v| !v.is_finite()) {
                    diverged = true;
                    break;
                }
                let mut rhs = DVector::<f64>::zeros(3 * d);
                for k in 0..3 {
                    for i in 0..d {
                        let mut acc = -self.z[k * d + i];
                        for j in 0..3 {
                            acc += h * A[k][j] * self.fz[j * d + i];
                        }
                        rhs[k * d + i] = acc;
                    }
                }
                let dz = match big_lu.solve(&rhs) {
                    Some(v) => v,
                    None => {
                        diverged = true;
                        break;
                    }
                };
                let mut acc = 0.0;
                for k in 0..3 {
                    for i in 0..d {
                        let sc = self.config.abs_tol.get(i) + rtol * ynorm_ref[i];
                        let r = dz[k * d + i] / sc;
                        acc += r * r;
                    }
                }
                let dyno = (acc / (3 * d) as f64).sqrt();
                if !dyno.is_finite() {
                    diverged = true;
                    break;
                }
                if it >= 1 {
                    let thq = dyno / dyno_old;
                    theta = if it == 1 { thq } else { (thq * thq_old).sqrt() };
                    thq_old = thq;
                    if theta < 0.99 {
                        faccon = theta / (1.0 - theta);
                        let remaining = (MAX_NEWTON - 1 - it) as i32;
                        let dyth = faccon * dyno * theta.powi(remaining) / fnewt;
                        if dyth >= 1.0 {
                            // predicted not to converge in time
                            let qnewt = dyth.clamp(1e-4, 20.0);
                            let hhfac = 0.8 * qnewt.powf(-1.0 / (4.0 + remaining as f64));
                            self.h *= hhfac;
                            self.need_jac = !self.jac_current;
                            self.last_rejected = true;
                            self.stats.rejected += 1;
                            break;
                        }
                    } else {
                        diverged = true;
                        break;
                    }
                }
                dyno_old = dyno.max(f64::EPSILON);
                for i in 0..3 * d {
                    self.z[i] += dz[i];
                }
                if faccon * dyno <= fnewt {
                    converged = true;
                    break;
                }
            }

            if !converged {
                if diverged || iters >= MAX_NEWTON {
                    self.h *= 0.5;
                    self.need_jac = !self.jac_current;
                    self.last_rejected = true;
                    self.stats.rejected += 1;
                }
                continue;
            }

            // embedded error estimate
            let mut f2 = vec![0.0; d];
            for i in 0..d {
                f2[i] = (DD1 * self.z[i] + DD2 * self.z[d + i] + DD3 * self.z[2 * d + i]) / h;
            }
            let cont = DVector::from_iterator(d, (0..d).map(|i| f2[i] + self.f0[i]));
            let mut errv = e1_lu.solve(&cont).unwrap_or_else(|| DVector::from_element(d, f64::NAN));
            let mut err = weighted_rms(errv.as_slice(), &ynorm_ref, rtol, &self.config.abs_tol);
            if err >= 1.0 && (self.first || self.last_rejected) {
                for i in 0..d {
                    self.ytmp[i] = self.y[i] + errv[i];
                }
                let ytmp = std::mem::take(&mut self.ytmp);
                let mut f1 = vec![0.0; d];
                self.eval_rhs(self.t, &ytmp, &mut f1);
                self.ytmp = ytmp;
                let cont = DVector::from_iterator(d, (0..d).map(|i| f1[i] + f2[i]));
                errv = e1_lu.solve(&cont).unwrap_or_else(|| DVector::from_element(d, f64::NAN));
                err = weighted_rms(errv.as_slice(), &ynorm_ref, rtol, &self.config.abs_tol);
            }
            if !err.is_finite() {
                self.h *= 0.5;
                self.need_jac = !self.jac_current;
                self.last_rejected = true;
                self.stats.rejected += 1;
                continue;
            }
            let err = err.max(1e-10);

            let fac = SAFE.min(SAFE * (1.0 + 2.0 * MAX_NEWTON as f64) / (iters as f64 + 2.0 * MAX_NEWTON as f64));
            let quot = (1.0 / FAC_GROW).max((1.0 / FAC_SHRINK).min(err.powf(0.25) / fac));
            let mut hnew = h / quot;

            if err < 1.0 {
                let t_new = if last { self.t_end } else { self.t + h };
                let y_new: Vec<f64> = (0..d).map(|i| self.y[i] + self.z[2 * d + i]).collect();
                if y_new.iter().any(|v| !v.is_finite()) {
                    return Err(OdeError::NonFiniteState { t: self.t });
                }
                let mut f_new = vec![0.0; d];
                self.eval_rhs(t_new, &y_new, &mut f_new);
                if f_new.iter().any(|v| !v.is_finite()) {
                    return Err(OdeError::NonFiniteState { t: self.t });
                }

                let z1 = &self.z[0..d];
                let z2 = &self.z[d..2 * d];
                let z3 = &self.z[2 * d..3 * d];
                let mut c1 = vec![0.0; d];
                let mut c2 = vec![0.0; d];
                let mut c3 = vec![0.0; d];
                for i in 0..d {
                    c1[i] = (z2[i] - z3[i]) / C2M1;
                    let ak = (z1[i] - z2[i]) / C1MC2;
                    let acont3 = (ak - z1[i] / C1) / C2;
                    c2[i] = (ak - c1[i]) / C1M1;
                    c3[i] = c2[i] - acont3;
                }
                let seg = DenseSegment {
                    t_start: self.t,
                    t_end: t_new,
                    h,
                    t_anchor: t_new,
                    y_start: self.y.clone(),
                    y_end: y_new.clone(),
                    y_anchor: y_new.clone(),
                    cont: [c1, c2, c3],
                };

                self.stats.accepted += 1;
                self.t = t_new;
                self.y = y_new;
                self.f0 = f_new;
                self.first = false;
                self.jac_current = false;
                self.need_jac = theta > THETA_REUSE;

                if self.last_rejected {
                    hnew = self.direction * hnew.abs().min(h.abs());
                }
                self.last_rejected = false;
                hnew = self.direction * hnew.abs().min(self.config.max_step);
                self.h = hnew;
                if last {
                    self.finished = true;
                }
                self.prev = Some(seg.clone());
                self.last = Some(seg);
                return Ok(self.last.as_ref().expect("segment just stored"));
            }

            // rejected by the error test
            if self.first {
                self.h *= 0.1;
            } else {
                self.h = hnew;
            }
            self.last_rejected = true;
            self.stats.rejected += 1;
            self.need_jac = !self.jac_current;
        }
    }
}

fn initial_step(y0: &[f64], f0: &[f64], config: &IntegratorConfig) -> f64 {
    let d0 = weighted_rms(y0, y0, config.rel_tol, &config.abs_tol);
    let d1 = weighted_rms(f0, y0, config.rel_tol, &config.abs_tol);
    if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        (0.01 * d0 / d1).max(1e-12)
    }
}
