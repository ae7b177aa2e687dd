use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{mobility, EigenError};
use crate::odecore::{integrate, IntegratorConfig, OdeProblem};

/// Conditions imposed on the state at the far end of the interval.
#[derive(Debug, Clone)]
pub(crate) enum FarEnd {
    /// `f = f' = … = f^(count-1) = 0` at the free boundary.
    Interface { count: usize },
    /// Rows of a real matrix annihilating the growing modes (fixed endpoint).
    Decay { rows: DMatrix<f64> },
}

impl FarEnd {
    fn len(&self) -> usize {
        match self {
            FarEnd::Interface { count } => *count,
            FarEnd::Decay { rows } => rows.nrows(),
        }
    }
}

/// Multiple-shooting discretisation of the similarity ODE on `[0, Y]`.
///
/// The independent variable is `τ = y/Y ∈ [0, 1]`, split into `segments`
/// equal pieces. Unknowns are packed as
/// `[free centre values (4), α (if free), Y (if free), interior node states]`.
#[derive(Debug, Clone)]
pub(crate) struct System {
    pub n: f64,
    pub k: usize,
    pub delta: f64,
    /// 9 for the once-integrated `k = 0` equation, 10 for the flux form.
    pub dim: usize,
    pub segments: usize,
    pub alpha: Option<f64>,
    pub y_end: Option<f64>,
    pub far: FarEnd,
    pub integrator: IntegratorConfig,
}

pub(crate) struct Unpacked<'a> {
    pub free: [f64; 4],
    pub alpha: f64,
    pub y_end: f64,
    pub nodes: Vec<&'a [f64]>,
}

impl System {
    pub fn n_unknowns(&self) -> usize {
        4 + usize::from(self.alpha.is_none()) + usize::from(self.y_end.is_none()) + (self.segments - 1) * self.dim
    }

    pub fn n_residuals(&self) -> usize {
        (self.segments - 1) * self.dim + self.far.len()
    }

    fn head(&self) -> usize {
        4 + usize::from(self.alpha.is_none()) + usize::from(self.y_end.is_none())
    }

    pub fn unpack<'a>(&self, x: &'a [f64]) -> Unpacked<'a> {
        let mut i = 4;
        let alpha = match self.alpha {
            Some(a) => a,
            None => {
                i += 1;
                x[4]
            }
        };
        let y_end = match self.y_end {
            Some(y) => y,
            None => {
                i += 1;
                x[i - 1]
            }
        };
        let nodes = (0..self.segments - 1).map(|j| &x[i + j * self.dim..i + (j + 1) * self.dim]).collect();
        Unpacked {
            free: [x[0], x[1], x[2], x[3]],
            alpha,
            y_end,
            nodes,
        }
    }

    pub fn pack(&self, free: [f64; 4], alpha: f64, y_end: f64, nodes: &[Vec<f64>]) -> Vec<f64> {
        let mut x = free.to_vec();
        if self.alpha.is_none() {
            x.push(alpha);
        }
        if self.y_end.is_none() {
            x.push(y_end);
        }
        for s in nodes {
            x.extend_from_slice(s);
        }
        x
    }

    /// State at `y = 0` built from the centre conditions and the four free values.
    ///
    /// Even `k`: `f = 1`, odd derivatives zero, free `f'', f⁗, f⁽⁶⁾, f⁽⁸⁾`.
    /// Odd `k`: `f' = 1`, `f` and even derivatives zero, free `f''', f⁽⁵⁾, f⁽⁷⁾`
    /// and the flux `m(f) f⁽⁹⁾` (equal to `f⁽⁹⁾` times `δ^n`).
    pub fn centre_state(&self, free: &[f64; 4]) -> Vec<f64> {
        let mut s = vec![0.0; self.dim];
        if self.k % 2 == 0 {
            s[0] = 1.0;
            s[2] = free[0];
            s[4] = free[1];
            s[6] = free[2];
            s[8] = free[3];
        } else {
            s[1] = 1.0;
            s[3] = free[0];
            s[5] = free[1];
            s[7] = free[2];
            s[9] = free[3];
        }
        s
    }

    /// The ODE in `τ` for given `α` and `Y`.
    pub fn problem(&self, alpha: f64, y_end: f64) -> OdeProblem {
        let (n, delta, dim) = (self.n, self.delta, self.dim);
        let beta = (1.0 - alpha * n) / 10.0;
        OdeProblem::new(dim, move |tau, s, ds| {
            let y = y_end * tau;
            let m = mobility(s[0], n, delta);
            for i in 0..8 {
                ds[i] = y_end * s[i + 1];
            }
            if dim == 9 {
                ds[8] = -y_end * alpha * y * s[0] / m;
            } else {
                ds[8] = y_end * s[9] / m;
                ds[9] = -y_end * (beta * y * s[1] + alpha * s[0]);
            }
        })
    }

    fn tau(&self, j: usize) -> f64 {
        j as f64 / self.segments as f64
    }

    pub fn segment_end(&self, problem: &OdeProblem, j: usize, start: &[f64]) -> Result<Vec<f64>, EigenError> {
        let traj = integrate(problem, (self.tau(j), self.tau(j + 1)), start, &self.integrator, &[])?;
        Ok(traj.final_state().to_vec())
    }

    fn far_residual(&self, end: &[f64], out: &mut Vec<f64>) {
        match &self.far {
            FarEnd::Interface { count } => {
                out.extend_from_slice(&end[..*count]);
            }
            FarEnd::Decay { rows } => {
                let v = rows * DVector::from_column_slice(end);
                out.extend(v.iter());
            }
        }
    }

    fn starts(&self, u: &Unpacked) -> Vec<Vec<f64>> {
        let mut starts = Vec::with_capacity(self.segments);
        starts.push(self.centre_state(&u.free));
        for node in &u.nodes {
            starts.push(node.to_vec());
        }
        starts
    }

    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>, EigenError> {
        let u = self.unpack(x);
        if !(u.y_end > 0.0) {
            return Err(EigenError::BadInitialGuess(format!("free boundary must be positive, got {}", u.y_end)));
        }
        let problem = self.problem(u.alpha, u.y_end);
        let starts = self.starts(&u);
        let mut r = Vec::with_capacity(self.n_residuals());
        for j in 0..self.segments {
            let end = self.segment_end(&problem, j, &starts[j])?;
            if j + 1 < self.segments {
                r.extend(end.iter().zip(&starts[j + 1]).map(|(a, b)| a - b));
            } else {
                self.far_residual(&end, &mut r);
            }
        }
        Ok(r)
    }

    /// Block forward-difference Jacobian: each segment is re-integrated only
    /// for perturbations of its own start state, `α` and `Y`.
    pub fn jacobian(&self, x: &[f64], r0: &[f64], fd_step: f64) -> Result<DMatrix<f64>, EigenError> {
        let u = self.unpack(x);
        let problem = self.problem(u.alpha, u.y_end);
        let starts = self.starts(&u);
        let head = self.head();
        let nr = self.n_residuals();
        let mut jac = DMatrix::zeros(nr, x.len());
        let d = self.dim;

        // residual row block of segment j and the base segment-end values
        let block = |j: usize| (j * d, if j + 1 < self.segments { d } else { self.far.len() });
        let end_of = |j: usize, end: &[f64]| -> Vec<f64> {
            let mut v = Vec::new();
            if j + 1 < self.segments {
                v.extend_from_slice(end);
            } else {
                self.far_residual(end, &mut v);
            }
            v
        };
        let base: Vec<Vec<f64>> = (0..self.segments)
            .map(|j| {
                let (r0_start, len) = block(j);
                let mut v = r0[r0_start..r0_start + len].to_vec();
                if j + 1 < self.segments {
                    for (i, vi) in v.iter_mut().enumerate() {
                        *vi += starts[j + 1][i];
                    }
                }
                v
            })
            .collect();

        let free_slots: [usize; 4] = if self.k % 2 == 0 { [2, 4, 6, 8] } else { [3, 5, 7, 9] };
        for j in 0..self.segments {
            let (row0, len) = block(j);
            // start-state columns
            let cols: Vec<(usize, usize)> = if j == 0 {
                (0..4).map(|c| (c, free_slots[c])).collect()
            } else {
                (0..d).map(|c| (head + (j - 1) * d + c, c)).collect()
            };
            for (col, comp) in cols {
                let h = fd_step * (1.0 + x[col].abs());
                let mut s = starts[j].clone();
                s[comp] += h;
                let e = end_of(j, &self.segment_end(&problem, j, &s)?);
                for i in 0..len {
                    jac[(row0 + i, col)] = (e[i] - base[j][i]) / h;
                }
            }
            // continuity against the next node
            if j + 1 < self.segments {
                for i in 0..d {
                    jac[(row0 + i, head + j * d + i)] = -1.0;
                }
            }
            // α and Y columns
            let mut param_cols = Vec::new();
            if self.alpha.is_none() {
                param_cols.push(4);
            }
            if self.y_end.is_none() {
                param_cols.push(head - 1);
            }
            for col in param_cols {
                let h = fd_step * (1.0 + x[col].abs());
                let mut xp = x.to_vec();
                xp[col] += h;
                let up = self.unpack(&xp);
                let prob = self.problem(up.alpha, up.y_end);
                let e = end_of(j, &self.segment_end(&prob, j, &starts[j])?);
                for i in 0..len {
                    jac[(row0 + i, col)] = (e[i] - base[j][i]) / h;
                }
            }
        }
        Ok(jac)
    }

    /// Integrates every segment with dense output and samples the solution
    /// at `per_segment` equally spaced points per segment (plus `y = Y`).
    ///
    /// Also returns `d/dy` of component 8 at each sample by a central
    /// difference of the dense output.
    pub fn sample(&self, x: &[f64], per_segment: usize) -> Result<Sampled, EigenError> {
        let u = self.unpack(x);
        let problem = self.problem(u.alpha, u.y_end);
        let starts = self.starts(&u);
        let mut out = Sampled::default();
        for j in 0..self.segments {
            let (t0, t1) = (self.tau(j), self.tau(j + 1));
            // steps no longer than the sample spacing keep the dense output sharp
            let fine = IntegratorConfig {
                max_step: (t1 - t0) / per_segment as f64,
                ..self.integrator.clone()
            };
            let traj = integrate(&problem, (t0, t1), &starts[j], &fine, &[])?;
            let last = j + 1 == self.segments;
            let count = if last { per_segment + 1 } else { per_segment };
            let h = 1e-5 * (t1 - t0);
            for i in 0..count {
                let t = if i == per_segment { t1 } else { t0 + (t1 - t0) * i as f64 / per_segment as f64 };
                let g = |t: f64| traj.eval(t).expect("inside segment")[8];
                let d = if t - h < t0 {
                    (-3.0 * g(t) + 4.0 * g(t + h) - g(t + 2.0 * h)) / (2.0 * h)
                } else if t + h > t1 {
                    (3.0 * g(t) - 4.0 * g(t - h) + g(t - 2.0 * h)) / (2.0 * h)
                } else {
                    (g(t + h) - g(t - h)) / (2.0 * h)
                };
                out.y.push(u.y_end * t);
                out.states.push(traj.eval(t).expect("inside segment"));
                out.d8.push(d / u.y_end);
            }
            if last {
                out.end = traj.final_state().to_vec();
            }
        }
        Ok(out)
    }

    /// State at `y ∈ [0, Y]`, integrating from the nearest node below.
    pub fn state_at(&self, x: &[f64], y: f64) -> Result<Vec<f64>, EigenError> {
        let u = self.unpack(x);
        let tau = (y / u.y_end).clamp(0.0, 1.0);
        let j = ((tau * self.segments as f64).floor() as usize).min(self.segments - 1);
        let starts = self.starts(&u);
        if tau == self.tau(j) {
            return Ok(starts[j].clone());
        }
        let problem = self.problem(u.alpha, u.y_end);
        let traj = integrate(&problem, (self.tau(j), tau), &starts[j], &self.integrator, &[])?;
        Ok(traj.final_state().to_vec())
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Sampled {
    pub y: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub d8: Vec<f64>,
    pub end: Vec<f64>,
}

/// Roots of the frozen-coefficient characteristic polynomial at `y = L` for
/// the linear (`n = 0`) equation and rows annihilating the growing modes.
///
/// For the 9-dimensional form `r⁹ = -α L`; for the flux form
/// `r¹⁰ + β L r + α = 0`. A state `s` lies in the span of the non-growing
/// modes `(1, r, …, r^(d-1))` iff the growing coefficients of `V⁻¹ s` vanish;
/// real and imaginary parts of those coefficients give the rows.
pub(crate) fn decay_rows(dim: usize, alpha: f64, length: f64) -> Result<(DMatrix<f64>, Vec<Complex64>), EigenError> {
    let mut poly = vec![0.0; dim + 1];
    poly[0] = 1.0;
    if dim == 9 {
        poly[9] = alpha * length;
    } else {
        poly[9] = 0.1 * length;
        poly[10] = alpha;
    }
    // companion matrix of r^d + c_1 r^(d-1) + … + c_d
    let mut comp = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim - 1 {
        comp[(i, i + 1)] = 1.0;
    }
    for j in 0..dim {
        comp[(dim - 1, j)] = -poly[dim - j];
    }
    let roots: Vec<Complex64> = comp.complex_eigenvalues().iter().copied().collect();
    let vand = DMatrix::<Complex64>::from_fn(dim, dim, |i, j| roots[j].powu(i as u32));
    let inv = vand
        .try_inverse()
        .ok_or_else(|| EigenError::DomainTooShort("mode matrix is singular".into()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (m, r) in roots.iter().enumerate() {
        if r.re <= 0.0 || r.im < 0.0 {
            continue;
        }
        rows.push((0..dim).map(|j| inv[(m, j)].re).collect());
        if r.im > 0.0 {
            rows.push((0..dim).map(|j| inv[(m, j)].im).collect());
        }
    }
    if rows.len() != 4 {
        return Err(EigenError::DomainTooShort(format!("expected 4 growing modes, found {}", rows.len())));
    }
    let flat: Vec<f64> = rows.concat();
    Ok((DMatrix::from_row_slice(4, dim, &flat), roots))
}
