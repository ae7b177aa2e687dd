use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::EigenError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// Acceptance threshold on `‖R‖∞`.
    pub tol: f64,
    pub max_iter: usize,
    /// Smallest damping factor tried by the halving line search.
    pub min_damping: f64,
    /// Relative forward-difference step, `h_j = fd_step·(1 + |x_j|)`.
    pub fd_step: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 30,
            min_damping: 2f64.powi(-20),
            fd_step: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    pub x: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// `‖R‖∞` at the guess and after every step.
    pub history: Vec<f64>,
    /// Damping factor accepted at every step.
    pub damping: Vec<f64>,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| if x.is_nan() { f64::INFINITY } else { m.max(x.abs()) })
}

/// Forward-difference Jacobian of `residual` at `x`, given `r0 = residual(x)`.
pub fn fd_jacobian<R>(residual: &mut R, x: &[f64], r0: &[f64], fd_step: f64) -> Result<DMatrix<f64>, EigenError>
where
    R: FnMut(&[f64]) -> Result<Vec<f64>, EigenError>,
{
    let mut jac = DMatrix::zeros(r0.len(), x.len());
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let h = fd_step * (1.0 + x[j].abs());
        xp[j] = x[j] + h;
        let r = residual(&xp)?;
        xp[j] = x[j];
        for i in 0..r0.len() {
            jac[(i, j)] = (r[i] - r0[i]) / h;
        }
    }
    Ok(jac)
}

/// Damped Newton iteration with a finite-difference Jacobian.
pub fn newton_shoot<R>(mut residual: R, guess: &[f64], config: &NewtonConfig) -> Result<NewtonReport, EigenError>
where
    R: FnMut(&[f64]) -> Result<Vec<f64>, EigenError>,
{
    let step = config.fd_step;
    // the residual is borrowed by both closures in turn, never concurrently
    let cell = std::cell::RefCell::new(&mut residual);
    newton_shoot_with(
        |x| (cell.borrow_mut())(x),
        |x, r0| fd_jacobian(&mut *cell.borrow_mut(), x, r0, step),
        guess,
        config,
    )
}

/// Damped Newton iteration with a caller-supplied Jacobian.
///
/// Each step solves `J dx = -R` and halves the step until `‖R‖∞`
/// decreases, down to `min_damping`. Trial points where the residual
/// cannot be evaluated count as no decrease.
pub fn newton_shoot_with<R, J>(
    mut residual: R,
    mut jacobian: J,
    guess: &[f64],
    config: &NewtonConfig,
) -> Result<NewtonReport, EigenError>
where
    R: FnMut(&[f64]) -> Result<Vec<f64>, EigenError>,
    J: FnMut(&[f64], &[f64]) -> Result<DMatrix<f64>, EigenError>,
{
    let mut x = guess.to_vec();
    let mut r = residual(&x).map_err(|e| EigenError::BadInitialGuess(e.to_string()))?;
    let mut norm = sup(&r);
    if !norm.is_finite() {
        return Err(EigenError::BadInitialGuess("residual is not finite at the guess".into()));
    }
    let mut report = NewtonReport {
        x: x.clone(),
        residual_norm: norm,
        iterations: 0,
        history: vec![norm],
        damping: Vec::new(),
    };
    let stalled = |report: &NewtonReport| EigenError::NewtonStalled {
        residual: report.residual_norm,
        iterations: report.iterations,
        iterate: report.x.clone(),
    };

    while norm > config.tol {
        if report.iterations >= config.max_iter {
            return Err(stalled(&report));
        }
        let jac = jacobian(&x, &r)?;
        let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v));
        let dx = solve_linear(jac, rhs).ok_or_else(|| stalled(&report))?;

        let mut lambda = 1.0;
        let mut accepted = None;
        while lambda >= config.min_damping {
            let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + lambda * d).collect();
            if let Ok(rt) = residual(&trial) {
                let nt = sup(&rt);
                if nt < norm {
                    accepted = Some((trial, rt, nt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((xt, rt, nt)) = accepted else {
            return Err(stalled(&report));
        };
        x = xt;
        r = rt;
        norm = nt;
        report.iterations += 1;
        report.x.clone_from(&x);
        report.residual_norm = norm;
        report.history.push(norm);
        report.damping.push(lambda);
    }
    Ok(report)
}

fn solve_linear(jac: DMatrix<f64>, rhs: DVector<f64>) -> Option<DVector<f64>> {
    if jac.is_square() {
        if let Some(dx) = jac.clone().lu().solve(&rhs) {
            if dx.iter().all(|v| v.is_finite()) {
                return Some(dx);
            }
        }
    }
    let svd = jac.svd(true, true);
    let tol = svd.singular_values.max() * 1e-14;
    svd.solve(&rhs, tol).ok().filter(|dx| dx.iter().all(|v| v.is_finite()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_converges_in_one_step() {
        let a = [[4.0, 1.0, 0.0], [1.0, 3.0, -1.0], [0.5, 0.0, 2.0]];
        let b = [1.0, -2.0, 3.0];
        let res = |x: &[f64]| -> Result<Vec<f64>, EigenError> {
            Ok((0..3).map(|i| (0..3).map(|j| a[i][j] * x[j]).sum::<f64>() - b[i]).collect())
        };
        let rep = newton_shoot(res, &[0.0; 3], &NewtonConfig::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.damping, vec![1.0]);
        let exact = newton_shoot_with(
            res,
            |_, _| Ok(DMatrix::from_fn(3, 3, |i, j| a[i][j])),
            &[0.0; 3],
            &NewtonConfig {
                tol: 1e-14,
                ..NewtonConfig::default()
            },
        )
        .unwrap();
        assert_eq!(exact.iterations, 1);
    }

    #[test]
    fn scalar_cube_root() {
        let cfg = NewtonConfig {
            tol: 1e-13,
            ..NewtonConfig::default()
        };
        let rep = newton_shoot(|x: &[f64]| Ok(vec![x[0].powi(3) - 8.0]), &[3.0], &cfg).unwrap();
        assert!((rep.x[0] - 2.0).abs() < 1e-12);
        assert!(rep.history.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn stall_reports_best_iterate() {
        // x² + 1 has no real root; the minimum of |R| is at 0
        let err = newton_shoot(|x: &[f64]| Ok(vec![x[0] * x[0] + 1.0]), &[1.0], &NewtonConfig::default()).unwrap_err();
        match err {
            EigenError::NewtonStalled { residual, iterate, .. } => {
                assert!(residual >= 1.0);
                assert_eq!(iterate.len(), 1);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn bad_guess_is_reported() {
        let err = newton_shoot(|_: &[f64]| Ok(vec![f64::NAN]), &[1.0], &NewtonConfig::default()).unwrap_err();
        assert!(matches!(err, EigenError::BadInitialGuess(_)));
    }
}
