use nalgebra::DMatrix;

use super::{OdeError, OdeProblem};

/// Forward-difference Jacobian with column steps `h_j = scale·(1 + |y_j|)`.
pub fn jacobian_fd(problem: &OdeProblem, t: f64, y: &[f64], scale: f64) -> Result<DMatrix<f64>, OdeError> {
    let f0 = problem.rhs_vec(t, y);
    jacobian_fd_with_f0(problem, t, y, &f0, scale)
}

pub(crate) fn jacobian_fd_with_f0(
    problem: &OdeProblem,
    t: f64,
    y: &[f64],
    f0: &[f64],
    scale: f64,
) -> Result<DMatrix<f64>, OdeError> {
    let d = problem.dim();
    let mut jac = DMatrix::zeros(d, d);
    let mut yp = y.to_vec();
    let mut fp = vec![0.0; d];
    for j in 0..d {
        let h = scale * (1.0 + y[j].abs());
        yp[j] = y[j] + h;
        // the representable step, not the requested one
        let h = yp[j] - y[j];
        problem.eval(t, &yp, &mut fp);
        for i in 0..d {
            let v = (fp[i] - f0[i]) / h;
            if !v.is_finite() {
                return Err(OdeError::NonFiniteEntry { row: i, col: j });
            }
            jac[(i, j)] = v;
        }
        yp[j] = y[j];
    }
    Ok(jac)
}

/// Central-difference Jacobian, second order in the column step.
pub fn jacobian_fd_central(
    problem: &OdeProblem,
    t: f64,
    y: &[f64],
    scale: f64,
) -> Result<DMatrix<f64>, OdeError> {
    let d = problem.dim();
    let mut jac = DMatrix::zeros(d, d);
    let mut yp = y.to_vec();
    let mut fp = vec![0.0; d];
    let mut fm = vec![0.0; d];
    for j in 0..d {
        let h = scale * (1.0 + y[j].abs());
        yp[j] = y[j] + h;
        problem.eval(t, &yp, &mut fp);
        yp[j] = y[j] - h;
        problem.eval(t, &yp, &mut fm);
        yp[j] = y[j];
        for i in 0..d {
            let v = (fp[i] - fm[i]) / (2.0 * h);
            if !v.is_finite() {
                return Err(OdeError::NonFiniteEntry { row: i, col: j });
            }
            jac[(i, j)] = v;
        }
    }
    Ok(jac)
}
