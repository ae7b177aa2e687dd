//! Benchmark fixtures shared by the criterion targets.

use tfe10_core::odecore::reduce_scalar_ode;
use tfe10_core::OdeProblem;

/// `y'' = -y`.
pub fn harmonic() -> OdeProblem {
    reduce_scalar_ode(2, |_, y| -y[0])
}

/// `y' = -10^6 (y - cos t) - sin t`, exact solution `cos t` after the layer.
pub fn stiff_cosine() -> OdeProblem {
    OdeProblem::new(1, |t, y, dy| dy[0] = -1e6 * (y[0] - t.cos()) - t.sin()).with_stiffness_hint(true)
}
