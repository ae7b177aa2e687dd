use super::OdeProblem;

/// Companion-form reduction of a scalar ODE `y^(order) = G(t, y, y', …)`.
///
/// Component `i` of the resulting system holds the `i`-th derivative; the
/// closure receives all `order` components and returns the top derivative.
pub fn reduce_scalar_ode<G>(order: usize, top: G) -> OdeProblem
where
    G: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
{
    assert!(order >= 1, "order must be at least 1");
    OdeProblem::new(order, move |t, y, dy| {
        dy[..order - 1].copy_from_slice(&y[1..order]);
        dy[order - 1] = top(t, y);
    })
}
