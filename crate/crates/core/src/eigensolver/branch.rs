use serde::{Deserialize, Serialize};

use super::solve::solve;
use super::{EigenConfig, EigenError, EigenProblemSpec, ShootingState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchConfig {
    pub solver: EigenConfig,
    /// Smallest step before the branch is declared stalled.
    pub min_step: f64,
}

impl Default for BranchConfig {
    fn default() -> Self {
        Self {
            solver: EigenConfig::default(),
            min_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub n: f64,
    pub alpha: f64,
    pub y0: f64,
    pub residual: f64,
    pub iterations: usize,
    pub state: ShootingState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub from: f64,
    pub to: f64,
    pub accepted: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationBranch {
    pub k: usize,
    pub points: Vec<BranchPoint>,
    pub log: Vec<StepLog>,
}

impl ContinuationBranch {
    pub fn last_n(&self) -> Option<f64> {
        self.points.last().map(|p| p.n)
    }
}

/// `a + t (b - a)` componentwise on shooting states.
fn extrapolate(a: &ShootingState, b: &ShootingState, t: f64) -> ShootingState {
    let lerp = |x: f64, y: f64| x + t * (y - x);
    ShootingState {
        free: std::array::from_fn(|i| lerp(a.free[i], b.free[i])),
        y0: lerp(a.y0, b.y0),
        alpha: match (a.alpha, b.alpha) {
            (Some(x), Some(y)) => Some(lerp(x, y)),
            _ => b.alpha,
        },
        nodes: a
            .nodes
            .iter()
            .zip(&b.nodes)
            .map(|(u, v)| u.iter().zip(v).map(|(x, y)| lerp(*x, *y)).collect())
            .collect(),
    }
}

/// Follows the `k`-th eigenpair through the increasing `grid` of `n`.
///
/// A leading `n = 0` is solved on the linear baseline. The first `n > 0`
/// point starts from the linear eigenfunction; every later solve
/// is warm-started by linear extrapolation through the last two points.
/// A failed solve halves the step towards the next grid value, down to
/// `min_step`.
pub fn continue_branch(k: usize, grid: &[f64], config: &BranchConfig) -> Result<ContinuationBranch, EigenError> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(EigenError::InvalidSpec("n-grid must be non-empty and strictly increasing".into()));
    }
    let mut branch = ContinuationBranch {
        k,
        points: Vec::new(),
        log: Vec::new(),
    };
    let spec_at = |n: f64| EigenProblemSpec {
        n,
        k,
        config: config.solver.clone(),
    };
    let stalled = |branch: ContinuationBranch, n: f64| EigenError::BranchStalled {
        n_reached: n,
        branch: Box::new(branch),
    };

    // the linear point has no free boundary, so it cannot seed the next solve
    let mut rest = grid;
    if grid[0] == 0.0 {
        match solve(&spec_at(0.0), None) {
            Ok(p) => {
                branch.log.push(StepLog {
                    from: 0.0,
                    to: 0.0,
                    accepted: true,
                    note: "linear baseline".into(),
                });
                branch.points.push(point(&p));
            }
            Err(e) => {
                branch.log.push(StepLog {
                    from: 0.0,
                    to: 0.0,
                    accepted: false,
                    note: e.to_string(),
                });
                return Err(stalled(branch, f64::NAN));
            }
        }
        rest = &grid[1..];
        if rest.is_empty() {
            return Ok(branch);
        }
    }
    let reached = branch.last_n().unwrap_or(f64::NAN);
    match solve(&spec_at(rest[0]), None) {
        Ok(p) => {
            branch.log.push(StepLog {
                from: rest[0],
                to: rest[0],
                accepted: true,
                note: format!("cold start, residual {:e}", p.residual.newton_residual),
            });
            branch.points.push(point(&p));
        }
        Err(e) => {
            branch.log.push(StepLog {
                from: rest[0],
                to: rest[0],
                accepted: false,
                note: e.to_string(),
            });
            return Err(stalled(branch, reached));
        }
    }

    for &target in &rest[1..] {
        let mut step = target - branch.points.last().expect("non-empty").n;
        while branch.points.last().expect("non-empty").n < target {
            let last = branch.points.last().expect("non-empty");
            let from = last.n;
            let to = (from + step).min(target);
            let len = branch.points.len();
            let warm = match len {
                1 => last.state.clone(),
                _ if branch.points[len - 2].n == 0.0 => last.state.clone(),
                _ => {
                    let prev = &branch.points[len - 2];
                    extrapolate(&prev.state, &last.state, (to - prev.n) / (from - prev.n))
                }
            };
            match solve(&spec_at(to), Some(&warm)) {
                Ok(p) => {
                    branch.log.push(StepLog {
                        from,
                        to,
                        accepted: true,
                        note: format!("residual {:e}", p.residual.newton_residual),
                    });
                    branch.points.push(point(&p));
                    step = (2.0 * step).min(target - to).max(step);
                }
                Err(e) => {
                    branch.log.push(StepLog {
                        from,
                        to,
                        accepted: false,
                        note: e.to_string(),
                    });
                    step *= 0.5;
                    if step < config.min_step {
                        return Err(stalled(branch, from));
                    }
                }
            }
        }
    }
    Ok(branch)
}

fn point(p: &super::SimilarityProfile) -> BranchPoint {
    BranchPoint {
        n: p.n,
        alpha: p.alpha,
        y0: p.y0,
        residual: p.residual.newton_residual,
        iterations: p.residual.newton_iterations,
        state: p.shooting.clone(),
    }
}
