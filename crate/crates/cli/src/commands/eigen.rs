use rayon::prelude::*;
use serde_json::{json, Value};
use tfe10_core::eigensolver::{self, continue_branch, BranchConfig};
use tfe10_core::{ContinuationBranch, EigenError, EigenProblemSpec, SimilarityProfile};

use super::pool;
use crate::args::{EigenBranchArgs, EigenSolveArgs};
use crate::config::Overrides;
use crate::output::{fmt_num, OutputTable, Run};
use crate::svg::{line_plot, Series};
use crate::CliError;

/// Defaults, then the config file, then explicit flags.
pub fn eigen_config(
    ov: &mut Overrides,
    delta: Option<f64>,
    tol: Option<f64>,
    y0_guess: Option<f64>,
) -> Result<BranchConfig, CliError> {
    let mut b = BranchConfig::default();
    let c = &mut b.solver;
    ov.f64("reg_delta", &mut c.reg_delta)?;
    ov.f64("newton_tol", &mut c.newton.tol)?;
    ov.usize("newton_max_iter", &mut c.newton.max_iter)?;
    ov.f64("newton_fd_step", &mut c.newton.fd_step)?;
    ov.f64("rel_tol", &mut c.rel_tol)?;
    ov.f64("abs_tol", &mut c.abs_tol)?;
    ov.usize("segments", &mut c.segments)?;
    ov.usize("samples_per_segment", &mut c.samples_per_segment)?;
    ov.f64("n_max", &mut c.n_max)?;
    ov.f64("linear_length", &mut c.linear_length)?;
    ov.opt_f64("y0_guess", &mut c.y0_guess)?;
    ov.f64("min_step", &mut b.min_step)?;
    if let Some(d) = delta {
        c.reg_delta = d;
    }
    if let Some(t) = tol {
        c.newton.tol = t;
    }
    if y0_guess.is_some() {
        c.y0_guess = y0_guess;
    }
    if !(c.newton.tol > 0.0) {
        return Err(CliError::Usage(format!("tolerance must be positive, got {}", c.newton.tol)));
    }
    if !(0.0 < c.rel_tol && c.rel_tol <= 1e-2 && c.abs_tol > 0.0) {
        return Err(CliError::Usage("need 0 < rel_tol ≤ 1e-2 and abs_tol > 0".into()));
    }
    if matches!(c.y0_guess, Some(y) if !(y > 0.0)) {
        return Err(CliError::Usage("y0 guess must be positive".into()));
    }
    c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(b)
}

fn profile_summary(p: &SimilarityProfile) -> Value {
    let (mass, mass_check) = eigensolver::mass_with_check(p);
    json!({
        "n": p.n,
        "k": p.k,
        "alpha": p.alpha,
        "y0": p.y0,
        "newton_residual": p.residual.newton_residual,
        "newton_iterations": p.residual.newton_iterations,
        "interface_residual": p.residual.interface_residual,
        "flux_residual": p.residual.flux_residual,
        "ode_residual": p.residual.ode_residual,
        "sign_changes": p.sign_changes(1e-10),
        "half_mass": mass,
        "half_mass_quadrature_change": mass_check,
        "total_mass": eigensolver::total_mass(p),
        "cold_starts": p.residual.cold_starts,
    })
}

fn failure_summary(n: f64, k: usize, e: &EigenError) -> Value {
    let best = match e {
        EigenError::NewtonStalled { residual, .. } => Some(*residual),
        _ => None,
    };
    json!({ "n": n, "k": k, "error": e.to_string(), "best_residual": best })
}

fn label(n: f64, k: usize) -> String {
    format!("n{}-k{k}", fmt_num(n))
}

pub fn solve(a: EigenSolveArgs) -> Result<(), CliError> {
    let mut ov = Overrides::load(a.output.config.as_deref())?;
    let cfg = eigen_config(&mut ov, a.delta, a.tol, a.y0_guess)?.solver;
    ov.finish()?;
    let tasks: Vec<(f64, usize)> = a.n.iter().flat_map(|&n| a.k.iter().map(move |&k| (n, k))).collect();
    for &(n, k) in &tasks {
        EigenProblemSpec {
            n,
            k,
            config: cfg.clone(),
        }
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let pool = pool(a.jobs)?;

    let params = json!({ "n": a.n, "k": a.k });
    let mut run = Run::start("eigen-solve", params, serde_json::to_value(&cfg)?, a.output.out.as_deref())?;
    let results: Vec<Result<SimilarityProfile, EigenError>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(n, k)| {
                eigensolver::solve(
                    &EigenProblemSpec {
                        n,
                        k,
                        config: cfg.clone(),
                    },
                    None,
                )
            })
            .collect()
    });

    let mut summaries = Vec::new();
    let mut series = Vec::new();
    let mut failed = 0;
    for (&(n, k), r) in tasks.iter().zip(&results) {
        match r {
            Ok(p) => {
                let mut t = OutputTable::new("profile", &["y", "f"]);
                for (y, f) in p.grid.iter().zip(&p.f) {
                    t.push(&[*y, *f])?;
                }
                let path = run.write_table(&format!("profile-{}", label(n, k)), &t)?;
                let mut s = profile_summary(p);
                s["output"] = json!(path.file_name().map(|f| f.to_string_lossy().into_owned()));
                if p.residual.cold_starts.len() > 1 {
                    run.warn(format!(
                        "{}: converged only from the fallback free-boundary guess {}",
                        label(n, k),
                        p.residual.cold_starts.last().map(|c| c.y0_guess).unwrap_or(f64::NAN)
                    ));
                }
                println!(
                    "n = {n}, k = {k}: alpha = {}, y0 = {}, flux residual = {:e}",
                    fmt_num(p.alpha),
                    fmt_num(p.y0),
                    p.residual.flux_residual
                );
                series.push(Series::new(
                    format!("n={n}, k={k}"),
                    p.grid.iter().copied().zip(p.f.iter().copied()).collect(),
                ));
                summaries.push(s);
            }
            Err(e) => {
                eprintln!("n = {n}, k = {k}: {e}");
                failed += 1;
                summaries.push(failure_summary(n, k, e));
            }
        }
    }
    if a.output.svg && !series.is_empty() {
        run.write_svg("profiles", &line_plot("Similarity profiles", "y", "f", &series))?;
    }
    let outcome = if failed == 0 {
        "ok".to_string()
    } else {
        format!("solver failure in {failed} of {} solves", tasks.len())
    };
    run.finish(&outcome, json!({ "solves": summaries }))?;
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Numerical(outcome))
    }
}

/// Parses `start:stop:step` into grid points rounded to 12 decimals, stop
/// included when it lies on the grid.
pub fn branch_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("n-range must be start:stop:step with step > 0, got {spec:?}"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor();
    if !(count >= 0.0) {
        return Err(CliError::Usage(format!("n-range {spec:?} is empty")));
    }
    Ok((0..=count as usize)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

fn branch_table(b: &ContinuationBranch) -> Result<OutputTable, CliError> {
    let mut t = OutputTable::new("branch", &["n", "alpha", "y0"]);
    for p in &b.points {
        t.push(&[p.n, p.alpha, p.y0])?;
    }
    Ok(t)
}

pub fn branch(a: EigenBranchArgs) -> Result<(), CliError> {
    let mut ov = Overrides::load(a.output.config.as_deref())?;
    let cfg = eigen_config(&mut ov, a.delta, a.tol, None)?;
    ov.finish()?;
    let grid = branch_grid(&a.n_range)?;
    if grid[0] < 0.0 || *grid.last().expect("non-empty") > cfg.solver.n_max {
        return Err(CliError::Usage(format!("n-range must lie in [0, {}]", cfg.solver.n_max)));
    }
    if a.k.is_empty() {
        return Err(CliError::Usage("no mode numbers given".into()));
    }
    let pool = pool(a.jobs)?;
    let params = json!({ "k": a.k, "n_range": a.n_range, "grid": grid });
    let mut run = Run::start("eigen-branch", params, serde_json::to_value(&cfg)?, a.output.out.as_deref())?;
    let results: Vec<Result<ContinuationBranch, EigenError>> =
        pool.install(|| a.k.par_iter().map(|&k| continue_branch(k, &grid, &cfg)).collect());

    let mut summaries = Vec::new();
    let mut series = Vec::new();
    let mut stalled = Vec::new();
    for (&k, r) in a.k.iter().zip(results) {
        let (b, stall) = match r {
            Ok(b) => (b, None),
            Err(EigenError::BranchStalled { n_reached, branch }) => (*branch, Some(n_reached)),
            Err(e) => {
                stalled.push(k);
                summaries.push(json!({ "k": k, "error": e.to_string() }));
                continue;
            }
        };
        let path = run.write_table(&format!("branch-k{k}"), &branch_table(&b)?)?;
        let rejected = b.log.iter().filter(|s| !s.accepted).count();
        if rejected > 0 {
            run.warn(format!("k = {k}: {rejected} continuation steps rejected and halved"));
        }
        if let Some(n) = stall {
            stalled.push(k);
            eprintln!("k = {k}: branch stalled, furthest n reached {n}");
        }
        println!("k = {k}: {} points", b.points.len());
        series.push(Series::new(format!("k={k}"), b.points.iter().map(|p| (p.n, p.alpha)).collect()));
        summaries.push(json!({
            "k": k,
            "points": b.points.iter().map(|p| json!({
                "n": p.n, "alpha": p.alpha, "y0": p.y0,
                "residual": p.residual, "iterations": p.iterations,
            })).collect::<Vec<_>>(),
            "log": b.log,
            "stalled_at": stall,
            "output": path.file_name().map(|f| f.to_string_lossy().into_owned()),
        }));
    }
    if a.output.svg && !series.is_empty() {
        run.write_svg("branch", &line_plot("Nonlinear eigenvalues", "n", "alpha", &series))?;
    }
    let outcome = if stalled.is_empty() {
        "ok".to_string()
    } else {
        format!("branch stalled for k = {stalled:?}")
    };
    run.finish(&outcome, json!({ "branches": summaries }))?;
    if stalled.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(outcome))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(branch_grid("0.05:0.2:0.05").unwrap(), vec![0.05, 0.1, 0.15, 0.2]);
        assert_eq!(branch_grid("0.1:0.1:1").unwrap(), vec![0.1]);
        assert!(matches!(branch_grid("0.2:0.1:0.05"), Err(CliError::Usage(_))));
        assert!(matches!(branch_grid("0:1:0"), Err(CliError::Usage(_))));
        assert!(matches!(branch_grid("0:1"), Err(CliError::Usage(_))));
        assert!(matches!(branch_grid("a:b:c"), Err(CliError::Usage(_))));
    }

    #[test]
    fn flags_override_config() {
        let mut ov = Overrides::parse("reg_delta = 1e-8\nnewton_tol = 1e-9\n").unwrap();
        let c = eigen_config(&mut ov, Some(1e-12), None, None).unwrap();
        ov.finish().unwrap();
        assert_eq!(c.solver.reg_delta, 1e-12);
        assert_eq!(c.solver.newton.tol, 1e-9);
    }

    #[test]
    fn bad_tolerances_are_usage_errors() {
        let mut ov = Overrides::default();
        assert!(matches!(eigen_config(&mut ov, None, Some(-1.0), None), Err(CliError::Usage(_))));
        let mut ov = Overrides::parse("samples_per_segment = 3").unwrap();
        assert!(matches!(eigen_config(&mut ov, None, None, None), Err(CliError::Usage(_))));
    }
}
