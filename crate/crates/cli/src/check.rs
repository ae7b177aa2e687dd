//! Cross-module invariant battery behind `tfe10 check`.

use std::f64::consts::PI;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use tfe10_core::asymptotics::{
    hj_residual, interface_position, interface_similarity, kato_gap, lambda_root, wkbj_eigen_phase, SpectralModel,
};
use tfe10_core::eigensolver::{alpha0, continue_branch, solve_k0, solve_linear_n0, BranchConfig};
use tfe10_core::odecore::{integrate, reduce_scalar_ode, EventSpec};
use tfe10_core::oscillator::{
    default_cycle_init, equilibrium, euler_coefficients, find_limit_cycle, locate_heteroclinic, ClassifyConfig,
    CycleFormulation,
};
use tfe10_core::{CycleConfig, EigenConfig, InterfaceOscillatorParams, IntegratorConfig, OdeProblem};

use crate::args::{CheckArgs, Suite};
use crate::commands::pool;
use crate::CliError;

/// `-Γ(3/10)/Γ(1/10)`: `f''(0)` of the linear `k = 0` profile.
pub const LINEAR_K0_CURVATURE: f64 = -0.314_454_886_929_477_6;

/// A check receives a tolerance scale (`1` normally, NaN when injected) and
/// reports pass/fail with a one-line detail.
pub type CheckFn = fn(f64) -> (bool, String);

pub struct Check {
    pub name: &'static str,
    pub full_only: bool,
    pub run: CheckFn,
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

pub fn checks() -> Vec<Check> {
    let c = |name, full_only, run| Check { name, full_only, run };
    vec![
        c("lambda-root", false, lambda_roots as CheckFn),
        c("eikonal", false, eikonal),
        c("interface-law", false, interface_law),
        c("hj-convergence", false, hj_convergence),
        c("kato-bound", false, kato_bound),
        c("euler-coefficients", false, euler_product),
        c("equilibrium", false, equilibrium_residual),
        c("integrator-battery", false, integrator_battery),
        c("alpha0-law", false, alpha0_law),
        c("linear-eigen", false, linear_eigen),
        c("limit-cycle", false, limit_cycle),
        c("eigen-k0", true, eigen_k0),
        c("cycle-amplitude", false, cycle_amplitude),
        c("linear-limit", true, linear_limit),
        c("heteroclinic", false, heteroclinic),
    ]
}

/// Runs every check of `suite`; `inject` names a check whose tolerance is
/// replaced by NaN.
pub fn run_suite(suite: Suite, inject: Option<&str>, jobs: usize) -> Result<Vec<CheckOutcome>, CliError> {
    let all = checks();
    if let Some(name) = inject {
        if !all.iter().any(|c| c.name == name) {
            return Err(CliError::Usage(format!("no check named {name:?}")));
        }
    }
    let selected: Vec<Check> = all.into_iter().filter(|c| suite == Suite::Full || !c.full_only).collect();
    let pool = pool(jobs)?;
    Ok(pool.install(|| {
        selected
            .par_iter()
            .map(|c| {
                let scale = if inject == Some(c.name) { f64::NAN } else { 1.0 };
                let start = Instant::now();
                let (passed, detail) = (c.run)(scale);
                CheckOutcome {
                    name: c.name,
                    passed,
                    detail,
                    seconds: start.elapsed().as_secs_f64(),
                }
            })
            .collect()
    }))
}

pub fn run(a: CheckArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let out = run_suite(a.suite, a.inject_failure.as_deref(), a.jobs)?;
    for o in &out {
        println!(
            "{:4} {:20} {:>8.2}s  {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.seconds,
            o.detail
        );
    }
    let failed: Vec<&str> = out.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    println!(
        "{} of {} checks passed in {:.1}s",
        out.len() - failed.len(),
        out.len(),
        start.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("failed checks: {}", failed.join(", "))))
    }
}

fn lambda_roots(s: f64) -> (bool, String) {
    let r = lambda_root();
    let tol = 1e-8 * s;
    (
        r.sextic_residual < tol && r.decic_residual < tol,
        format!("sextic {:.1e}, decic {:.1e}", r.sextic_residual, r.decic_residual),
    )
}

fn eikonal(s: f64) -> (bool, String) {
    let worst = [1e-3, 1.0, 1e3]
        .iter()
        .map(|&y| {
            let p = wkbj_eigen_phase(y, 1.0);
            let e = 10.0 * p.derivative.powu(9);
            (e.re - y).abs().max(e.im.abs()) / y
        })
        .fold(0.0, f64::max);
    (worst <= 1e-13 * s, format!("max relative residual {worst:.1e}"))
}

fn interface_law(s: f64) -> (bool, String) {
    let mut worst = 0.0f64;
    for &n in &[0.01, 0.05, 0.2] {
        let y0 = 10.0 * ((4.0 * PI / 9.0).cos().recip() / n).powf(0.9);
        worst = worst.max((interface_similarity(n) - y0).abs() / y0);
        for t in [0.5f64, 1.0, 10.0] {
            let x0 = y0 * t.powf(0.1);
            worst = worst.max((interface_position(n, t) - x0).abs() / x0);
        }
    }
    (worst <= 1e-14 * s, format!("max relative deviation {worst:.1e}"))
}

fn hj_convergence(s: f64) -> (bool, String) {
    let res: Vec<f64> = (0..6)
        .map(|i| hj_residual(1.0, 1.0, 1e-2 / 2f64.powi(i)).unwrap_or(f64::NAN))
        .collect();
    let orders: Vec<f64> = res.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let second = orders.iter().all(|&p| (p - 2.0).abs() <= 0.2 * s);
    let last = *res.last().expect("six levels");
    (
        second && last < 1e-6 * s,
        format!("orders {:.3?}, final residual {last:.1e}", orders),
    )
}

/// Uniform samples of `exp(-((y - 1/2)/w)²)` on `[0, 1]`.
pub fn gaussian(points: usize, width: f64) -> Vec<f64> {
    let m = points.saturating_sub(1).max(1) as f64;
    (0..points)
        .map(|i| {
            let y = i as f64 / m;
            (-((y - 0.5) / width).powi(2)).exp()
        })
        .collect()
}

fn kato_bound(s: f64) -> (bool, String) {
    let u = gaussian(2001, 0.15);
    let gaps: Vec<_> = [0.05, 0.1, 0.2]
        .iter()
        .map(|&n| (n, kato_gap(&u, n, 0, 1).expect("fine grid")))
        .collect();
    let within = gaps.iter().all(|(_, g)| g.measured <= g.bound * (1.0 + 1e-12 * s));
    let slopes: Vec<f64> = gaps.iter().map(|(n, g)| g.measured / n).collect();
    let spread = slopes.iter().cloned().fold(0.0, f64::max) / slopes.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    (
        within && spread <= 0.1 * s,
        format!("bound holds: {within}, slope spread {:.2}%", 100.0 * spread),
    )
}

fn euler_product(s: f64) -> (bool, String) {
    let mut rng = StdRng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mu: f64 = rng.gen_range(0.5..200.0);
        let c = euler_coefficients(mu);
        // anchors: a_0 = 1, a_1 = Σ(μ - i), a_9 = Π(μ - i)
        let a1 = 9.0 * mu - 36.0;
        let a9: f64 = (0..9).map(|i| mu - i as f64).product();
        worst = worst.max((c.a[0] - 1.0).abs());
        worst = worst.max((c.a[1] - a1).abs() / a1.abs().max(1.0));
        worst = worst.max((c.a[9] - a9).abs() / a9.abs().max(f64::MIN_POSITIVE));
        for &x in &[-2.3, -0.4, 0.9, 3.7] {
            let direct: f64 = (0..9).map(|i| x + mu - i as f64).product();
            let scale: f64 = c.a.iter().enumerate().map(|(k, a)| a.abs() * x.abs().powi(9 - k as i32)).sum();
            worst = worst.max((c.eval(x) - direct).abs() / scale);
        }
    }
    (worst <= 1e-12 * s, format!("100 random mu, max relative error {worst:.1e}"))
}

fn equilibrium_residual(s: f64) -> (bool, String) {
    let p = InterfaceOscillatorParams::new(1.2, 1.0).expect("valid");
    let Ok(eq) = equilibrium(&p) else {
        return (false, "no equilibrium at n = 1.2".into());
    };
    let a9 = euler_coefficients(p.mu).a[9];
    let phi = eq.phi0;
    let r = (a9 * phi + p.lambda0 * phi.abs().powf(-p.n) * phi).abs() / (a9 * phi).abs();
    (r < 1e-10 * s, format!("phi0 = {phi:.6e}, relative residual {r:.1e}"))
}

/// The integrator examples: exponential decay, one harmonic period, a stiff
/// layer relaxing onto `cos t`, and event location at `π/2`.
pub fn integrator_battery(s: f64) -> (bool, String) {
    let mut notes = Vec::new();
    let mut ok = true;
    let mut record = |name: &str, err: f64, tol: f64| {
        ok &= err <= tol * s;
        notes.push(format!("{name} {err:.1e}"));
    };
    let cfg = IntegratorConfig::default();

    let decay = OdeProblem::new(1, |_, y, dy| dy[0] = -y[0]);
    match integrate(&decay, (0.0, 1.0), &[1.0], &cfg, &[]) {
        Ok(t) => record("decay", (t.final_state()[0] - (-1f64).exp()).abs(), 1e-10),
        Err(_) => record("decay", f64::INFINITY, 0.0),
    }

    let harmonic = reduce_scalar_ode(2, |_, y| -y[0]);
    match integrate(&harmonic, (0.0, 2.0 * PI), &[0.0, 1.0], &cfg, &[]) {
        Ok(t) => {
            let y = t.final_state();
            record("harmonic", y[0].abs().max((y[1] - 1.0).abs()), 1e-8);
        }
        Err(_) => record("harmonic", f64::INFINITY, 0.0),
    }

    let stiff = OdeProblem::new(1, |t, y, dy| dy[0] = -1e6 * (y[0] - t.cos()) - t.sin()).with_stiffness_hint(true);
    match integrate(&stiff, (0.0, 1.0), &[1.0], &IntegratorConfig::with_tolerances(1e-8, 1e-10), &[]) {
        Ok(t) => {
            record("stiff", (t.final_state()[0] - 1f64.cos()).abs(), 1e-6);
            let steps = t.stats.accepted + t.stats.rejected;
            ok &= (steps as f64) <= 1e4 * s;
            notes.push(format!("stiff steps {steps}"));
        }
        Err(_) => {
            ok = false;
            notes.push("stiff failed".into());
        }
    }

    let ev = EventSpec::new("zero", |_, y| y[0]).terminal(true);
    match integrate(&harmonic, (0.0, 10.0), &[1.0, 0.0], &cfg, &[ev]) {
        Ok(t) if !t.events.is_empty() => {
            let err = (t.events[0].t - PI / 2.0).abs();
            ok &= err <= 1e-8 * s;
            notes.push(format!("event {err:.1e}"));
        }
        _ => {
            ok = false;
            notes.push("event missed".into());
        }
    }
    (ok, notes.join(", "))
}

fn alpha0_law(s: f64) -> (bool, String) {
    let mut worst = 0.0f64;
    let mut exact = true;
    for i in 0..=150 {
        let n = i as f64 / 100.0;
        exact &= alpha0(n) == 1.0 / (10.0 + n);
        worst = worst.max((SpectralModel::new(1, 0).alpha_k(n) - alpha0(n)).abs());
    }
    (
        exact && worst <= 1e-15 * s,
        format!("bitwise 1/(10+n): {exact}, predictor deviation {worst:.1e}"),
    )
}

fn linear_eigen(s: f64) -> (bool, String) {
    let cfg = EigenConfig::default();
    let mut ok = true;
    let mut notes = Vec::new();
    for k in 0..4 {
        match solve_linear_n0(k, cfg.linear_length, &cfg) {
            Ok(p) => {
                ok &= p.alpha == (1 + k) as f64 / 10.0;
                ok &= p.residual.flux_residual <= 1e-6 * s;
                if k == 0 {
                    let err = (p.derivatives[0][1] - LINEAR_K0_CURVATURE).abs();
                    ok &= err <= 1e-6 * s;
                    notes.push(format!("f''(0) error {err:.1e}"));
                }
                notes.push(format!("k={k} alpha {}", p.alpha));
            }
            Err(e) => {
                ok = false;
                notes.push(format!("k={k}: {e}"));
            }
        }
    }
    (ok, notes.join(", "))
}

fn limit_cycle(s: f64) -> (bool, String) {
    let p = InterfaceOscillatorParams::new(1.0, 1.0).expect("valid");
    match find_limit_cycle(&p, &default_cycle_init(), &CycleConfig::default()) {
        Ok(lc) => (
            lc.sign_changing && lc.periodicity_residual <= 1e-5 * s,
            format!(
                "n = 1: period {:.6}, periodicity residual {:.1e}",
                lc.period, lc.periodicity_residual
            ),
        ),
        Err(e) => (false, e.to_string()),
    }
}

fn eigen_k0(s: f64) -> (bool, String) {
    let cfg = EigenConfig::default();
    let out: Vec<(f64, Result<_, _>)> = [0.1, 0.5, 1.0]
        .par_iter()
        .map(|&n| (n, solve_k0(n, &cfg, None)))
        .collect();
    let mut ok = true;
    let mut notes = Vec::new();
    for (n, r) in out {
        match r {
            Ok(p) => {
                ok &= p.alpha == 1.0 / (10.0 + n) && p.residual.flux_residual <= 1e-6 * s;
                notes.push(format!("n={n}: y0 {:.4}, flux {:.1e}", p.y0, p.residual.flux_residual));
            }
            Err(e) => {
                ok = false;
                notes.push(format!("n={n}: {e}"));
            }
        }
    }
    (ok, notes.join(", "))
}

fn cycle_amplitude(s: f64) -> (bool, String) {
    let run = |n: f64, f: CycleFormulation| {
        let p = InterfaceOscillatorParams::new(n, 1.0).expect("valid");
        let cfg = CycleConfig {
            formulation: f,
            ..CycleConfig::default()
        };
        find_limit_cycle(&p, &default_cycle_init(), &cfg)
    };
    let mut ok = true;
    let mut notes = Vec::new();
    match run(0.75, CycleFormulation::Auto) {
        Ok(lc) => {
            ok &= lc.sign_changing;
            notes.push(format!("n=0.75 sign-changing {}", lc.sign_changing));
        }
        Err(e) => {
            ok = false;
            notes.push(format!("n=0.75: {e}"));
        }
    }
    match run(0.5, CycleFormulation::Auto) {
        Ok(lc) => {
            ok &= (lc.log10_amplitude + 21.5).abs() <= 2.5 * s;
            notes.push(format!("n=0.5 log10 amplitude {:.2}", lc.log10_amplitude));
        }
        Err(e) => {
            ok = false;
            notes.push(format!("n=0.5: {e}"));
        }
    }
    match run(0.1, CycleFormulation::Truncated) {
        Ok(lc) => {
            ok &= (lc.log10_amplitude + 176.0).abs() <= 3.0 * s;
            notes.push(format!("n=0.1 log10 amplitude {:.2}", lc.log10_amplitude));
        }
        Err(e) => {
            ok = false;
            notes.push(format!("n=0.1: {e}"));
        }
    }
    (ok, notes.join(", "))
}

fn linear_limit(s: f64) -> (bool, String) {
    let cfg = BranchConfig::default();
    let out: Vec<_> = (1..4usize)
        .into_par_iter()
        .map(|k| (k, continue_branch(k, &[0.05], &cfg)))
        .collect();
    let mut ok = true;
    let mut notes = Vec::new();
    for (k, r) in out {
        match r {
            Ok(b) => {
                let a = b.points[0].alpha;
                let target = (1 + k) as f64 / 10.0;
                ok &= (a - target).abs() <= 5e-2 * s;
                notes.push(format!("k={k}: alpha(0.05) {a:.5}"));
            }
            Err(e) => {
                ok = false;
                notes.push(format!("k={k}: {e}"));
            }
        }
    }
    (ok, notes.join(", "))
}

fn heteroclinic(s: f64) -> (bool, String) {
    match locate_heteroclinic(1.0, (1.13, 1.25), 5e-3, &ClassifyConfig::default()) {
        Ok(h) => (
            (h.n_h - 1.157).abs() <= 5e-3 * s,
            format!("n_h = {:.5}, {} classifications", h.n_h, h.classifications.len()),
        ),
        Err(e) => (false, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let c = checks();
        let mut names: Vec<_> = c.iter().map(|c| c.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), c.len());
    }

    #[test]
    fn injection_fails_the_named_check() {
        for (name, f) in [("lambda-root", lambda_roots as CheckFn), ("kato-bound", kato_bound), ("eikonal", eikonal)] {
            assert!(f(1.0).0, "{name}");
            assert!(!f(f64::NAN).0, "{name}");
        }
    }

    #[test]
    fn unknown_injection_is_a_usage_error() {
        assert!(matches!(run_suite(Suite::Fast, Some("nope"), 1), Err(CliError::Usage(_))));
    }
}
