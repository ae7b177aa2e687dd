use serde_json::json;
use tfe10_core::odecore::AbsTol;
use tfe10_core::oscillator::{
    default_cycle_init, find_limit_cycle, locate_heteroclinic, ClassifyConfig, CycleFormulation, TrajectoryClass,
};
use tfe10_core::{CycleConfig, InterfaceOscillatorParams, OscillatorError};

use crate::args::{CycleArgs, Formulation, HeteroclinicArgs};
use crate::config::Overrides;
use crate::output::{OutputTable, Run};
use crate::svg::{line_plot, Series};
use crate::CliError;

/// Reference location of the heteroclinic bifurcation for `λ0 = 1`.
pub const N_H_REFERENCE: f64 = 1.1572339;

/// Smallest bisection width accepted by `heteroclinic`.
pub const HETEROCLINIC_TOL_FLOOR: f64 = 1e-5;

fn formulation(f: Formulation) -> CycleFormulation {
    match f {
        Formulation::Auto => CycleFormulation::Auto,
        Formulation::Original => CycleFormulation::Original,
        Formulation::Normalized => CycleFormulation::Normalized,
        Formulation::Truncated => CycleFormulation::Truncated,
    }
}

fn parse_formulation(s: &str) -> Result<CycleFormulation, CliError> {
    match s {
        "auto" => Ok(CycleFormulation::Auto),
        "original" => Ok(CycleFormulation::Original),
        "normalized" => Ok(CycleFormulation::Normalized),
        "truncated" => Ok(CycleFormulation::Truncated),
        _ => Err(CliError::Usage(format!("unknown formulation {s:?}"))),
    }
}

/// Applies the cycle keys of a config file to `c`.
fn cycle_overrides(ov: &mut Overrides, c: &mut CycleConfig, delta: &mut f64) -> Result<(), CliError> {
    ov.f64("rel_tol", &mut c.integrator.rel_tol)?;
    let mut abs = f64::NAN;
    ov.f64("abs_tol", &mut abs)?;
    if !abs.is_nan() {
        c.integrator.abs_tol = AbsTol::Scalar(abs);
    }
    ov.usize("max_steps", &mut c.integrator.max_steps)?;
    ov.f64("cycle_tol", &mut c.cycle_tol)?;
    ov.usize("consecutive", &mut c.consecutive)?;
    ov.usize("transient_returns", &mut c.transient_returns)?;
    ov.f64("max_eta", &mut c.max_eta)?;
    ov.usize("samples_per_period", &mut c.samples_per_period)?;
    ov.f64("r_eq", &mut c.r_eq)?;
    ov.f64("dwell", &mut c.dwell)?;
    ov.f64("blowup", &mut c.blowup)?;
    ov.f64("reg_delta", delta)?;
    let mut f = String::new();
    ov.string("formulation", &mut f)?;
    if !f.is_empty() {
        c.formulation = parse_formulation(&f)?;
    }
    Ok(())
}

fn check_cycle_config(c: &CycleConfig) -> Result<(), CliError> {
    c.integrator
        .validate(tfe10_core::oscillator::ORDER)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if !(c.cycle_tol > 0.0) || !(c.max_eta > 0.0) || c.consecutive == 0 {
        return Err(CliError::Usage("need cycle_tol > 0, max_eta > 0 and consecutive ≥ 1".into()));
    }
    Ok(())
}

fn params(n: f64, lambda0: f64, delta: f64) -> Result<InterfaceOscillatorParams, CliError> {
    InterfaceOscillatorParams::with_reg_delta(n, lambda0, delta).map_err(|e| CliError::Usage(e.to_string()))
}

pub fn cycle(a: CycleArgs) -> Result<(), CliError> {
    let mut ov = Overrides::load(a.output.config.as_deref())?;
    let mut cfg = CycleConfig::default();
    let mut delta = InterfaceOscillatorParams::DEFAULT_REG_DELTA;
    cycle_overrides(&mut ov, &mut cfg, &mut delta)?;
    ov.finish()?;
    if let Some(f) = a.formulation {
        cfg.formulation = formulation(f);
    }
    if let Some(r) = a.rtol {
        cfg.integrator.rel_tol = r;
    }
    if let Some(t) = a.cycle_tol {
        cfg.cycle_tol = t;
    }
    if let Some(m) = a.max_eta {
        cfg.max_eta = m;
    }
    check_cycle_config(&cfg)?;
    let p = params(a.n, a.lambda0, delta)?;

    let run_params = json!({ "n": a.n, "lambda0": a.lambda0, "rescaled": a.rescaled, "reg_delta": delta });
    let mut run = Run::start("cycle", run_params, serde_json::to_value(&cfg)?, a.output.out.as_deref())?;
    if a.n > N_H_REFERENCE {
        run.warn(format!("n = {} lies beyond n_h ≈ {N_H_REFERENCE}", a.n));
    }
    let lc = match find_limit_cycle(&p, &default_cycle_init(), &cfg) {
        Ok(lc) => lc,
        Err(e) => {
            let outcome = if a.n > N_H_REFERENCE {
                "beyond n_h".to_string()
            } else {
                match &e {
                    OscillatorError::NoConvergence { .. } => "no convergence".into(),
                    OscillatorError::EscapedToEquilibrium { .. } => "escaped to equilibrium".into(),
                    other => other.to_string(),
                }
            };
            run.finish(&outcome, json!({ "error": e.to_string() }))?;
            return Err(CliError::Numerical(format!("{outcome}: {e}")));
        }
    };
    if lc.rel_tol > cfg.integrator.rel_tol {
        run.warn(format!(
            "integrator tolerance relaxed from {:e} to {:e}",
            cfg.integrator.rel_tol, lc.rel_tol
        ));
    }
    let (columns, xs, ys, kind): (&[&'static str], Vec<f64>, Vec<f64>, &str) = if a.rescaled {
        (&["s", "psi"], lc.eta.iter().map(|e| e * p.mu).collect(), lc.psi.clone(), "cycle-psi")
    } else {
        let phi = lc.phi();
        if phi.iter().all(|&v| v == 0.0) {
            run.warn("phi underflows in double precision; use --rescaled");
        }
        (&["eta", "phi"], lc.eta.clone(), phi, "cycle-phi")
    };
    let mut t = OutputTable::new("cycle", columns);
    for (x, y) in xs.iter().zip(&ys) {
        t.push(&[*x, *y])?;
    }
    let path = run.write_table(kind, &t)?;
    if a.output.svg {
        let pts = xs.iter().copied().zip(ys.iter().copied()).collect();
        let svg = line_plot(
            &format!("Limit cycle, n = {}", a.n),
            columns[0],
            columns[1],
            &[Series::new(format!("n={}", a.n), pts)],
        );
        run.write_svg(kind, &svg)?;
    }
    println!(
        "n = {}: period {} (in eta), log10 amplitude {}",
        a.n, lc.period, lc.log10_amplitude
    );
    let results = json!({
        "formulation": lc.formulation,
        "period": lc.period,
        "period_internal": lc.period_internal,
        "log10_amplitude": lc.log10_amplitude,
        "log10_phi_scale": lc.log10_phi_scale,
        "amplitude_psi": lc.amplitude_psi,
        "poincare_residual": lc.poincare_residual,
        "periodicity_residual": lc.periodicity_residual,
        "returns": lc.returns,
        "rel_tol": lc.rel_tol,
        "eta_converged": lc.eta_converged,
        "sign_changing": lc.sign_changing,
        "output": path.file_name().map(|f| f.to_string_lossy().into_owned()),
    });
    run.finish("converged", results)?;
    Ok(())
}

pub fn class_label(c: TrajectoryClass) -> &'static str {
    match c {
        TrajectoryClass::ConvergesToCycle => "converges_to_cycle",
        TrajectoryClass::HeteroclinicToOpposite => "heteroclinic_to_opposite",
        TrajectoryClass::Undecided => "undecided",
    }
}

pub fn heteroclinic(a: HeteroclinicArgs) -> Result<(), CliError> {
    if !(a.tol >= HETEROCLINIC_TOL_FLOOR) {
        return Err(CliError::Usage(format!(
            "tol must be at least {HETEROCLINIC_TOL_FLOOR:e}, got {}",
            a.tol
        )));
    }
    if !(a.low < a.high) {
        return Err(CliError::Usage(format!("need low < high, got {} and {}", a.low, a.high)));
    }
    let mut ov = Overrides::load(a.output.config.as_deref())?;
    let mut cfg = ClassifyConfig::default();
    let mut delta = InterfaceOscillatorParams::DEFAULT_REG_DELTA;
    cycle_overrides(&mut ov, &mut cfg.cycle, &mut delta)?;
    ov.f64("perturbation", &mut cfg.perturbation)?;
    ov.finish()?;
    if delta != InterfaceOscillatorParams::DEFAULT_REG_DELTA {
        return Err(CliError::Usage("reg_delta is fixed for the heteroclinic search".into()));
    }
    if let Some(r) = a.rtol {
        cfg.cycle.integrator.rel_tol = r;
    }
    check_cycle_config(&cfg.cycle)?;
    params(a.low, a.lambda0, delta)?;

    let run_params = json!({ "lambda0": a.lambda0, "tol": a.tol, "bracket": [a.low, a.high] });
    let mut run = Run::start("heteroclinic", run_params, serde_json::to_value(&cfg)?, a.output.out.as_deref())?;
    match locate_heteroclinic(a.lambda0, (a.low, a.high), a.tol, &cfg) {
        Ok(h) => {
            let mut t = OutputTable::new("classification", &["n", "outcome"]);
            for &(n, c) in &h.classifications {
                t.push_text(vec![crate::output::fmt_num(n), class_label(c).into()])?;
            }
            let path = run.write_table("classification", &t)?;
            for &(n, r) in &h.relaxed {
                run.warn(format!("n = {n}: integrator tolerance relaxed to {r:e}"));
            }
            println!("n_h = {} (bracket [{}, {}])", h.n_h, h.bracket.0, h.bracket.1);
            run.finish(
                "ok",
                json!({
                    "n_h": h.n_h,
                    "bracket": [h.bracket.0, h.bracket.1],
                    "classifications": h.classifications.len(),
                    "relaxed": h.relaxed,
                    "output": path.file_name().map(|f| f.to_string_lossy().into_owned()),
                }),
            )?;
            Ok(())
        }
        Err(e) => {
            let outcome = match &e {
                OscillatorError::InconsistentBracket { .. } => "inconsistent bracket",
                OscillatorError::UndecidedRegion { .. } => "undecided region",
                _ => "failure",
            };
            run.finish(outcome, json!({ "error": e.to_string() }))?;
            Err(CliError::Numerical(format!("{outcome}: {e}")))
        }
    }
}
