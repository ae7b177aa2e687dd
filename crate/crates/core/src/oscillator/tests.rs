use super::*;
use crate::odecore::{integrate, Direction, EventSpec, IntegratorConfig};
use proptest::prelude::*;
use std::f64::consts::PI;

fn params(n: f64) -> InterfaceOscillatorParams {
    InterfaceOscillatorParams::new(n, 1.0).unwrap()
}

fn product_oracle(mu: f64, x: f64) -> f64 {
    (0..9).map(|i| mu - i as f64 + x).product()
}

#[test]
fn coefficient_anchors() {
    for mu in [0.3, 4.0, 7.5, 9.0, 18.0, 90.0] {
        let a = euler_coefficients(mu).a;
        assert_eq!(a[0], 1.0);
        assert!((a[1] - 9.0 * (mu - 4.0)).abs() <= 1e-12 * mu.abs().max(1.0));
        let prod: f64 = (0..9).map(|i| mu - i as f64).product();
        assert!((a[9] - prod).abs() <= 1e-12 * prod.abs().max(1.0));
    }
    assert_eq!(euler_coefficients(4.0).a[1], 0.0);
}

#[test]
fn coefficients_at_mu_nine() {
    let a = euler_coefficients(9.0).a;
    assert_eq!(a[9], 362_880.0);
    let xs: Vec<f64> = (1..=9).map(f64::from).collect();
    let sum: f64 = xs.iter().sum();
    let sq: f64 = xs.iter().map(|x| x * x).sum();
    assert_eq!(a[2], (sum * sum - sq) / 2.0);
    assert_eq!(a[2], 870.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn coefficients_expand_the_product(mu in -20.0f64..100.0, x in -30.0f64..30.0) {
        let c = euler_coefficients(mu);
        let scale: f64 = c.a.iter().enumerate().map(|(k, a)| a.abs() * x.abs().powi(9 - k as i32)).sum();
        prop_assert!((c.eval(x) - product_oracle(mu, x)).abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn oscillation_rhs_is_odd(
        n in 0.05f64..1.3,
        state in proptest::collection::vec(-10.0f64..10.0, ORDER),
    ) {
        let p = eqlc_problem(&params(n));
        let neg: Vec<f64> = state.iter().map(|v| -v).collect();
        let a = p.rhs_vec(0.0, &state);
        let b = p.rhs_vec(0.0, &neg);
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn equilibrium_is_a_rest_point(n in 1.1251f64..1.2856, lambda0 in 0.1f64..10.0) {
        let p = InterfaceOscillatorParams::new(n, lambda0).unwrap();
        let eq = equilibrium(&p).unwrap();
        let prob = eqlc_problem(&p);
        for sign in [1.0, -1.0] {
            let dy = prob.rhs_vec(0.0, &eq.state(sign));
            let scale = lambda0 * eq.phi0.powf(1.0 - n);
            prop_assert!(dy.iter().all(|v| v.abs() <= 1e-10 * scale), "{:?}", dy);
        }
    }
}

#[test]
fn ninth_derivative_plug_in() {
    let p = eqlc_problem(&params(1.0));
    let mut y = vec![0.0; ORDER];
    y[0] = 1.0;
    let dy = p.rhs_vec(0.0, &y);
    let a9 = euler_coefficients(9.0).a[9];
    assert!((dy[8] - -(a9 + 1.0)).abs() < 1e-9);
    assert_eq!(dy[8], -362_881.0);
    assert!(dy[..8].iter().all(|v| *v == 0.0));
}

#[test]
fn equilibrium_at_n_1_2() {
    let p = params(1.2);
    let prod: f64 = (0..9).map(|i| 7.5 - i as f64).product();
    assert!((prod - -3959.0).abs() / 3959.0 < 1e-3);
    let eq = equilibrium(&p).unwrap();
    assert!((eq.phi0 - (1.0 / -prod).powf(1.0 / 1.2)).abs() < 1e-18);
    assert!((eq.phi0 - 1.0e-3).abs() < 1e-4, "{}", eq.phi0);
    let dy = eqlc_problem(&p).rhs_vec(0.0, &eq.state(1.0));
    assert!(dy[8].abs() < 1e-10, "{}", dy[8]);
}

#[test]
fn no_equilibrium_outside_window() {
    for n in [0.5, 1.0, 1.125, 1.3] {
        assert!(matches!(
            equilibrium(&params(n)),
            Err(OscillatorError::NoRealEquilibrium { .. })
        ));
    }
}

#[test]
fn invalid_params_rejected() {
    assert!(InterfaceOscillatorParams::new(0.0, 1.0).is_err());
    assert!(InterfaceOscillatorParams::new(1.0, -1.0).is_err());
    assert!(InterfaceOscillatorParams::with_reg_delta(1.0, 1.0, 0.0).is_err());
    assert_eq!(params(0.5).mu, 18.0);
}

#[test]
fn binomial_row() {
    assert_eq!(BINOMIAL_9, [1.0, 9.0, 36.0, 84.0, 126.0, 126.0, 84.0, 36.0, 9.0, 1.0]);
    let p = rescaled_problem(0.1, 1.0);
    let mut y = vec![0.0; ORDER];
    y[8] = 1.0;
    assert_eq!(p.rhs_vec(0.0, &y)[8], -9.0);
}

#[test]
fn normalized_coefficients_are_scaled_euler_coefficients() {
    for mu in [7.5, 9.0, 18.0] {
        let a = euler_coefficients(mu).a;
        let b = normalized_coefficients(mu);
        for k in 0..10 {
            let expect = a[k] / mu.powi(k as i32);
            assert!((b[k] - expect).abs() <= 1e-13 * expect.abs().max(1e-3), "μ={mu} k={k}");
        }
    }
    // binomial weights emerge as μ → ∞
    let b = normalized_coefficients(1e9);
    for k in 0..10 {
        assert!((b[k] - BINOMIAL_9[k]).abs() < 1e-6 * BINOMIAL_9[k]);
    }
}

#[test]
fn linear_modes() {
    let m = linear_limit_modes(1.0);
    assert!((m.decay_rate - ((PI / 9.0).cos() - 1.0)).abs() < 1e-15);
    assert!((m.decay_rate - -0.06031).abs() < 1e-5);
    assert!((m.frequency - 0.34202).abs() < 1e-5);
    for lambda0 in [1.0, 3.7, 512.0] {
        let m = linear_limit_modes(lambda0);
        assert_eq!(m.roots.len(), 9);
        for nu in &m.roots {
            assert!(((nu + 1.0).powu(9) + lambda0).norm() < 1e-12 * lambda0.max(1.0));
        }
    }
    for nu in linear_limit_modes(512.0).roots {
        assert!(((nu + 1.0).norm() - 2.0).abs() < 1e-14);
    }
}

#[test]
fn log10_amplitude_map() {
    assert!((log10_phi_amplitude(0.1, 1.0) - 90.0 * (0.1f64 / 9.0).log10()).abs() < 1e-12);
    assert!((log10_phi_amplitude(0.1, 1.0) - -175.8).abs() < 0.1);
    assert!((log10_phi_amplitude(0.5, 1.0) - -22.6).abs() < 0.1);
}

fn cycle(n: f64, formulation: CycleFormulation) -> LimitCycle {
    let cfg = CycleConfig {
        formulation,
        ..CycleConfig::default()
    };
    find_limit_cycle(&params(n), &default_cycle_init(), &cfg).unwrap()
}

#[test]
fn cycle_at_n_one_is_sign_changing_and_periodic() {
    let c = cycle(1.0, CycleFormulation::Auto);
    assert!(c.sign_changing);
    assert!(c.periodicity_residual <= 10.0 * 1e-6, "{}", c.periodicity_residual);
    assert!(c.poincare_residual <= 1e-5);
    assert!(c.period > 0.0 && c.eta.len() == 256);
    assert!(c.eta.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn amplitude_scaling_window() {
    for n in [0.5, 0.75, 1.0] {
        let c = cycle(n, CycleFormulation::Auto);
        assert!(c.sign_changing);
        let excess = c.log10_amplitude - (9.0 / n) * (n / 9.0).log10();
        assert!(excess.abs() <= 3.0, "n={n}: {excess}");
        if n == 0.5 {
            assert!((-24.0..=-19.0).contains(&c.log10_amplitude), "{}", c.log10_amplitude);
        }
    }
}

#[test]
fn normalization_is_an_exact_change_of_variables() {
    let direct = cycle(0.5, CycleFormulation::Original);
    let scaled = cycle(0.5, CycleFormulation::Normalized);
    assert!((direct.period - scaled.period).abs() <= 1e-8 * direct.period);
    assert!((direct.log10_amplitude - scaled.log10_amplitude).abs() <= 1e-8);
}

/// The binomial system drops O(n) terms, so its period differs from the
/// full equation's by an amount that halves with `n`.
#[test]
fn truncated_system_period_gap_is_first_order() {
    let gap = |n: f64| {
        let full = cycle(n, CycleFormulation::Normalized).period;
        let trunc = cycle(n, CycleFormulation::Truncated).period;
        (full - trunc).abs() / full
    };
    let (g1, g2) = (gap(0.1), gap(0.05));
    let ratio = g2 / g1;
    assert!((0.4..0.6).contains(&ratio), "gaps {g1} {g2}");
    assert!(g2 < 0.03);
}

#[test]
fn small_n_cycle_amplitude() {
    let c = cycle(0.1, CycleFormulation::Auto);
    assert_eq!(c.formulation, CycleFormulation::Truncated);
    assert!(c.sign_changing);
    assert!((c.log10_amplitude - -176.0).abs() <= 3.0, "{}", c.log10_amplitude);
    assert!(c.phi().iter().all(|v| *v == 0.0 || v.abs() < 1e-170));
}

#[test]
fn no_cycle_beyond_bifurcation() {
    let err = find_limit_cycle(&params(1.3), &default_cycle_init(), &CycleConfig::default()).unwrap_err();
    assert!(matches!(
        err,
        OscillatorError::NoConvergence { .. } | OscillatorError::EscapedToEquilibrium { .. }
    ));
}

#[test]
fn section_returns_are_one_period_apart() {
    let c = cycle(0.75, CycleFormulation::Original);
    let form = cycle::Formulated::new(&params(0.75), CycleFormulation::Original).unwrap();
    // state on the section, recovered from the dense samples' start
    let cfg = CycleConfig::default();
    let integ = form.integrator(&cfg.integrator);
    let run = cycle::run(&form, &form.from_psi_state(&default_cycle_init()), &cfg, true);
    let start = run.log.states.last().unwrap().clone();
    let ev = EventSpec::new("section", |_, y| y[0]).direction(Direction::Rising);
    let traj = integrate(&form.problem, (0.0, 3.5 * c.period), &start, &integ, &[ev]).unwrap();
    let times: Vec<f64> = traj.events.iter().map(|e| e.t).collect();
    assert!(times.len() >= 3);
    for w in times.windows(2) {
        assert!(((w[1] - w[0]) - c.period).abs() <= 1e-6 * c.period);
    }
}

#[test]
fn invalid_initial_state() {
    let cfg = CycleConfig::default();
    assert!(find_limit_cycle(&params(1.0), &[1.0; 3], &cfg).is_err());
    let mut bad = default_cycle_init();
    bad[2] = f64::NAN;
    assert!(find_limit_cycle(&params(1.0), &bad, &cfg).is_err());
    let tight = IntegratorConfig::with_tolerances(1e-12, 1e-12);
    assert_eq!(cfg.integrator.rel_tol, tight.rel_tol);
}

#[test]
fn unstable_direction_two_routes_agree() {
    for n in [1.13, 1.16, 1.25] {
        let m = unstable_direction(&params(n)).unwrap();
        assert!(m.rate > 0.0);
        assert!((m.rate - m.jacobian_rate).abs() <= 1e-6 * m.rate.max(1e-2), "{m:?}");
        // the rate in η is a root of P(ν) = (1 - n) a_9
        let c = euler_coefficients(9.0 / n);
        let resid = c.eval(m.rate) - (1.0 - n) * c.a[9];
        assert!(resid.abs() <= 1e-8 * c.a[9].abs());
    }
}

#[test]
fn classification_on_both_sides() {
    let cfg = ClassifyConfig::default();
    assert_eq!(
        classify_trajectory(&params(1.13), &cfg).unwrap(),
        TrajectoryClass::ConvergesToCycle
    );
    assert_eq!(
        classify_trajectory(&params(1.25), &cfg).unwrap(),
        TrajectoryClass::HeteroclinicToOpposite
    );
    assert!(classify_trajectory(&params(1.0), &cfg).is_err());
    let zero = ClassifyConfig {
        perturbation: 0.0,
        ..ClassifyConfig::default()
    };
    assert!(classify_trajectory(&params(1.2), &zero).is_err());
}

#[test]
fn classification_respects_mirror_symmetry() {
    for n in [1.14, 1.2] {
        let up = trace_from_equilibrium(&params(n), &ClassifyConfig::default()).unwrap();
        let mirrored = ClassifyConfig {
            start_sign: -1.0,
            ..ClassifyConfig::default()
        };
        let down = trace_from_equilibrium(&params(n), &mirrored).unwrap();
        assert_eq!(up.class, down.class);
        assert!((up.min_dist_opposite - down.min_dist_opposite).abs() < 1e-6);
    }
}

#[test]
fn inconsistent_bracket() {
    let err = locate_heteroclinic(1.0, (1.2, 1.25), 5e-3, &ClassifyConfig::default()).unwrap_err();
    assert!(matches!(
        err,
        OscillatorError::InconsistentBracket {
            outcome: TrajectoryClass::HeteroclinicToOpposite,
            ..
        }
    ));
}

#[test]
fn heteroclinic_point_by_bisection() {
    let res = locate_heteroclinic(1.0, (9.0 / 8.0 + 1e-3, 9.0 / 7.0 - 1e-3), 5e-3, &ClassifyConfig::default()).unwrap();
    assert!(res.bracket.1 - res.bracket.0 <= 5e-3);
    assert!((res.n_h - 1.157).abs() <= 5e-3, "{res:?}");
    for (n, c) in &res.classifications {
        let expect = if *n < res.n_h {
            TrajectoryClass::ConvergesToCycle
        } else {
            TrajectoryClass::HeteroclinicToOpposite
        };
        assert_eq!(*c, expect, "n = {n}");
    }
}
