use proptest::prelude::*;
use statrs::function::gamma::gamma;

use super::shooting::decay_rows;
use super::*;

/// `F(y) = (1/π) ∫_0^∞ cos(ωy) e^(-ω¹⁰) dω` by composite Simpson; the
/// integrand is below 1e-300 beyond ω = 2.
fn fourier_kernel(y: f64) -> f64 {
    let m = 20_000;
    let h = 2.0 / m as f64;
    let g = |w: f64| (w * y).cos() * (-w.powi(10)).exp();
    let mut s = g(0.0) + g(2.0);
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
    }
    s * h / 3.0 / std::f64::consts::PI
}

/// `F^(2j)(0) / F(0) = (-1)^j Γ((2j+1)/10) / Γ(1/10)`.
fn even_ratio(j: i32) -> f64 {
    (-1f64).powi(j) * gamma((2 * j + 1) as f64 / 10.0) / gamma(0.1)
}

#[test]
fn rhs_linear_k0() {
    let mut s = [0.0; 9];
    s[0] = 0.7;
    let v = profile_rhs(3.0, &s, 0.0, 0.1, 1e-10).unwrap();
    assert_eq!(v, -0.1 * 3.0 * 0.7);
    assert_eq!(profile_rhs(3.0, &[0.0; 9], 0.5, 0.1, 1e-10).unwrap(), 0.0);
    assert_eq!(profile_rhs(3.0, &[0.0; 10], 0.5, 0.1, 1e-10).unwrap(), 0.0);
}

#[test]
fn rhs_expanded_matches_divergence_form() {
    let (n, alpha, delta) = (1.0, 1.0 / 11.0, 1e-12);
    let beta = (1.0 - alpha * n) / 10.0;
    let mut s = [0.0; 10];
    s[0] = 2.0;
    s[1] = 1.0;
    s[9] = 3.0;
    let expanded = profile_rhs(1.0, &s, n, alpha, delta).unwrap();
    let closed = -(1.0 * 1.0 * 3.0 + (1.0 - 1.0 / 11.0) / 10.0 + 2.0 / 11.0) / 2.0;
    assert!((expanded - closed).abs() < 1e-12);

    // f(y) = 2 + (y-1) + 3(y-1)⁹/9! + d(y-1)¹⁰/10!; pick d so that the
    // un-expanded (m f⁽⁹⁾)' + β y f' + α f vanishes at y = 1
    let g = |d: f64| {
        let flux = |y: f64| {
            let x = y - 1.0;
            let f = 2.0 + x + 3.0 * x.powi(9) / 362_880.0 + d * x.powi(10) / 3_628_800.0;
            mobility(f, n, delta) * (3.0 + d * x)
        };
        let h = 1e-4;
        (flux(1.0 + h) - flux(1.0 - h)) / (2.0 * h) + beta * 1.0 + alpha * 2.0
    };
    let (g0, g1) = (g(0.0), g(1.0));
    let d = -g0 / (g1 - g0);
    assert!((d - expanded).abs() < 1e-6, "{d} vs {expanded}");
}

#[test]
fn mobility_underflow_is_reported() {
    let err = profile_rhs(1.0, &[0.0; 9], 2.0, 0.1, 1e-200).unwrap_err();
    assert!(matches!(err, EigenError::MobilityUnderflow { .. }));
}

#[test]
fn similarity_constants() {
    let t = SimilarityTransform::mass_conserving(0.5, 1);
    assert!((t.beta - 1.0 / 10.5).abs() < 1e-16);
    assert_eq!(t.alpha, alpha0(0.5));
    let e = epsilon_schedule(0.04);
    assert!((e.epsilon - (-5f64).exp()).abs() < 1e-16 && (e.product - 0.2).abs() < 1e-15);
    let e = epsilon_schedule(1.0);
    assert!((e.epsilon - (-1f64).exp()).abs() < 1e-16 && e.product == 1.0);
}

proptest! {
    #[test]
    fn k0_beta_equals_alpha(n in 0.0f64..1.5) {
        let t = SimilarityTransform::new(n, alpha0(n), 1);
        prop_assert!((t.beta - 1.0 / (10.0 + n)).abs() < 1e-16);
        prop_assert_eq!(alpha_predictor(n, 0), alpha0(n));
        prop_assert_eq!(SimilarityTransform::mass_conserving(n, 1).alpha, alpha0(n));
    }

    #[test]
    fn epsilon_product_is_monotone(a in 1e-4f64..1.0, b in 1e-4f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(epsilon_schedule(lo).product <= epsilon_schedule(hi).product);
        let e = epsilon_schedule(a);
        prop_assert!((a * e.epsilon.ln().abs() - e.product).abs() < 1e-12);
    }
}

#[test]
fn four_growing_modes() {
    for (dim, alpha) in [(9, 0.1), (10, 0.2), (10, 0.4)] {
        let (rows, roots) = decay_rows(dim, alpha, 160.0).unwrap();
        assert_eq!(rows.nrows(), 4);
        assert_eq!(roots.iter().filter(|r| r.re > 0.0).count(), 4);
    }
}

fn linear(k: usize) -> SimilarityProfile {
    solve_linear_n0(k, 160.0, &EigenConfig::default()).unwrap()
}

#[test]
fn linear_k0_matches_gamma_oracle() {
    let p = linear(0);
    assert_eq!(p.alpha, 0.1);
    for j in 1..=4 {
        let want = even_ratio(j);
        assert!((p.shooting.free[j as usize - 1] - want).abs() < 1e-8 * want.abs(), "j = {j}");
    }
    assert!((p.shooting.free[0] + 0.314_454_887).abs() < 1e-9);
    assert!(p.residual.interface_residual < 1e-10);
    let f0 = fourier_kernel(0.0);
    for (i, &y) in p.grid.iter().enumerate().step_by(97).take_while(|(_, &y)| y < 30.0) {
        let want = fourier_kernel(y) / f0;
        assert!((p.f[i] - want).abs() < 1e-8, "y = {y}: {} vs {want}", p.f[i]);
    }
}

#[test]
fn linear_odd_mode_is_the_kernel_derivative() {
    // f_1 = F'/F''(0): f‴(0) = F⁗(0)/F″(0), flux f⁽⁹⁾(0) = -F(0)/(10 F″(0))
    let p = linear(1);
    assert_eq!(p.alpha, 0.2);
    assert_eq!(p.f[0], 0.0);
    assert_eq!(p.derivatives[0][0], 1.0);
    let r2 = even_ratio(1);
    assert!((p.shooting.free[0] - even_ratio(2) / r2).abs() < 1e-8);
    assert!((p.shooting.free[1] - even_ratio(3) / r2).abs() < 1e-8);
    assert!((p.shooting.free[2] - even_ratio(4) / r2).abs() < 1e-8);
    assert!((p.shooting.free[3] + 1.0 / (10.0 * r2)).abs() < 1e-8);
    assert_eq!(total_mass(&p), 0.0);
}

#[test]
fn linear_alphas_and_decay() {
    for k in 0..4 {
        let p = linear(k);
        assert!((p.alpha - (1 + k) as f64 / 10.0).abs() < 1e-15);
        assert!(p.f.last().unwrap().abs() < 1e-10);
        assert!(p.sign_changes(1e-12) >= 3);
        assert!(p.residual.ode_residual < 1e-6, "k = {k}: {}", p.residual.ode_residual);
    }
}

#[test]
fn linear_domain_too_short() {
    let err = solve_linear_n0(0, 60.0, &EigenConfig::default()).unwrap_err();
    assert!(matches!(err, EigenError::DomainTooShort(_)));
}

fn zeros(p: &SimilarityProfile, count: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 1..p.f.len() {
        if p.f[i - 1].signum() != p.f[i].signum() {
            let w = p.f[i - 1] / (p.f[i - 1] - p.f[i]);
            out.push(p.grid[i - 1] + w * (p.grid[i] - p.grid[i - 1]));
            if out.len() == count {
                break;
            }
        }
    }
    out
}

#[test]
fn linear_zeros_agree_across_tolerances() {
    let tight = linear(0);
    let loose = solve_linear_n0(
        0,
        160.0,
        &EigenConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            ..EigenConfig::default()
        },
    )
    .unwrap();
    let (a, b) = (zeros(&tight, 3), zeros(&loose, 3));
    assert_eq!(a.len(), 3);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-6);
    }
}

#[test]
fn mass_quadrature() {
    let mut p = linear(0);
    let (m, rel) = mass_with_check(&p);
    assert!(rel < 1e-8, "{rel}");
    assert!((total_mass(&p) - 2.0 * m).abs() < 1e-15);
    // ∫_0^∞ F = 1/2 for the kernel, so f = F/F(0) has half-mass 1/(2F(0))
    assert!((m - 0.5 / fourier_kernel(0.0)).abs() < 1e-7, "{m}");
    p.f.iter_mut().for_each(|v| *v = 0.0);
    assert_eq!(mass(&p), 0.0);
}

#[test]
fn eval_extends_by_parity_and_zero() {
    let p = linear(1);
    assert_eq!(p.eval(p.y0 + 1.0), 0.0);
    assert_eq!(p.eval(-2.0), -p.eval(2.0));
    let q = linear(0);
    assert_eq!(q.eval(-2.0), q.eval(2.0));
}

/// Reference `k = 0` solve at `n = 0.5` from a 50-unit interval.
fn reference_k0(delta: f64, warm: Option<&ShootingState>) -> SimilarityProfile {
    let config = EigenConfig {
        reg_delta: delta,
        y0_guess: Some(50.0),
        ..EigenConfig::default()
    };
    solve_k0(0.5, &config, warm).unwrap()
}

#[test]
fn nonlinear_k0_at_half() {
    let p = reference_k0(DEFAULT_REG_DELTA, None);
    assert_eq!(p.alpha, 1.0 / 10.5);
    assert!(p.residual.newton_residual <= 1e-8);
    assert!(p.residual.newton_iterations <= 30);
    assert!(p.residual.interface_residual <= 1e-8);
    assert!(p.residual.flux_residual <= 1e-6, "{}", p.residual.flux_residual);
    assert!(p.residual.ode_residual <= 1e-6, "{}", p.residual.ode_residual);
    assert!(p.sign_changes(1e-12) >= 3);
    assert!(mass_with_check(&p).1 < 1e-8);
    assert!((p.transform().beta - 1.0 / 10.5).abs() < 1e-16);

    // warm re-solve with half the regularisation
    let q = reference_k0(0.5 * DEFAULT_REG_DELTA, Some(&p.shooting));
    assert!(((q.y0 - p.y0) / p.y0).abs() < 1e-6, "{} vs {}", q.y0, p.y0);
    assert_eq!(q.alpha, p.alpha);
}

#[test]
fn nonlinear_k1_near_linear_limit() {
    let config = EigenConfig {
        y0_guess: Some(50.0),
        ..EigenConfig::default()
    };
    let p = solve_k(0.05, 1, &config, None).unwrap();
    assert_eq!(p.f[0], 0.0);
    assert_eq!(p.derivatives[0][0], 1.0);
    assert!((p.alpha - alpha_predictor(0.05, 1)).abs() < 5e-2);
    assert!(p.sign_changes(1e-12) >= 1);
    assert!(p.residual.interface_residual <= 1e-8);
    let f9 = p.shooting.ninth_derivative_at_centre(0.05, config.reg_delta);
    assert!((f9 * DEFAULT_REG_DELTA.powf(0.05) - p.shooting.free[3]).abs() < 1e-15);
}

#[test]
fn solve_k_rejects_k0() {
    assert!(matches!(
        solve_k(0.5, 0, &EigenConfig::default(), None),
        Err(EigenError::InvalidSpec(_))
    ));
    let mut spec = EigenProblemSpec::new(2.0, 0);
    assert!(spec.validate().is_err());
    spec.n = 0.5;
    spec.config.reg_delta = 0.0;
    assert!(spec.validate().is_err());
}

#[test]
fn branch_rejects_unordered_grid() {
    assert!(matches!(
        continue_branch(0, &[0.2, 0.1], &BranchConfig::default()),
        Err(EigenError::InvalidSpec(_))
    ));
}

#[test]
fn branch_starting_at_zero_is_the_linear_point() {
    let b = continue_branch(2, &[0.0], &BranchConfig::default()).unwrap();
    assert_eq!(b.points.len(), 1);
    assert_eq!((b.points[0].n, b.points[0].alpha), (0.0, 0.3));
    assert!(b.log[0].accepted);
}
