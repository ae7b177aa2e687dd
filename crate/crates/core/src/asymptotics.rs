//! Closed-form small-`n` asymptotics: WKBJ phases and envelopes, interface
//! laws, the Hamilton–Jacobi potential, the characteristic root
//! `λ = tan(4π/9)`, the linear spectra with the eigenvalue predictor, and the
//! operator-difference bound between `B_n` and `B`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `θ = 4π/9`.
pub const THETA: f64 = 4.0 * PI / 9.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticsError {
    #[error("outside the validity region: {0}")]
    OutOfValidity(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub fn sec_theta() -> f64 {
    1.0 / THETA.cos()
}

/// Evaluates `Σ c_i x^(d-i)` and the largest monomial `max |c_i x^(d-i)|`.
fn poly_with_scale(coeffs: &[f64], x: f64) -> (f64, f64) {
    let d = coeffs.len() - 1;
    let value = coeffs.iter().fold(0.0, |acc, &c| acc * x + c);
    let scale = coeffs
        .iter()
        .enumerate()
        .map(|(i, &c)| (c * x.powi((d - i) as i32)).abs())
        .fold(0.0, f64::max);
    (value, scale)
}

/// Sextic factor `λ⁶ - 33λ⁴ + 27λ² - 3`.
pub const SEXTIC: [f64; 7] = [1.0, 0.0, -33.0, 0.0, 27.0, 0.0, -3.0];
/// `(λ² + 1)(λ² - 3)(λ⁶ - 33λ⁴ + 27λ² - 3)` expanded.
pub const DECIC: [f64; 11] = [1.0, 0.0, -35.0, 0.0, 90.0, 0.0, 42.0, 0.0, -75.0, 0.0, 9.0];

/// Relative residual of a polynomial at `x` (value over largest monomial).
pub fn relative_residual(coeffs: &[f64], x: f64) -> f64 {
    let (v, s) = poly_with_scale(coeffs, x);
    if s == 0.0 {
        v.abs()
    } else {
        v.abs() / s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaRoot {
    pub lambda: f64,
    pub sextic_residual: f64,
    pub decic_residual: f64,
}

/// The characteristic root `λ = tan(4π/9)` with its residuals in the sextic
/// factor and the full degree-10 polynomial.
///
/// `√3` also zeroes the degree-10 polynomial (through `λ² - 3`) but not the
/// sextic; the root selected is the one from the sextic factor.
pub fn lambda_root() -> LambdaRoot {
    let lambda = THETA.tan();
    LambdaRoot {
        lambda,
        sextic_residual: relative_residual(&SEXTIC, lambda),
        decic_residual: relative_residual(&DECIC, lambda),
    }
}

/// Small-`n` similarity free boundary `y0 ~ 10 (sec(4π/9)/n)^(9/10)`.
pub fn interface_similarity(n: f64) -> f64 {
    10.0 * (sec_theta() / n).powf(0.9)
}

/// Small-`n` interface position `x0(t) ~ y0(n) t^(1/10)`.
pub fn interface_position(n: f64, t: f64) -> f64 {
    interface_similarity(n) * t.powf(0.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexPhase {
    pub value: Complex64,
    pub derivative: Complex64,
}

/// `φ±(y) = (9/10^(10/9)) e^(±4πi/9) y^(10/9)` and its derivative, which
/// satisfies `10 (φ′)⁹ = y`.
pub fn wkbj_eigen_phase(y: f64, sign: f64) -> ComplexPhase {
    let rot = Complex64::from_polar(1.0, sign.signum() * THETA);
    let c = 9.0 / 10f64.powf(10.0 / 9.0);
    ComplexPhase {
        value: rot * (c * y.powf(10.0 / 9.0)),
        derivative: rot * (y / 10.0).powf(1.0 / 9.0),
    }
}

/// Real far-field combination of the two conjugate WKBJ branches,
/// `2|k| y^(5(2α-1)/9) e^(-Re φ) cos(Im φ + arg k)` with `k = k₊ = conj(k₋)`.
pub fn farfield_envelope(y: f64, alpha: f64, k: Complex64) -> f64 {
    let phi = wkbj_eigen_phase(y, 1.0).value;
    2.0 * k.norm() * y.powf(envelope_exponent(alpha)) * (-phi.re).exp() * (phi.im + k.arg()).cos()
}

/// `5(2α - 1)/9`.
pub fn envelope_exponent(alpha: f64) -> f64 {
    5.0 * (2.0 * alpha - 1.0) / 9.0
}

/// `ln` of the envelope magnitude `y^(5(2α-1)/9) e^(-Re φ)`.
pub fn log_envelope(y: f64, alpha: f64) -> f64 {
    envelope_exponent(alpha) * y.ln() - wkbj_eigen_phase(y, 1.0).value.re
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HJPotential {
    pub x: f64,
    pub t: f64,
    pub phi: f64,
    pub valid: bool,
}

fn hj_argument(x: f64, t: f64) -> f64 {
    1.0 - THETA.cos() * (x.abs().powi(10) / (1e10 * t)).powf(1.0 / 9.0)
}

/// `Φ(X, t) = -9 ln(1 - cos(4π/9) (X¹⁰/(10¹⁰ t))^(1/9))`.
pub fn hj_potential(x: f64, t: f64) -> Result<HJPotential, AsymptoticsError> {
    if !(t > 0.0) {
        return Err(AsymptoticsError::InvalidArgument(format!("t must be positive, got {t}")));
    }
    let arg = hj_argument(x, t);
    if !(arg > 0.0) {
        return Err(AsymptoticsError::OutOfValidity(format!("log argument {arg} at X = {x}, t = {t}")));
    }
    Ok(HJPotential {
        x,
        t,
        phi: -9.0 * arg.ln(),
        valid: true,
    })
}

/// Edge of the validity region, `X* = 10 sec(4π/9)^(9/10) t^(1/10)`.
pub fn hj_validity_edge(t: f64) -> f64 {
    10.0 * sec_theta().powf(0.9) * t.powf(0.1)
}

/// `|Φ_t + sec⁹(4π/9) e^(-Φ) Φ_X¹⁰|` with central differences of step `h`.
pub fn hj_residual(x: f64, t: f64, h: f64) -> Result<f64, AsymptoticsError> {
    if !(h > 0.0) || h >= t {
        return Err(AsymptoticsError::InvalidArgument(format!("step must lie in (0, t), got {h}")));
    }
    let p = |x: f64, t: f64| hj_potential(x, t).map(|v| v.phi);
    let phi = p(x, t)?;
    let phi_t = (p(x, t + h)? - p(x, t - h)?) / (2.0 * h);
    let phi_x = (p(x + h, t)? - p(x - h, t)?) / (2.0 * h);
    Ok((phi_t + sec_theta().powi(9) * (-phi).exp() * phi_x.powi(10)).abs())
}

/// Outer eigenfunction phase `b(Y) = (1 ± iλ) 9 ln(1 - cos(4π/9)(Y/10)^(10/9))`.
pub fn outer_phase_b(y: f64, sign: f64) -> Result<Complex64, AsymptoticsError> {
    let arg = 1.0 - THETA.cos() * (y / 10.0).powf(10.0 / 9.0);
    if !(arg > 0.0) {
        return Err(AsymptoticsError::OutOfValidity(format!("log argument {arg} at Y = {y}")));
    }
    let lambda = lambda_root().lambda;
    Ok(Complex64::new(1.0, sign.signum() * lambda) * (9.0 * arg.ln()))
}

/// Where `b(Y)` diverges: `Y = 10 sec(4π/9)^(9/10)`.
pub fn outer_phase_edge() -> f64 {
    10.0 * sec_theta().powf(0.9)
}

/// Linear spectra and the eigenvalue predictor for `N`-dimensional problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    pub big_n: u32,
    pub k: usize,
    /// Resolvent shift `a`, kept off both spectra.
    pub a_shift: f64,
}

impl SpectralModel {
    pub fn new(big_n: u32, k: usize) -> Self {
        Self { big_n, k, a_shift: 1.0 }
    }

    /// `λ_k = -k/10`.
    pub fn lambda_k(&self) -> f64 {
        0.0 - self.k as f64 / 10.0
    }

    /// `α_k(n) = N/(10 + Nn) - λ_k`, over a common denominator so that
    /// `n = 0` gives `(N + k)/10` correctly rounded.
    pub fn alpha_k(&self, n: f64) -> f64 {
        let nn = f64::from(self.big_n);
        let d = 10.0 + nn * n;
        if self.k == 0 {
            return nn / d;
        }
        (10.0 * nn + self.k as f64 * d) / (10.0 * d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectra {
    /// `σ(B) = {-k/10}`.
    pub sigma_b: Vec<f64>,
    /// `σ(B_n) = {-k(1 - αn)/10 + α}` at `α = α_0(n)`.
    pub sigma_bn: Vec<f64>,
}

/// Both spectra for `k = 0..=k_max`.
pub fn spectrum(big_n: u32, k_max: usize, n: f64) -> Spectra {
    let alpha = SpectralModel::new(big_n, 0).alpha_k(n);
    let sigma_b = (0..=k_max).map(|k| SpectralModel::new(big_n, k).lambda_k()).collect();
    let sigma_bn = (0..=k_max)
        .map(|k| -(k as f64) * (1.0 - alpha * n) / 10.0 + alpha)
        .collect();
    Spectra { sigma_b, sigma_bn }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KatoGap {
    pub measured: f64,
    pub bound: f64,
    pub u_norm: f64,
}

/// Operator difference `((B_n + aI) - (B + aI)) u = -(α_k(n) n/10) y u′ +
/// (α_k(n) - α_k(0)) u` in `L²(0, 1)` and the bound
/// `n α_k(n) ‖y u′‖ + |α_k(n) - α_k(0)| ‖u‖`.
///
/// `u` is sampled on a uniform grid of `[0, 1]`; `u′` uses second-order
/// differences.
pub fn kato_gap(u: &[f64], n: f64, k: usize, big_n: u32) -> Result<KatoGap, AsymptoticsError> {
    if u.len() < 9 {
        return Err(AsymptoticsError::GridTooCoarse(format!("{} samples, need at least 9", u.len())));
    }
    let m = u.len() - 1;
    let h = 1.0 / m as f64;
    let du: Vec<f64> = (0..=m)
        .map(|i| match i {
            0 => (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h),
            i if i == m => (3.0 * u[m] - 4.0 * u[m - 1] + u[m - 2]) / (2.0 * h),
            i => (u[i + 1] - u[i - 1]) / (2.0 * h),
        })
        .collect();
    let model = SpectralModel::new(big_n, k);
    let ak = model.alpha_k(n);
    let shift = ak - model.alpha_k(0.0);
    let diff: Vec<f64> = (0..=m)
        .map(|i| {
            let y = i as f64 * h;
            -(ak * n / 10.0) * y * du[i] + shift * u[i]
        })
        .collect();
    let yu: Vec<f64> = (0..=m).map(|i| i as f64 * h * du[i]).collect();
    let norm = |v: &[f64]| l2_norm(v, h);
    let u_norm = norm(u);
    Ok(KatoGap {
        measured: norm(&diff),
        bound: n * ak * norm(&yu) + shift.abs() * u_norm,
        u_norm,
    })
}

/// Trapezoidal `L²` norm on a uniform grid.
fn l2_norm(v: &[f64], h: f64) -> f64 {
    let m = v.len() - 1;
    let s: f64 = v.iter().map(|x| x * x).sum::<f64>() - 0.5 * (v[0] * v[0] + v[m] * v[m]);
    (s * h).sqrt()
}

/// Weighted norm `(∫ ρ f²)^(1/2)` with `ρ(y) = e^(a|y|^(10/9))` on a
/// (possibly non-uniform) increasing grid.
pub fn weighted_norm(grid: &[f64], f: &[f64], a: f64) -> f64 {
    let w = |i: usize| (a * grid[i].abs().powf(10.0 / 9.0)).exp() * f[i] * f[i];
    (1..grid.len())
        .map(|i| 0.5 * (grid[i] - grid[i - 1]) * (w(i) + w(i - 1)))
        .sum::<f64>()
        .sqrt()
}

pub const DEFAULT_WEIGHT_A: f64 = 0.01;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lambda_value_and_residuals() {
        let r = lambda_root();
        assert!((r.lambda - 5.6713).abs() < 1e-4);
        assert!(r.sextic_residual < 1e-8);
        assert!(r.decic_residual < 1e-8);
    }

    #[test]
    fn sqrt3_roots_only_the_full_polynomial() {
        let s = 3f64.sqrt();
        assert!(relative_residual(&DECIC, s) < 1e-12);
        assert!(relative_residual(&SEXTIC, s) > 1e-2);
    }

    #[test]
    fn decic_is_the_product_of_its_factors() {
        // multiply (λ²+1)(λ²-3)·sextic as polynomial coefficients
        let mul = |a: &[f64], b: &[f64]| {
            let mut c = vec![0.0; a.len() + b.len() - 1];
            for (i, x) in a.iter().enumerate() {
                for (j, y) in b.iter().enumerate() {
                    c[i + j] += x * y;
                }
            }
            c
        };
        let p = mul(&mul(&[1.0, 0.0, 1.0], &[1.0, 0.0, -3.0]), &SEXTIC);
        assert_eq!(p, DECIC.to_vec());
    }

    #[test]
    fn interface_laws() {
        assert!((sec_theta() - 5.7588).abs() < 1e-4);
        assert!((interface_position(0.2, 1.0) - 206.0).abs() < 1.0);
        assert!((interface_similarity(1.0) - 48.3).abs() < 0.1);
        for &(n, t) in &[(0.1, 2.0), (0.7, 0.3), (1.3, 11.0)] {
            assert_eq!(interface_position(n, t), interface_similarity(n) * t.powf(0.1));
        }
        let r = interface_similarity(0.03) / interface_similarity(0.3);
        assert!((r - 10f64.powf(0.9)).abs() < 1e-12 * r);
        assert!(interface_similarity(0.5) > interface_similarity(0.6));
    }

    #[test]
    fn eikonal_and_conjugacy() {
        for &y in &[1e-3, 1.0, 1e3] {
            let p = wkbj_eigen_phase(y, 1.0);
            let e = 10.0 * p.derivative.powu(9);
            assert!((e.re - y).abs() < 1e-13 * y && e.im.abs() < 1e-13 * y);
            let m = wkbj_eigen_phase(y, -1.0);
            assert_eq!(m.value, p.value.conj());
            assert!(p.value.re > 0.0);
        }
    }

    #[test]
    fn envelope_zero_spacing() {
        let k = Complex64::from_polar(0.7, 0.4);
        let g = |y: f64| farfield_envelope(y, 0.1, k);
        // bisection for consecutive zeros of cos(Im φ + arg k)
        let mut zeros = Vec::new();
        let mut y = 1.0;
        while zeros.len() < 4 {
            let (a, b) = (y, y + 0.05);
            if g(a).signum() != g(b).signum() {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if g(lo).signum() == g(mid).signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                zeros.push(0.5 * (lo + hi));
            }
            y = b;
        }
        for w in zeros.windows(2) {
            let d = wkbj_eigen_phase(w[1], 1.0).value.im - wkbj_eigen_phase(w[0], 1.0).value.im;
            assert!((d - PI).abs() < 1e-10, "{d}");
        }
        assert_eq!(envelope_exponent(0.5), 0.0);
        assert!(farfield_envelope(500.0, 0.1, k).abs() < 1e-20);
    }

    #[test]
    fn hj_closed_form() {
        assert_eq!(hj_potential(0.0, 1.0).unwrap().phi, 0.0);
        let edge = hj_validity_edge(2.0);
        assert!(hj_potential(edge * 1.0001, 2.0).is_err());
        assert!(hj_potential(edge * 0.9999, 2.0).is_ok());
        assert!((edge - interface_position(1.0, 2.0)).abs() < 1e-12 * edge);
        let x: f64 = 0.3;
        let s = THETA.cos() * (x.powi(10) / 1e10).powf(1.0 / 9.0);
        assert!(1.0 - s > 0.99);
        let phi = hj_potential(x, 1.0).unwrap().phi;
        assert!((phi - 9.0 * s).abs() < 0.01 * phi);
        assert_eq!(hj_residual(0.0, 1.0, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn hj_residual_second_order() {
        let r: Vec<f64> = [1e-2, 5e-3, 2.5e-3].iter().map(|&h| hj_residual(1.0, 1.0, h).unwrap()).collect();
        for w in r.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!((rate - 2.0).abs() < 0.2, "{rate}");
        }
        assert!(r[2] < 1e-6);
    }

    #[test]
    fn outer_phase() {
        let lambda = lambda_root().lambda;
        let b = outer_phase_b(20.0, 1.0).unwrap();
        assert!((b.im / b.re - lambda).abs() < 1e-12 * lambda);
        assert!(outer_phase_b(outer_phase_edge() * 1.0001, 1.0).is_err());
        let near = outer_phase_b(outer_phase_edge() * 0.999_999, 1.0).unwrap();
        assert!(near.re < -50.0);
        let y = 0.05;
        let small = outer_phase_b(y, -1.0).unwrap();
        let lead = -9.0 * THETA.cos() * (y / 10.0).powf(10.0 / 9.0);
        assert!((small.re - lead).abs() < 1e-3 * lead.abs());
        let n: f64 = 0.4;
        assert!((outer_phase_edge() / n.powf(0.9) - interface_similarity(n)).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn alpha_k_matches_the_two_term_form(n in 0.0f64..2.0, k in 0usize..10, big_n in 1u32..4) {
            let m = SpectralModel::new(big_n, k);
            let nn = f64::from(big_n);
            let two_term = nn / (10.0 + nn * n) + k as f64 / 10.0;
            prop_assert!((m.alpha_k(n) - two_term).abs() <= 4.0 * f64::EPSILON * two_term);
        }
    }

    #[test]
    fn spectra() {
        let s = spectrum(1, 3, 0.0);
        assert_eq!(s.sigma_b, vec![0.0, -0.1, -0.2, -0.3]);
        let a: Vec<f64> = (0..4).map(|k| SpectralModel::new(1, k).alpha_k(0.0)).collect();
        assert_eq!(a, vec![0.1, 0.2, 0.3, 0.4]);
        for (b, bn) in s.sigma_b.iter().zip(&s.sigma_bn) {
            assert!((bn - (b + 0.1)).abs() < 1e-15);
        }
    }

    fn gaussian(m: usize) -> Vec<f64> {
        (0..=m).map(|i| (-((i as f64 / m as f64) * 3.0).powi(2)).exp()).collect()
    }

    #[test]
    fn kato_bound_and_linearity() {
        let u = gaussian(2000);
        let mut ratios = Vec::new();
        for &n in &[0.05, 0.1, 0.2] {
            let g = kato_gap(&u, n, 0, 1).unwrap();
            assert!(g.measured <= g.bound * (1.0 + 1e-10));
            ratios.push(g.measured / g.u_norm);
        }
        assert!((ratios[1] / ratios[0] - 2.0).abs() < 0.2);
        assert!((ratios[2] / ratios[1] - 2.0).abs() < 0.2);
        assert_eq!(kato_gap(&u, 0.0, 2, 1).unwrap().measured, 0.0);
        let n: f64 = 0.3;
        let direct = SpectralModel::new(1, 2).alpha_k(n) - SpectralModel::new(1, 2).alpha_k(0.0);
        assert!((direct + n / (10.0 * (10.0 + n))).abs() < 1e-16);
        assert!(matches!(kato_gap(&u[..5], 0.1, 0, 1), Err(AsymptoticsError::GridTooCoarse(_))));
    }

    #[test]
    fn weighted_norm_reduces_to_l2() {
        let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let f: Vec<f64> = grid.iter().map(|_| 1.0).collect();
        assert!((weighted_norm(&grid, &f, 0.0) - 1.0).abs() < 1e-12);
        assert!(weighted_norm(&grid, &f, DEFAULT_WEIGHT_A) > 1.0);
    }
}
