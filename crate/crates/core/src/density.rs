//! The secrecy density Ξ(t; P) for shell inputs, its radial derivative,
//! the single-shell KL closed forms, the G diagnostic function, and
//! sign-change counting.

use crate::model::{ChannelParams, QuadratureConfig, ShellPmf};
use crate::quad::{expect_ncx2, radial_expect, scale_integral_range};
use crate::specfun::{bessel_ratio, ncx2_logpdf, NoncentralChiSq};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// One sample of the secrecy density along the input norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEval {
    pub t: f64,
    pub value: f64,
}

/// One sample of the G diagnostic function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GEval {
    pub y: f64,
    pub value: f64,
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + terms.iter().map(|&t| (t - m).exp()).sum::<f64>().ln()
}

/// The per-channel information density
///   i_j(t; P) = -E[ ln( m_j(Y) / Y^{n/2-1} ) ] - ln( (2e)^{n/2} Γ(n/2) ),
/// where Y ~ chi2_n(t²/σj²) and m_j is the shell mixture of chi2_n pdfs
/// with noncentralities ρ_k²/σj².
fn info_density(
    t: f64,
    pmf: &ShellPmf,
    n: u32,
    sigma_sq: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let half_n = n as f64 / 2.0;
    let comps: Vec<(f64, NoncentralChiSq)> = pmf
        .iter()
        .map(|(rho, p)| Ok((p.ln(), NoncentralChiSq::new(n, rho * rho / sigma_sq)?)))
        .collect::<Result<_>>()?;
    // Make the integration window cover the widest mixture component,
    // not just the outer weight's own support.
    let widest = comps
        .iter()
        .map(|(_, d)| d.mean() + cfg.tail_sigmas * d.variance().sqrt())
        .fold(0.0f64, f64::max);
    let g = |y: f64| {
        let logs: Vec<f64> = comps
            .iter()
            .map(|(lp, d)| lp + ncx2_logpdf(*d, y).unwrap_or(f64::NEG_INFINITY))
            .collect();
        -(log_sum_exp(&logs) - (half_n - 1.0) * y.ln())
    };
    let expectation = expect_ncx2(n, t * t / sigma_sq, Some(widest), g, cfg)?;
    let constant = half_n * (2.0 * std::f64::consts::E).ln() + ln_gamma(half_n);
    Ok(expectation - constant)
}

/// Secrecy density Ξ(t; P) = i₁(t; P) - i₂(t; P) in nats, for an input
/// supported on the shells of `pmf` and a probe input of norm t.
pub fn xi(t: f64, pmf: &ShellPmf, p: &ChannelParams, cfg: &QuadratureConfig) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("xi: t = {t} < 0")));
    }
    if p.sigma1_sq == p.sigma2_sq {
        return Ok(0.0);
    }
    let i1 = info_density(t, pmf, p.n, p.sigma1_sq, cfg)?;
    let i2 = info_density(t, pmf, p.n, p.sigma2_sq, cfg)?;
    Ok(i1 - i2)
}

/// d/dt of one information density:
///   i_j'(t; P) = -(t/σj²) E_{Q ~ chi2_{n+2}(t²/σj²)}[ Σ_k w_k(Q) τ_k(Q) ]
/// with posterior shell weights w_k(q) ∝ p_k f_{chi2_n(ρ_k²/σj²)}(q) and
///   τ_k(q) = (ρ_k/(σj √q)) h_{n/2}(ρ_k √q / σj) - 1.
fn info_density_prime(
    t: f64,
    pmf: &ShellPmf,
    n: u32,
    sigma_sq: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let sigma = sigma_sq.sqrt();
    let v = n as f64 / 2.0;
    let comps: Vec<(f64, f64, NoncentralChiSq)> = pmf
        .iter()
        .map(|(rho, prob)| {
            Ok((rho, prob.ln(), NoncentralChiSq::new(n, rho * rho / sigma_sq)?))
        })
        .collect::<Result<_>>()?;
    let widest = comps
        .iter()
        .map(|(_, _, d)| d.mean() + cfg.tail_sigmas * d.variance().sqrt())
        .fold(0.0f64, f64::max);
    let inner = |q: f64| {
        let mut log_w: Vec<f64> = Vec::with_capacity(comps.len());
        for (_, lp, d) in &comps {
            log_w.push(lp + ncx2_logpdf(*d, q).unwrap_or(f64::NEG_INFINITY));
        }
        let norm = log_sum_exp(&log_w);
        let sq = q.sqrt();
        let mut acc = 0.0;
        for ((rho, _, _), lw) in comps.iter().zip(&log_w) {
            let w = (lw - norm).exp();
            let tau = if *rho == 0.0 {
                -1.0
            } else {
                let h = bessel_ratio(v, rho * sq / sigma).unwrap_or(0.0);
                rho / (sigma * sq) * h - 1.0
            };
            acc += w * tau;
        }
        acc
    };
    let expectation = expect_ncx2(n + 2, t * t / sigma_sq, Some(widest), inner, cfg)?;
    Ok(-(t / sigma_sq) * expectation)
}

/// Radial derivative of the secrecy density; exactly zero at t = 0.
pub fn xi_prime(t: f64, pmf: &ShellPmf, p: &ChannelParams, cfg: &QuadratureConfig) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("xi_prime: t = {t} < 0")));
    }
    if t == 0.0 || p.sigma1_sq == p.sigma2_sq {
        return Ok(0.0);
    }
    let d1 = info_density_prime(t, pmf, p.n, p.sigma1_sq, cfg)?;
    let d2 = info_density_prime(t, pmf, p.n, p.sigma2_sq, cfg)?;
    Ok(d1 - d2)
}

/// KL divergence between the law of x + √σ² Z (with ||x|| ∈ {0, R}) and
/// the uniform-shell output at radius R under the same noise:
///   ||x|| = R: ½ ∫_{σ²}^∞ (R² - R² E[h²_{n/2}(||x+√sZ|| R/s)]) / s² ds
///   ||x|| = 0: ½ ∫_{σ²}^∞  R² E[h²_{n/2}(||√sZ|| R/s)] / s² ds.
/// Only those two norms admit a closed form.
pub fn kl_point_vs_shell(
    x_norm: f64,
    r: f64,
    sigma_sq: f64,
    n: u32,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if !(sigma_sq > 0.0) {
        return Err(Error::Domain(format!("kl_point_vs_shell: σ² = {sigma_sq} <= 0")));
    }
    let at_zero = x_norm == 0.0;
    let at_r = (x_norm - r).abs() <= 1e-12 * r.max(1.0);
    if !at_zero && !at_r {
        return Err(Error::UnsupportedNorm(x_norm));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let v = n as f64 / 2.0;
    // Integrand is bounded by R²/s², so truncate where that bound drops
    // below the absolute tolerance.
    let s_max = (r * r / cfg.abs_tol).max(10.0 * sigma_sq);
    let shift = if at_zero { 0.0 } else { r };
    let val = scale_integral_range(
        sigma_sq,
        s_max,
        |s| {
            let h_sq = |u: f64| {
                let h = bessel_ratio(v, u * r / s).unwrap_or(0.0);
                h * h
            };
            let e = radial_expect(n, shift, s, h_sq, cfg).unwrap_or(f64::NAN);
            if at_zero {
                r * r * e
            } else {
                r * r * (1.0 - e)
            }
        },
        cfg,
    )?;
    Ok(0.5 * val)
}

/// The sign-change diagnostic
///   G(y) = E[(R/||y e₁ + W||) h_{n/2}(R ||y e₁ + W|| / σ₂²) - 1]/σ₂²
///        - ((R/y) h_{n/2}(R y / σ₁²) - 1)/σ₁²,
/// with W ~ N(0, (σ₂² - σ₁²) I_{n+2}). When the noise gap is numerically
/// zero the expectation collapses to W ≡ 0 and is evaluated directly.
pub fn g_function(y: f64, p: &ChannelParams, cfg: &QuadratureConfig) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::Domain(format!("g_function: y = {y} <= 0")));
    }
    let r = p.radius;
    let v = p.n as f64 / 2.0;
    let n_f = p.n as f64;
    let gap = p.sigma2_sq - p.sigma1_sq;
    if gap < 0.0 {
        return Err(Error::DegenerateGap(gap));
    }
    // (R/u) h_{n/2}(R u / σ²) with its small-u limit R²/(n σ²).
    let bracket = |u: f64, sigma_sq: f64| -> f64 {
        if u < 1e-150 {
            return r * r / (n_f * sigma_sq);
        }
        let h = bessel_ratio(v, r * u / sigma_sq).unwrap_or(0.0);
        r / u * h
    };
    let eavesdropper_term = if gap < 1e-12 {
        (bracket(y, p.sigma2_sq) - 1.0) / p.sigma2_sq
    } else {
        let e = radial_expect(p.n + 2, y, gap, |u| bracket(u, p.sigma2_sq), cfg)?;
        (e - 1.0) / p.sigma2_sq
    };
    let legitimate_term = (bracket(y, p.sigma1_sq) - 1.0) / p.sigma1_sq;
    Ok(eavesdropper_term - legitimate_term)
}

/// Pointwise lower bound on G that holds for every y > 0:
/// -1/σ₂² + 1/σ₁² - (R/(σ₁² y)) h_{n/2}(R y / σ₁²).
pub fn g_lower_bound(y: f64, p: &ChannelParams) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::Domain(format!("g_lower_bound: y = {y} <= 0")));
    }
    let v = p.n as f64 / 2.0;
    let h = bessel_ratio(v, p.radius * y / p.sigma1_sq)?;
    Ok(-1.0 / p.sigma2_sq + 1.0 / p.sigma1_sq - p.radius / (p.sigma1_sq * y) * h)
}

/// Counts strict sign alternations of `f` on a uniform grid over
/// [interval.0, interval.1], treating |f| < tol as no information.
pub fn count_sign_changes<F: Fn(f64) -> f64>(
    f: F,
    interval: (f64, f64),
    grid_points: u32,
    tol: f64,
) -> Result<u32> {
    if grid_points < 2 {
        return Err(Error::Domain("count_sign_changes: need >= 2 grid points".into()));
    }
    let (a, b) = interval;
    if !(a < b) {
        return Err(Error::Domain(format!("count_sign_changes: bad interval [{a}, {b}]")));
    }
    let mut changes = 0u32;
    let mut last_sign = 0i8;
    for i in 0..grid_points {
        let x = a + (b - a) * i as f64 / (grid_points - 1) as f64;
        let val = f(x);
        if !val.is_finite() || val.abs() < tol {
            continue;
        }
        let sign = if val > 0.0 { 1 } else { -1 };
        if last_sign != 0 && sign != last_sign {
            changes += 1;
        }
        last_sign = sign;
    }
    Ok(changes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regime::{capacity_single_shell_integral, sufficient_radius};

    fn cfg() -> QuadratureConfig {
        QuadratureConfig {
            rel_tol: 1e-8,
            ..QuadratureConfig::default()
        }
    }

    #[test]
    fn xi_zero_for_equal_variances() {
        let p = ChannelParams::new(1.0, 1.0, 2, 1.0).unwrap();
        let pmf = ShellPmf::single_shell(1.0);
        assert_eq!(xi(0.4, &pmf, &p, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn xi_matches_single_shell_integral() {
        let p = ChannelParams::new(1.0, 1.5, 2, 1.0).unwrap();
        let pmf = ShellPmf::single_shell(1.0);
        let via_density = xi(1.0, &pmf, &p, &cfg()).unwrap();
        let via_integral = capacity_single_shell_integral(&p, &cfg()).unwrap();
        assert!(
            (via_density - via_integral).abs() < 1e-6,
            "{via_density} vs {via_integral}"
        );
    }

    #[test]
    fn xi_at_origin_not_above_shell_value_below_threshold() {
        let p = ChannelParams::new(1.0, 1.5, 2, 1.0).unwrap(); // below n=2 threshold
        let pmf = ShellPmf::single_shell(1.0);
        let at0 = xi(0.0, &pmf, &p, &cfg()).unwrap();
        let at_r = xi(1.0, &pmf, &p, &cfg()).unwrap();
        assert!(at0 <= at_r + 1e-9, "{at0} > {at_r}");
    }

    #[test]
    fn xi_prime_zero_at_origin() {
        let p = ChannelParams::new(1.0, 2.0, 3, 1.5).unwrap();
        let pmf = ShellPmf::new(vec![0.5, 1.5], vec![0.3, 0.7]).unwrap();
        assert_eq!(xi_prime(0.0, &pmf, &p, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn xi_prime_matches_finite_difference() {
        let p = ChannelParams::new(1.0, 1.5, 2, 1.2).unwrap();
        let pmf = ShellPmf::new(vec![0.4, 1.2], vec![0.45, 0.55]).unwrap();
        let t = 0.7;
        let h = 1e-4;
        let fd = (xi(t + h, &pmf, &p, &cfg()).unwrap() - xi(t - h, &pmf, &p, &cfg()).unwrap())
            / (2.0 * h);
        let an = xi_prime(t, &pmf, &p, &cfg()).unwrap();
        assert!(
            (fd - an).abs() < (1e-5f64).max(1e-3 * an.abs()),
            "fd = {fd}, analytic = {an}"
        );
    }

    #[test]
    fn xi_prime_positive_far_out() {
        let p = ChannelParams::new(1.0, 1.5, 2, 1.0).unwrap();
        let pmf = ShellPmf::single_shell(1.0);
        // Beyond the root of ||x||(1/σ₁² - 1/σ₂²) - R/σ₁² the derivative
        // must be positive.
        let t = 2.0 * (1.0 + 1.5f64.sqrt()) * 3.0;
        let d = xi_prime(t, &pmf, &p, &cfg()).unwrap();
        assert!(d > 0.0, "xi'({t}) = {d}");
    }

    #[test]
    fn kl_closed_forms_reassemble_xi() {
        let p = ChannelParams::new(1.0, 1.5, 2, 1.0).unwrap();
        let pmf = ShellPmf::single_shell(1.0);
        let c = cfg();
        let xi_r = kl_point_vs_shell(1.0, 1.0, p.sigma1_sq, p.n, &c).unwrap()
            - kl_point_vs_shell(1.0, 1.0, p.sigma2_sq, p.n, &c).unwrap();
        assert!((xi_r - xi(1.0, &pmf, &p, &c).unwrap()).abs() < 1e-6);
        let xi_0 = kl_point_vs_shell(0.0, 1.0, p.sigma1_sq, p.n, &c).unwrap()
            - kl_point_vs_shell(0.0, 1.0, p.sigma2_sq, p.n, &c).unwrap();
        assert!((xi_0 - xi(0.0, &pmf, &p, &c).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn kl_trivial_cases() {
        let c = cfg();
        assert_eq!(kl_point_vs_shell(0.0, 0.0, 1.0, 2, &c).unwrap(), 0.0);
        assert!(matches!(
            kl_point_vs_shell(0.5, 1.0, 1.0, 2, &c),
            Err(Error::UnsupportedNorm(_))
        ));
    }

    #[test]
    fn g_nonnegative_below_sufficient_radius() {
        let suf = sufficient_radius(1.0, 4.0, 3).unwrap();
        let p = ChannelParams::new(1.0, 4.0, 3, 0.9 * suf).unwrap();
        for i in 1..=30 {
            let y = 0.4 * i as f64;
            let g = g_function(y, &p, &cfg()).unwrap();
            assert!(g >= -1e-10, "G({y}) = {g}");
        }
    }

    #[test]
    fn g_positive_far_out() {
        let p = ChannelParams::new(1.0, 4.0, 3, 4.0).unwrap();
        let y = 50.0 * (p.radius + 2.0 * (3.0f64).sqrt());
        assert!(g_function(y, &p, &cfg()).unwrap() > 0.0);
    }

    #[test]
    fn g_respects_lower_bound() {
        let p = ChannelParams::new(1.0, 4.0, 3, 5.0).unwrap();
        for i in 1..=25 {
            let y = 0.5 * i as f64;
            let g = g_function(y, &p, &cfg()).unwrap();
            let lb = g_lower_bound(y, &p).unwrap();
            assert!(g >= lb - 1e-9, "y={y}: {g} < {lb}");
        }
    }

    #[test]
    fn g_degenerate_gap_reduces_analytically() {
        let p = ChannelParams::new(1.0, 1.0 + 1e-14, 3, 2.0).unwrap();
        let g = g_function(1.0, &p, &cfg()).unwrap();
        assert!(g.is_finite());
        assert!(g.abs() < 1e-10, "gap ~ 0 should make G ~ 0, got {g}");
    }

    #[test]
    fn sign_change_counting() {
        assert_eq!(
            count_sign_changes(|x| x - 1.0, (0.0, 2.0), 2000, 1e-12).unwrap(),
            1
        );
        assert_eq!(count_sign_changes(|_| 0.0, (0.0, 2.0), 100, 1e-12).unwrap(), 0);
        assert_eq!(
            count_sign_changes(|x| (3.0 * x).sin(), (0.0, 6.0), 2000, 1e-12).unwrap(),
            5
        );
    }
}
