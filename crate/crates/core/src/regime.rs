//! Low-amplitude regime machinery: the threshold condition f(R), the
//! threshold radius R̄ₙ below which a single shell at R is optimal, the
//! closed-form capacity there, the large-n asymptote c, the two large-n
//! capacity limits, and the average-power benchmark.

use crate::model::{ChannelParams, QuadratureConfig, SolverReport};
use crate::quad::{radial_expect, scale_integral};
use crate::specfun::bessel_ratio;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Hard ceiling for bracket expansion; reaching it means the condition
/// function never changed sign, which signals a numerics bug.
const BRACKET_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub r_bar: f64,
    pub report: SolverReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteResult {
    pub c_value: f64,
    pub report: SolverReport,
}

fn require_ordered(sigma1_sq: f64, sigma2_sq: f64) -> Result<()> {
    if !(sigma1_sq > 0.0 && sigma2_sq > 0.0) {
        return Err(Error::Domain("variances must be positive".into()));
    }
    if !(sigma1_sq < sigma2_sq) {
        return Err(Error::Domain(format!(
            "need sigma1_sq < sigma2_sq, got {sigma1_sq} >= {sigma2_sq}"
        )));
    }
    Ok(())
}

/// The threshold condition
///   f(R) = ∫ (E[h²_{n/2}(||√s Z|| R/s)] + E[h²_{n/2}(||R e₁ + √s Z|| R/s)] - 1) / s² ds
/// over s ∈ [σ₁², σ₂²]. Negative below the threshold, zero at it,
/// positive above; f(0) = 1/σ₂² - 1/σ₁² exactly.
pub fn condition_f(
    sigma1_sq: f64,
    sigma2_sq: f64,
    n: u32,
    r: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    require_ordered(sigma1_sq, sigma2_sq)?;
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("condition_f: R = {r} < 0")));
    }
    if r == 0.0 {
        return Ok(1.0 / sigma2_sq - 1.0 / sigma1_sq);
    }
    let v = n as f64 / 2.0;
    scale_integral(
        sigma1_sq,
        sigma2_sq,
        |s| {
            let h_sq = |u: f64| {
                let h = bessel_ratio(v, u * r / s).unwrap_or(0.0);
                h * h
            };
            let e0 = radial_expect(n, 0.0, s, h_sq, cfg).unwrap_or(f64::NAN);
            let er = radial_expect(n, r, s, h_sq, cfg).unwrap_or(f64::NAN);
            e0 + er - 1.0
        },
        cfg,
    )
}

fn bisect_root<F: Fn(f64) -> Result<f64>>(
    f: F,
    bracket_seed: f64,
    tol: f64,
) -> Result<(f64, SolverReport)> {
    let mut lo = 0.0;
    let mut hi = bracket_seed.max(tol);
    let mut f_hi = f(hi)?;
    let mut iterations = 0u32;
    while f_hi <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > BRACKET_LIMIT {
            return Err(Error::BracketFailure { limit: BRACKET_LIMIT });
        }
        f_hi = f(hi)?;
        iterations += 1;
    }
    let mut mid = 0.5 * (lo + hi);
    let mut f_mid = 0.0;
    while hi - lo > tol {
        mid = 0.5 * (lo + hi);
        f_mid = f(mid)?;
        if f_mid < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations > 200 {
            break;
        }
    }
    Ok((
        mid,
        SolverReport {
            value: mid,
            residual: f_mid,
            iterations,
            converged: hi - lo <= tol,
        },
    ))
}

/// The largest radius for which a single uniform shell at R achieves the
/// secrecy capacity, found by bisection on the monotone condition f.
pub fn threshold(
    sigma1_sq: f64,
    sigma2_sq: f64,
    n: u32,
    tol: f64,
    cfg: &QuadratureConfig,
) -> Result<ThresholdResult> {
    require_ordered(sigma1_sq, sigma2_sq)?;
    // R̄ₙ grows like c·√n, so √n·σ₁ is the natural bracket seed.
    let seed = (n as f64).sqrt() * sigma1_sq.sqrt();
    let (r_bar, report) = bisect_root(|r| condition_f(sigma1_sq, sigma2_sq, n, r, cfg), seed, tol)?;
    Ok(ThresholdResult { r_bar, report })
}

/// The single-shell capacity integral
///   ½ ∫ (R² - R² E[h²_{n/2}(||R e₁ + √s Z|| R/s)]) / s² ds,
/// valid as the secrecy capacity only for R at or below the threshold.
/// Exposed without the threshold check for sweeps and cross-checks.
pub fn capacity_single_shell_integral(p: &ChannelParams, cfg: &QuadratureConfig) -> Result<f64> {
    if p.degraded() {
        return Ok(0.0);
    }
    if p.radius == 0.0 {
        return Ok(0.0);
    }
    let r = p.radius;
    let v = p.n as f64 / 2.0;
    let val = scale_integral(
        p.sigma1_sq,
        p.sigma2_sq,
        |s| {
            let h_sq = |u: f64| {
                let h = bessel_ratio(v, u * r / s).unwrap_or(0.0);
                h * h
            };
            let er = radial_expect(p.n, r, s, h_sq, cfg).unwrap_or(f64::NAN);
            r * r * (1.0 - er)
        },
        cfg,
    )?;
    Ok(0.5 * val)
}

/// Secrecy capacity in the low-amplitude regime (nats). Verifies the
/// regime membership by computing the threshold; errors if R exceeds it.
pub fn capacity_low_amplitude(p: &ChannelParams, cfg: &QuadratureConfig) -> Result<f64> {
    if p.degraded() {
        return Ok(0.0);
    }
    if p.radius == 0.0 {
        return Ok(0.0);
    }
    let thr = threshold(p.sigma1_sq, p.sigma2_sq, p.n, 1e-4, cfg)?;
    if p.radius > thr.r_bar + 1e-3 {
        return Err(Error::OutsideLowAmplitudeRegime {
            radius: p.radius,
            r_bar: thr.r_bar,
        });
    }
    capacity_single_shell_integral(p, cfg)
}

/// Large-n slope c(σ₁², σ₂²) of the threshold: R̄ₙ/√n → c. Root of an
/// elementary integrand (no Bessel functions, no expectations).
pub fn asymptote_c(
    sigma1_sq: f64,
    sigma2_sq: f64,
    tol: f64,
    cfg: &QuadratureConfig,
) -> Result<AsymptoteResult> {
    require_ordered(sigma1_sq, sigma2_sq)?;
    let condition = |c: f64| -> Result<f64> {
        let c_sq = c * c;
        scale_integral(
            sigma1_sq,
            sigma2_sq,
            |s| {
                let t1 = {
                    let den = s.sqrt() / 2.0 + (s / 4.0 + c_sq).sqrt();
                    c_sq / (den * den)
                };
                let t2 = {
                    let den = s / 2.0 + (s * s / 4.0 + c_sq * (c_sq + s)).sqrt();
                    c_sq * (c_sq + s) / (den * den)
                };
                t1 + t2 - 1.0
            },
            cfg,
        )
    };
    let (c_value, report) = bisect_root(condition, sigma1_sq.sqrt(), tol)?;
    Ok(AsymptoteResult { c_value, report })
}

/// n → ∞ capacity limit at fixed R: R² (1/(2σ₁²) - 1/(2σ₂²)).
pub fn capacity_limit_fixed_r(p: &ChannelParams) -> f64 {
    if p.degraded() {
        return 0.0;
    }
    p.radius * p.radius * (0.5 / p.sigma1_sq - 0.5 / p.sigma2_sq)
}

/// Per-dimension capacity limit when R = c√n grows with n:
/// ½ ln((1 + c²/σ₁²)/(1 + c²/σ₂²)), valid for c at or below the asymptote.
pub fn capacity_limit_coupled(sigma1_sq: f64, sigma2_sq: f64, c: f64) -> Result<f64> {
    if !(c >= 0.0) {
        return Err(Error::Domain(format!("capacity_limit_coupled: c = {c} < 0")));
    }
    if sigma1_sq >= sigma2_sq {
        return Ok(0.0);
    }
    let c_sq = c * c;
    Ok(0.5 * ((1.0 + c_sq / sigma1_sq) / (1.0 + c_sq / sigma2_sq)).ln())
}

/// Secrecy capacity under the average-power constraint:
/// (n/2) ln((1 + P/σ₁²)/(1 + P/σ₂²)). With P = R² this is weaker than
/// the amplitude constraint, so it upper-bounds every capacity here.
pub fn capacity_avg_power(sigma1_sq: f64, sigma2_sq: f64, power: f64, n: u32) -> Result<f64> {
    if !(power >= 0.0) {
        return Err(Error::Domain(format!("capacity_avg_power: P = {power} < 0")));
    }
    if sigma1_sq >= sigma2_sq {
        return Ok(0.0);
    }
    Ok(n as f64 / 2.0 * ((1.0 + power / sigma1_sq) / (1.0 + power / sigma2_sq)).ln())
}

/// Closed-form radius below which the single shell is guaranteed optimal:
/// σ₁² √(n (1/σ₁² - 1/σ₂²)). Always at most the true threshold.
pub fn sufficient_radius(sigma1_sq: f64, sigma2_sq: f64, n: u32) -> Result<f64> {
    require_ordered(sigma1_sq, sigma2_sq)?;
    Ok(sigma1_sq * (n as f64 * (1.0 / sigma1_sq - 1.0 / sigma2_sq)).sqrt())
}
