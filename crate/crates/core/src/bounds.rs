//! Scalar-case (n = 1) support-size machinery: the search window L, the
//! implicit zero-counting bound, the fully explicit count bound with all
//! of its coefficients, and the entropy-power lower bound.

use crate::model::{ChannelParams, QuadratureConfig, ShellPmf};
use crate::optimizer::secrecy_information;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};
use std::sync::OnceLock;

/// Minimum σ₂ − σ₁ (in standard deviations) below which d₁ diverges.
const MIN_SIGMA_GAP: f64 = 1e-9;

/// Every coefficient entering the explicit support-size bound, plus the
/// evaluated bound values themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarBoundReport {
    /// Half-width of the interval that contains all mass points.
    pub l_window: f64,
    /// Offset log(σ₂/σ₁) − C_s added to g before counting zeros.
    pub kappa1: f64,
    pub d1: f64,
    pub d2: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub c1: f64,
    pub c2: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub b5: f64,
    pub b6: f64,
    pub b7: f64,
    /// Leading-order coefficient: count ≲ rho_coeff · R²/σ₁².
    pub rho_coeff: f64,
    /// Full non-asymptotic bound b₁R²/σ₁² + b₂ + log((b₃R²+b₄R+b₅)/(b₆R+b₇)).
    pub explicit_upper: f64,
    /// Entropy-power lower bound on the number of support points.
    pub lower: f64,
    /// Zero count of g + κ₁ on [−L, L], when a converged pmf was supplied.
    pub implicit_zero_count: Option<u32>,
}

/// Secrecy-optimal output densities of a scalar channel: Gaussian
/// mixtures over the signed support obtained by folding an isotropic
/// shell pmf (radius r > 0 becomes mass/2 at ±r, radius 0 stays at 0).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarOutputDensities {
    points: Vec<f64>,
    log_probs: Vec<f64>,
    sigma1_sq: f64,
    sigma2_sq: f64,
}

impl ScalarOutputDensities {
    pub fn from_pmf(pmf: &ShellPmf, sigma1_sq: f64, sigma2_sq: f64) -> Self {
        let mut points = Vec::new();
        let mut log_probs = Vec::new();
        for (r, q) in pmf.iter() {
            if r == 0.0 {
                points.push(0.0);
                log_probs.push(q.ln());
            } else {
                points.push(-r);
                log_probs.push((q / 2.0).ln());
                points.push(r);
                log_probs.push((q / 2.0).ln());
            }
        }
        ScalarOutputDensities {
            points,
            log_probs,
            sigma1_sq,
            sigma2_sq,
        }
    }

    pub fn support(&self) -> &[f64] {
        &self.points
    }

    fn log_mixture(&self, y: f64, sigma_sq: f64) -> f64 {
        let norm = -0.5 * (2.0 * PI * sigma_sq).ln();
        let logs: Vec<f64> = self
            .points
            .iter()
            .zip(&self.log_probs)
            .map(|(&x, &lp)| lp + norm - (y - x) * (y - x) / (2.0 * sigma_sq))
            .collect();
        log_sum_exp(&logs)
    }

    /// log f_{Y₁*}(y): legitimate-channel output density.
    pub fn log_f1(&self, y: f64) -> f64 {
        self.log_mixture(y, self.sigma1_sq)
    }

    /// log f_{Y₂*}(y): eavesdropper-channel output density.
    pub fn log_f2(&self, y: f64) -> f64 {
        self.log_mixture(y, self.sigma2_sq)
    }

    /// g(y) = E[log f_{Y₂*}(y + N)] − log f_{Y₁*}(y) with
    /// N ∼ N(0, σ₂² − σ₁²), evaluated by 64-node Gauss-Hermite.
    pub fn g(&self, y: f64) -> f64 {
        let gap = self.sigma2_sq - self.sigma1_sq;
        let scale = (2.0 * gap).sqrt();
        let mut acc = 0.0;
        for &(node, weight) in gauss_hermite_64() {
            acc += weight * self.log_f2(y + scale * node);
        }
        acc / PI.sqrt() - self.log_f1(y)
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + terms.iter().map(|&t| (t - m).exp()).sum::<f64>().ln()
}

/// 64-node Gauss-Hermite rule for weight e^{-x²}: nodes by bisection on
/// the orthonormal Hermite recurrence, weights by the Christoffel formula
/// w_i = 1/Σ_{k<64} p_k(x_i)².
fn gauss_hermite_64() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        const N: usize = 64;
        // Orthonormal (physicists') Hermite value p_N(x); stays O(1) where
        // the raw polynomial would overflow.
        let p_n = |x: f64| -> f64 {
            let mut prev = 0.0;
            let mut cur = PI.powf(-0.25);
            for k in 0..N {
                let next = x * (2.0 / (k as f64 + 1.0)).sqrt() * cur
                    - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
                prev = cur;
                cur = next;
            }
            cur
        };
        let christoffel = |x: f64| -> f64 {
            let mut prev = 0.0;
            let mut cur = PI.powf(-0.25);
            let mut sum = cur * cur;
            for k in 0..N - 1 {
                let next = x * (2.0 / (k as f64 + 1.0)).sqrt() * cur
                    - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
                prev = cur;
                cur = next;
                sum += cur * cur;
            }
            1.0 / sum
        };
        // All roots lie inside |x| < sqrt(2N+1); scan for sign changes on
        // the positive half and bisect each bracket.
        let limit = (2.0 * N as f64 + 1.0).sqrt();
        let grid = 20_000usize;
        let mut roots = Vec::with_capacity(N / 2);
        let mut x_prev = 0.0;
        let mut f_prev = p_n(0.0);
        for i in 1..=grid {
            let x = limit * i as f64 / grid as f64;
            let f = p_n(x);
            if f_prev == 0.0 {
                roots.push(x_prev);
            } else if f.signum() != f_prev.signum() {
                let (mut lo, mut hi) = (x_prev, x);
                let mut f_lo = f_prev;
                for _ in 0..90 {
                    let mid = 0.5 * (lo + hi);
                    let f_mid = p_n(mid);
                    if f_mid == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if f_mid.signum() == f_lo.signum() {
                        lo = mid;
                        f_lo = f_mid;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            x_prev = x;
            f_prev = f;
        }
        debug_assert_eq!(roots.len(), N / 2);
        let mut rule = Vec::with_capacity(N);
        for &r in roots.iter().rev() {
            rule.push((-r, christoffel(-r)));
        }
        for &r in &roots {
            rule.push((r, christoffel(r)));
        }
        rule
    })
}

fn check_gap(sigma1: f64, sigma2: f64) -> Result<()> {
    if !(sigma1 > 0.0) || !(sigma2 > 0.0) {
        return Err(Error::Domain(format!(
            "standard deviations must be positive, got ({sigma1}, {sigma2})"
        )));
    }
    if sigma2 - sigma1 < MIN_SIGMA_GAP {
        return Err(Error::DegenerateGap(sigma2 - sigma1));
    }
    Ok(())
}

/// d₁ = (σ₂+σ₁)/(σ₂−σ₁) and d₂ = √(((σ₂²−σ₁²)/σ₂² + 2C_s)/(1/σ₁²−1/σ₂²)).
pub fn window_coeffs(sigma1: f64, sigma2: f64, cs: f64) -> Result<(f64, f64)> {
    check_gap(sigma1, sigma2)?;
    let (s1, s2) = (sigma1 * sigma1, sigma2 * sigma2);
    let d1 = (sigma2 + sigma1) / (sigma2 - sigma1);
    let d2 = (((s2 - s1) / s2 + 2.0 * cs) / (1.0 / s1 - 1.0 / s2)).sqrt();
    Ok((d1, d2))
}

/// Window half-width L = R·d₁ + d₂ containing all scalar mass points.
/// Monotone increasing in C_s, so C_G is a safe surrogate for C_s.
pub fn window_l(sigma1: f64, sigma2: f64, r: f64, cs: f64) -> Result<f64> {
    let (d1, d2) = window_coeffs(sigma1, sigma2, cs)?;
    Ok(r * d1 + d2)
}

/// Entropy-power lower bound on the support size,
/// √(1 + (2R²/(πeσ₁²))/(1+R²/σ₂²)) · e^{I(X*;Y₂)}. With `i_eve = 0` this
/// is the unconditional floor; the eavesdropper information is a caller
/// input because no sharp estimate of it is known.
pub fn lower_bound_points(sigma1: f64, sigma2: f64, r: f64, i_eve: f64) -> f64 {
    let snr = (2.0 * r * r / (PI * E * sigma1 * sigma1)) / (1.0 + r * r / (sigma2 * sigma2));
    (1.0 + snr).sqrt() * i_eve.exp()
}

/// Evaluates the full explicit support-size bound
/// b₁R²/σ₁² + b₂ + log((b₃R² + b₄R + b₅)/(b₆R + b₇)) together with every
/// coefficient and the leading-order constant ρ.
pub fn explicit_upper_bound(sigma1: f64, sigma2: f64, r: f64, cs: f64) -> Result<ScalarBoundReport> {
    let (d1, d2) = window_coeffs(sigma1, sigma2, cs)?;
    let (s1, s2) = (sigma1 * sigma1, sigma2 * sigma2);
    let gap = s2 - s1;
    let te1 = 2.0 * E + 1.0;

    let a1 = 3.0 * s1 / (s2 * gap.sqrt());
    let a2 = 2.0f64.sqrt() * s1 / (sigma2 * gap.sqrt()) + 2.0;
    let a3 = s1 / gap.sqrt()
        * ((2.0 * PI * s2).ln().powi(2) + 24.0 * gap * gap / (s2 * s2) + PI * PI).sqrt();
    let c1 = 1.0 - s1 / s2;
    let c2 = 1.0 + s1 / s2;

    let b1 = te1 * te1 * d1 * d1 + (d1 + 1.0) * (d1 + 1.0);
    let b2 = (te1 * te1 + 1.0) * d2 * d2 / s1;
    let b3 = 2.0 * te1 * te1 * a1 * d1 * d1;
    let b4 = te1 * d1 * a2;
    let b5 = 2.0 * te1 * te1 * a1 * d2 * d2 + te1 * a2 * d2 + a3;
    let b6 = c1 * d1 - c2;
    let b7 = c1 * d2;

    let rho_coeff = b1;
    let explicit_upper =
        b1 * r * r / s1 + b2 + ((b3 * r * r + b4 * r + b5) / (b6 * r + b7)).ln();
    Ok(ScalarBoundReport {
        l_window: r * d1 + d2,
        kappa1: (sigma2 / sigma1).ln() - cs,
        d1,
        d2,
        a1,
        a2,
        a3,
        c1,
        c2,
        b1,
        b2,
        b3,
        b4,
        b5,
        b6,
        b7,
        rho_coeff,
        explicit_upper,
        lower: lower_bound_points(sigma1, sigma2, r, 0.0),
        implicit_zero_count: None,
    })
}

/// One sampled point of the zero-counting profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroCountSample {
    pub y: f64,
    /// g(y) + κ₁.
    pub value: f64,
}

/// Zero-counting result with the sampled profile for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroCountProfile {
    pub count: u32,
    /// True when some |g + κ₁| dipped below 10·abs_tol without a sign
    /// change nearby: a tangential zero may have been missed.
    pub grazing_warning: bool,
    pub kappa1: f64,
    pub l_window: f64,
    pub samples: Vec<ZeroCountSample>,
}

const ZERO_COUNT_GRID: usize = 4000;

/// Counts zeros of g(·) + κ₁ on [−L, L] for a converged scalar pmf; this
/// number upper-bounds the support size of the optimal input. C_s inside
/// L and κ₁ is the certified objective value of `pmf` itself.
pub fn implicit_zero_count(
    pmf: &ShellPmf,
    p: &ChannelParams,
    cfg: &QuadratureConfig,
) -> Result<u32> {
    Ok(implicit_zero_profile(pmf, p, cfg)?.count)
}

/// Same as [`implicit_zero_count`] but also returns the (y, g(y)+κ₁)
/// samples and a grazing diagnostic.
pub fn implicit_zero_profile(
    pmf: &ShellPmf,
    p: &ChannelParams,
    cfg: &QuadratureConfig,
) -> Result<ZeroCountProfile> {
    if p.n != 1 {
        return Err(Error::NotScalar(p.n));
    }
    let (sigma1, sigma2) = (p.sigma1_sq.sqrt(), p.sigma2_sq.sqrt());
    check_gap(sigma1, sigma2)?;
    let cs = secrecy_information(pmf, p, cfg)?.max(0.0);
    let l = window_l(sigma1, sigma2, p.radius, cs)?;
    let kappa1 = (sigma2 / sigma1).ln() - cs;
    let dens = ScalarOutputDensities::from_pmf(pmf, p.sigma1_sq, p.sigma2_sq);

    let mut samples = Vec::with_capacity(ZERO_COUNT_GRID);
    for i in 0..ZERO_COUNT_GRID {
        let y = -l + 2.0 * l * i as f64 / (ZERO_COUNT_GRID - 1) as f64;
        samples.push(ZeroCountSample {
            y,
            value: dens.g(y) + kappa1,
        });
    }

    let graze_tol = 10.0 * cfg.abs_tol;
    let mut count = 0u32;
    let mut grazing_warning = false;
    let mut last_sign = 0i8;
    for (i, s) in samples.iter().enumerate() {
        if !s.value.is_finite() {
            continue;
        }
        let sign = if s.value > 0.0 {
            1
        } else if s.value < 0.0 {
            -1
        } else {
            0
        };
        if sign == 0 {
            // Exact grid zero: count it and reset.
            count += 1;
            last_sign = 0;
            continue;
        }
        if last_sign != 0 && sign != last_sign {
            count += 1;
        } else if s.value.abs() < graze_tol {
            // Near-zero graze without an alternation on either side.
            let left_same = i == 0
                || samples[i - 1].value.signum() == s.value.signum();
            let right_same = i + 1 == samples.len()
                || samples[i + 1].value.signum() == s.value.signum();
            if left_same && right_same {
                grazing_warning = true;
            }
        }
        last_sign = sign;
    }
    Ok(ZeroCountProfile {
        count,
        grazing_warning,
        kappa1,
        l_window: l,
        samples,
    })
}

/// Convenience wrapper: explicit report plus the implicit count for a
/// converged scalar pmf.
pub fn scalar_bound_report(
    pmf: &ShellPmf,
    p: &ChannelParams,
    cfg: &QuadratureConfig,
) -> Result<ScalarBoundReport> {
    if p.n != 1 {
        return Err(Error::NotScalar(p.n));
    }
    let (sigma1, sigma2) = (p.sigma1_sq.sqrt(), p.sigma2_sq.sqrt());
    let cs = secrecy_information(pmf, p, cfg)?.max(0.0);
    let mut report = explicit_upper_bound(sigma1, sigma2, p.radius, cs)?;
    report.implicit_zero_count = Some(implicit_zero_count(pmf, p, cfg)?);
    Ok(report)
}
