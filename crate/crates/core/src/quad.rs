//! Adaptive Gauss–Kronrod quadrature and the two integral shapes every
//! capacity formula reduces to: expectations of radial functions of
//! ||x + sqrt(s) Z|| and outer integrals of psi(s)/s^2 over noise scales.

use crate::model::QuadratureConfig;
use crate::specfun::{ncx2_logpdf, NoncentralChiSq};
use crate::{Error, Result};

// 15-point Kronrod abscissae (positive half), embedded 7-point Gauss
// weights, and Kronrod weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// One 15-point Kronrod pass over [a, b]: (estimate, error bound).
fn qk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut gauss = fc * WG[3];
    let mut kronrod = fc * WGK[7];
    let mut res_abs = kronrod.abs();
    let mut fv = [0.0f64; 15];
    fv[7] = fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[j] = f1;
        fv[14 - j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = kronrod * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }
    let estimate = kronrod * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * 1.0f64.min((200.0 * err / res_asc).powf(1.5));
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (estimate, err)
}

/// Adaptive integration of `f` over [a, b]: worst-interval bisection with
/// a fixed summation order, so identical inputs give bit-identical output.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    struct Seg {
        a: f64,
        b: f64,
        val: f64,
        err: f64,
    }
    let (val, err) = qk15(f, a, b);
    let mut segs = vec![Seg { a, b, val, err }];
    let mut splits = 0u32;
    loop {
        let total: f64 = segs.iter().map(|s| s.val).sum();
        let total_err: f64 = segs.iter().map(|s| s.err).sum();
        let tol = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        if splits >= cfg.max_subdivisions {
            return Err(Error::QuadratureNonConvergence {
                residual: total_err,
                subdivisions: splits,
            });
        }
        // Deterministic worst-first: largest error, ties broken by the
        // leftmost endpoint.
        let mut worst = 0;
        for (i, s) in segs.iter().enumerate() {
            if s.err > segs[worst].err {
                worst = i;
            }
        }
        let Seg { a, b, .. } = segs[worst];
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            // Interval is at floating-point resolution; accept as is.
            break;
        }
        let (v1, e1) = qk15(f, a, mid);
        let (v2, e2) = qk15(f, mid, b);
        segs[worst] = Seg {
            a,
            b: mid,
            val: v1,
            err: e1,
        };
        segs.push(Seg {
            a: mid,
            b,
            val: v2,
            err: e2,
        });
        splits += 1;
    }
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    Ok(segs.iter().map(|s| s.val).sum())
}

/// E[phi(||shift e_1 + sqrt(s) Z||)] for Z ~ N(0, I_n), reduced to the
/// 1-D noncentral chi-square integral
///   integral of phi(sqrt(s y)) f_{chi2_n(shift^2/s)}(y) dy
/// truncated at `tail_sigmas` standard deviations around the mean.
/// A y = u^2 substitution removes the integrable y^{-1/2} endpoint
/// singularity when dof < 2.
pub fn radial_expect<F: Fn(f64) -> f64>(
    n: u32,
    shift: f64,
    s: f64,
    phi: F,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("radial_expect: scale {s} <= 0")));
    }
    if !(shift >= 0.0) {
        return Err(Error::Domain(format!("radial_expect: shift {shift} < 0")));
    }
    let lam = shift * shift / s;
    expect_ncx2(n, lam, None, |y| phi((s * y).sqrt()), cfg)
}

/// E[g(Y)] for Y ~ chi2_n(ncp), by quadrature against the pdf on a
/// truncated range. `hi_hint` widens the upper limit when the integrand
/// carries structure beyond the weight's own tail (e.g. mixture
/// components at larger noncentralities).
pub fn expect_ncx2<F: Fn(f64) -> f64>(
    n: u32,
    ncp: f64,
    hi_hint: Option<f64>,
    g: F,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain("expect_ncx2: n must be >= 1".into()));
    }
    let d = NoncentralChiSq::new(n, ncp)?;
    let m = d.mean();
    let sd = d.variance().sqrt();
    let lo = (m - cfg.tail_sigmas * sd).max(0.0);
    let mut hi = m + cfg.tail_sigmas * sd;
    if let Some(h) = hi_hint {
        hi = hi.max(h);
    }
    // At small dof the chi-square tail is heavier (relative to sd) than a
    // Gaussian's, and a pure sigma rule can strand ~1e-5 of mass; extend
    // until the actual tail is negligible. The cdf's own Poisson-mixture
    // truncation saturates it near 1 − 2e-13 at large parameters, so the
    // test threshold must sit above that floor or the loop never stops.
    for _ in 0..60 {
        if 1.0 - crate::specfun::ncx2_cdf(d, hi)? <= 1e-12 {
            break;
        }
        hi *= 1.25;
    }
    if n < 2 && lo == 0.0 {
        // y = u^2 removes the integrable y^{-1/2} endpoint singularity.
        let f = |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let y = u * u;
            let log_pdf = ncx2_logpdf(d, y).unwrap_or(f64::NEG_INFINITY);
            g(y) * (log_pdf + (2.0 * u).ln()).exp()
        };
        integrate(&f, 0.0, hi.sqrt(), cfg)
    } else {
        let f = |y: f64| {
            let log_pdf = ncx2_logpdf(d, y).unwrap_or(f64::NEG_INFINITY);
            g(y) * log_pdf.exp()
        };
        // A caller's hi_hint can stretch the interval far past the bulk of
        // the density; integrate the bulk as its own panel so the initial
        // nodes of a huge panel cannot straddle (and miss) the spike.
        let bulk_hi = m + cfg.tail_sigmas * sd;
        if hi > 2.0 * bulk_hi {
            Ok(integrate(&f, lo, bulk_hi, cfg)? + integrate(&f, bulk_hi, hi, cfg)?)
        } else {
            integrate(&f, lo, hi, cfg)
        }
    }
}

/// Integral of psi(s)/s^2 over s in [lo, hi]. The t = 1/s substitution
/// turns it into the well-conditioned integral of psi(1/t) dt over
/// [1/hi, 1/lo], which also makes huge truncation points (hi up to
/// R^2/abs_tol) cheap.
pub fn scale_integral_range<F: Fn(f64) -> f64>(
    lo: f64,
    hi: f64,
    psi: F,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if !(0.0 < lo && lo < hi) {
        return Err(Error::Domain(format!(
            "scale_integral: need 0 < lo < hi, got [{lo}, {hi}]"
        )));
    }
    integrate(&|t: f64| psi(1.0 / t), 1.0 / hi, 1.0 / lo, cfg)
}

/// Integral of psi(s)/s^2 over the noise-scale window [sigma1_sq, sigma2_sq].
pub fn scale_integral<F: Fn(f64) -> f64>(
    sigma1_sq: f64,
    sigma2_sq: f64,
    psi: F,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    scale_integral_range(sigma1_sq, sigma2_sq, psi, cfg)
}
