//! Monte Carlo cross-validation of the quadrature path. Not a
//! production estimator: exists so a fully independent sampling route
//! can catch systematic bugs in the analytic integrals.

use crate::model::{ChannelParams, ShellPmf};
use crate::specfun::{ncx2_logpdf, NoncentralChiSq};
use crate::{Error, Result};
use rand::distributions::Distribution;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
}

const CHUNK: u64 = 1 << 14;
// Weyl-sequence increment: decorrelates per-chunk seeds.
const SEED_STRIDE: u64 = 0x9E3779B97F4A7C15;

fn chunk_seeds(seed: u64, samples: u64) -> Vec<(u64, u64)> {
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .map(|c| {
            let count = CHUNK.min(samples - c * CHUNK);
            (seed.wrapping_add(c.wrapping_mul(SEED_STRIDE)), count)
        })
        .collect()
}

fn reduce_moments(per_chunk: Vec<(f64, f64)>, samples: u64, seed: u64) -> McEstimate {
    // Ordered reduction: the fold order is fixed by chunk index, so the
    // result is independent of thread scheduling.
    let (sum, sum_sq) = per_chunk
        .into_iter()
        .fold((0.0, 0.0), |(s, q), (cs, cq)| (s + cs, q + cq));
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    McEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples,
        seed,
    }
}

/// Draws Y ~ chi2_n(ncp) by the Poisson-Gamma mixture:
/// K ~ Poisson(ncp/2), Y ~ Gamma(n/2 + K, scale 2).
fn sample_ncx2<R: Rng>(rng: &mut R, n: u32, ncp: f64) -> f64 {
    let k = if ncp > 0.0 {
        Poisson::new(ncp / 2.0).unwrap().sample(rng) as f64
    } else {
        0.0
    };
    Gamma::new(n as f64 / 2.0 + k, 2.0).unwrap().sample(rng)
}

/// Sampling estimate of I(X;Y₁) - I(X;Y₂) for a shell input: draws a
/// shell per sample, one output norm per channel, and averages the
/// difference of the per-channel information densities.
pub fn mc_secrecy_information(
    pmf: &ShellPmf,
    p: &ChannelParams,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    if samples < 10_000 {
        return Err(Error::Domain(format!(
            "mc_secrecy_information: need >= 1e4 samples, got {samples}"
        )));
    }
    let shells: Vec<(f64, f64)> = pmf.iter().collect();
    let log_probs: Vec<f64> = pmf.probs().iter().map(|q| q.ln()).collect();
    let half_n = p.n as f64 / 2.0;
    // Per-channel information density from the spherical decomposition:
    //   i_j = -E[ ln( m_j(Y) / Y^{n/2-1} ) ] - ln((2e)^{n/2} Γ(n/2)),
    // sampled at Y ~ chi2_n(ρ_K²/σj²) for a shell K ~ p. The additive
    // constant cancels in the channel difference but is kept so each
    // term is the channel's information in isolation.
    let constant = half_n * (2.0 * std::f64::consts::E).ln() + ln_gamma(half_n);
    let info_term = |rng: &mut ChaCha12Rng, sigma_sq: f64| -> f64 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut k = 0;
        for (i, &(_, prob)) in shells.iter().enumerate() {
            acc += prob;
            k = i;
            if u <= acc {
                break;
            }
        }
        let rho_k = shells[k].0;
        let y = sample_ncx2(rng, p.n, rho_k * rho_k / sigma_sq);
        let log_mix = {
            let mut m = f64::NEG_INFINITY;
            let logs: Vec<f64> = shells
                .iter()
                .zip(&log_probs)
                .map(|(&(rho, _), &lp)| {
                    let d = NoncentralChiSq::new(p.n, rho * rho / sigma_sq).unwrap();
                    let l = lp + ncx2_logpdf(d, y).unwrap_or(f64::NEG_INFINITY);
                    m = m.max(l);
                    l
                })
                .collect();
            m + logs.iter().map(|&l| (l - m).exp()).sum::<f64>().ln()
        };
        -(log_mix - (half_n - 1.0) * y.ln()) - constant
    };
    let per_chunk: Vec<(f64, f64)> = chunk_seeds(seed, samples)
        .into_par_iter()
        .map(|(chunk_seed, count)| {
            let mut rng = ChaCha12Rng::seed_from_u64(chunk_seed);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..count {
                let diff = info_term(&mut rng, p.sigma1_sq) - info_term(&mut rng, p.sigma2_sq);
                sum += diff;
                sum_sq += diff * diff;
            }
            (sum, sum_sq)
        })
        .collect();
    Ok(reduce_moments(per_chunk, samples, seed))
}

/// Direct-Gaussian sampling estimate of E[phi(||shift e₁ + √s Z||)].
pub fn mc_radial_expect<F: Fn(f64) -> f64 + Sync>(
    n: u32,
    shift: f64,
    s: f64,
    phi: F,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    if samples < 10_000 {
        return Err(Error::Domain(format!(
            "mc_radial_expect: need >= 1e4 samples, got {samples}"
        )));
    }
    if !(s > 0.0) || !(shift >= 0.0) {
        return Err(Error::Domain("mc_radial_expect: bad scale or shift".into()));
    }
    let per_chunk: Vec<(f64, f64)> = chunk_seeds(seed, samples)
        .into_par_iter()
        .map(|(chunk_seed, count)| {
            let mut rng = ChaCha12Rng::seed_from_u64(chunk_seed);
            let sqrt_s = s.sqrt();
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..count {
                let z0: f64 = StandardNormal.sample(&mut rng);
                let mut norm_sq = (shift + sqrt_s * z0).powi(2);
                for _ in 1..n {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    norm_sq += s * z * z;
                }
                let v = phi(norm_sq.sqrt());
                sum += v;
                sum_sq += v * v;
            }
            (sum, sum_sq)
        })
        .collect();
    Ok(reduce_moments(per_chunk, samples, seed))
}

/// Central log chi-square density helper shared by oracle comparisons.
#[doc(hidden)]
pub fn central_chi2_logpdf(dof: f64, y: f64) -> f64 {
    (dof / 2.0 - 1.0) * (y / 2.0).ln() - y / 2.0 - (2.0f64).ln() - ln_gamma(dof / 2.0)
}
