//! Capacity estimation beyond the low-amplitude regime: alternating
//! gradient ascent on shell radii and exponential-tilting probability
//! updates, certified by ε-KKT validation with add-point escalation.

use crate::density::{xi, xi_prime};
use crate::model::{ChannelParams, QuadratureConfig, ShellPmf};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// KKT tolerance ε.
    pub epsilon: f64,
    /// Alternations of gradient ascent and probability tilting per
    /// validation attempt.
    pub inner_rounds: u32,
    pub ga_max_iters: u32,
    pub ba_max_iters: u32,
    pub ga_tol: f64,
    pub ba_tol: f64,
    pub kkt_grid: u32,
    pub backtrack_alpha: f64,
    pub backtrack_beta: f64,
    pub max_points: usize,
    /// Cap on add-point escalations; converts a livelock into an error.
    pub outer_cap: u32,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            epsilon: 1e-6,
            inner_rounds: 30,
            ga_max_iters: 200,
            ba_max_iters: 500,
            ga_tol: 1e-9,
            ba_tol: 1e-9,
            kkt_grid: 4000,
            backtrack_alpha: 0.25,
            backtrack_beta: 0.5,
            max_points: 64,
            outer_cap: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub valid: bool,
    /// max over support of |Ξ(t) - Ξ(R)|.
    pub worst_support_violation: f64,
    /// max over [0, R] of Ξ(t) - Ξ(R).
    pub worst_interior_violation: f64,
    /// Location of the interior maximum of Ξ.
    pub argmax_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub pmf: ShellPmf,
    /// Capacity estimate Ξ(R; pmf) in nats.
    pub capacity: f64,
    pub kkt: KktReport,
    pub objective_trace: Vec<f64>,
    pub points_added: u32,
}

const PRUNE_THRESHOLD: f64 = 1e-12;

/// The optimization objective: Σ_k p_k Ξ(ρ_k; P), the secrecy
/// information of the shell input.
pub fn secrecy_information(
    pmf: &ShellPmf,
    p: &ChannelParams,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if p.sigma1_sq == p.sigma2_sq {
        return Ok(0.0);
    }
    let vals = xi_on_support(pmf, p, cfg)?;
    Ok(pmf.probs().iter().zip(&vals).map(|(pk, v)| pk * v).sum())
}

fn xi_on_support(pmf: &ShellPmf, p: &ChannelParams, cfg: &QuadratureConfig) -> Result<Vec<f64>> {
    pmf.radii()
        .par_iter()
        .map(|&rho| xi(rho, pmf, p, cfg))
        .collect()
}

/// One backtracking-Armijo ascent step on the radii with probabilities
/// held fixed. Gradient component k is p_k Ξ'(ρ_k; P); radii are
/// projected onto [0, R]. Returns the updated pmf and whether the line
/// search stalled (in which case the input is returned unchanged).
pub fn gradient_ascent_step(
    pmf: &ShellPmf,
    p: &ChannelParams,
    opt: &OptimizerConfig,
    cfg: &QuadratureConfig,
) -> Result<(ShellPmf, bool)> {
    let grad: Vec<f64> = pmf
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(rho, prob)| Ok(prob * xi_prime(rho, pmf, p, cfg)?))
        .collect::<Result<_>>()?;
    let grad_norm_sq: f64 = grad.iter().map(|g| g * g).sum();
    if grad_norm_sq < 1e-24 {
        return Ok((pmf.clone(), false));
    }
    let objective = secrecy_information(pmf, p, cfg)?;
    // Initial step keeps the largest move within a quarter of the ball.
    let max_grad = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mut step = (0.25 * p.radius / max_grad).min(1e3);
    while step > 1e-14 {
        let radii: Vec<f64> = pmf
            .radii()
            .iter()
            .zip(&grad)
            .map(|(&rho, &g)| (rho + step * g).clamp(0.0, p.radius))
            .collect();
        let candidate = ShellPmf::new(radii, pmf.probs().to_vec())?;
        let new_objective = secrecy_information(&candidate, p, cfg)?;
        if new_objective - objective >= opt.backtrack_alpha * step * grad_norm_sq {
            return Ok((candidate, false));
        }
        step *= opt.backtrack_beta;
    }
    Ok((pmf.clone(), true))
}

/// Probability update with radii held fixed: exponential tilting
/// p_k ← p_k exp(Ξ(ρ_k; P)) / Z, iterated to a fixed point at which Ξ
/// is constant across the surviving support.
pub fn blahut_arimoto_step(
    pmf: &ShellPmf,
    p: &ChannelParams,
    opt: &OptimizerConfig,
    cfg: &QuadratureConfig,
) -> Result<ShellPmf> {
    let mut current = pmf.clone();
    let mut vals = xi_on_support(&current, p, cfg)?;
    let mut objective: f64 = current.probs().iter().zip(&vals).map(|(q, v)| q * v).sum();
    // Adaptive tilting exponent. t = 1 is the plain update, which is
    // monotone by construction; larger t accelerates the (otherwise
    // painfully slow) extinction of dominated shells whose Ξ trails the
    // leaders by only ~1e-3. Aggressive steps are kept only while the
    // objective does not decrease.
    let mut t = 1.0f64;
    for _ in 0..opt.ba_max_iters {
        // Stabilized tilting: subtract the max before exponentiating.
        let vmax = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let vmin = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        // Cap the per-iteration log-odds change at 2: a trailing shell's
        // Ξ rises as its mass drains, so extinction must stay gradual
        // enough for that feedback to act before the shell is pruned.
        let spread = vmax - vmin;
        let t_eff = if spread > 0.0 { t.min(2.0 / spread) } else { t };
        let unnorm: Vec<f64> = current
            .probs()
            .iter()
            .zip(&vals)
            .map(|(pk, v)| pk * (t_eff * (v - vmax)).exp())
            .collect();
        let z: f64 = unnorm.iter().sum();
        let new_probs: Vec<f64> = unnorm.iter().map(|u| u / z).collect();
        let delta = new_probs
            .iter()
            .zip(current.probs())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let candidate =
            ShellPmf::new(current.radii().to_vec(), new_probs)?.pruned(PRUNE_THRESHOLD);
        let cand_vals = xi_on_support(&candidate, p, cfg)?;
        let cand_obj: f64 = candidate
            .probs()
            .iter()
            .zip(&cand_vals)
            .map(|(q, v)| q * v)
            .sum();
        if t <= 1.0 || cand_obj >= objective - 1e-13 {
            current = candidate;
            vals = cand_vals;
            objective = cand_obj;
            t = (t * 2.0).min(1e6);
            // Converged only when the probabilities are stationary AND Ξ
            // is flat across the surviving support; |Δp| alone is fooled
            // by a near-extinct shell whose mass is reviving from ~0.
            let new_spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - vals.iter().cloned().fold(f64::INFINITY, f64::min);
            if delta < opt.ba_tol && new_spread <= 0.5 * opt.epsilon {
                break;
            }
        } else {
            t = (t / 4.0).max(1.0);
        }
    }
    Ok(current)
}

/// Scans the ε-KKT conditions: Ξ must be constant (within ε) on the
/// support and must not exceed Ξ(R) by more than ε anywhere on [0, R].
/// The grid argmax is sharpened by one golden-section pass.
pub fn kkt_validate(
    pmf: &ShellPmf,
    p: &ChannelParams,
    epsilon: f64,
    kkt_grid: u32,
    cfg: &QuadratureConfig,
) -> Result<KktReport> {
    let r = p.radius;
    let xi_r = xi(r, pmf, p, cfg)?;
    let support_vals = xi_on_support(pmf, p, cfg)?;
    let worst_support_violation = support_vals
        .iter()
        .map(|v| (v - xi_r).abs())
        .fold(0.0f64, f64::max);

    let grid_vals: Vec<(f64, f64)> = (0..kkt_grid)
        .into_par_iter()
        .map(|i| {
            let t = r * i as f64 / (kkt_grid - 1) as f64;
            Ok((t, xi(t, pmf, p, cfg)?))
        })
        .collect::<Result<_>>()?;
    let (mut argmax_t, mut max_val) = grid_vals
        .iter()
        .cloned()
        .fold((0.0, f64::NEG_INFINITY), |acc, (t, v)| {
            if v > acc.1 {
                (t, v)
            } else {
                acc
            }
        });
    // Golden-section refinement in the bracketing grid cells.
    let cell = r / (kkt_grid - 1) as f64;
    let (mut a, mut b) = ((argmax_t - cell).max(0.0), (argmax_t + cell).min(r));
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    for _ in 0..40 {
        let c = b - phi * (b - a);
        let e = a + phi * (b - a);
        if xi(c, pmf, p, cfg)? < xi(e, pmf, p, cfg)? {
            a = c;
        } else {
            b = e;
        }
    }
    let t_ref = 0.5 * (a + b);
    let v_ref = xi(t_ref, pmf, p, cfg)?;
    if v_ref > max_val {
        max_val = v_ref;
        argmax_t = t_ref;
    }
    let worst_interior_violation = max_val - xi_r;
    Ok(KktReport {
        valid: worst_support_violation <= epsilon && worst_interior_violation <= epsilon,
        worst_support_violation,
        worst_interior_violation,
        argmax_t,
    })
}

/// The boundary point R belongs to every optimal support; move the
/// outermost shell onto it when it has drifted off.
fn snap_outermost(pmf: &ShellPmf, p: &ChannelParams) -> Result<ShellPmf> {
    if pmf.contains_radius(p.radius, 1e-9 * p.radius.max(1.0)) {
        return Ok(pmf.clone());
    }
    let mut radii = pmf.radii().to_vec();
    let last = radii.len() - 1;
    radii[last] = p.radius;
    Ok(ShellPmf::new(radii, pmf.probs().to_vec())?)
}

fn golden_max<F: Fn(f64) -> Result<f64>>(f: &F, mut a: f64, mut b: f64) -> Result<f64> {
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    for _ in 0..48 {
        let c = b - phi * (b - a);
        let e = a + phi * (b - a);
        if f(c)? < f(e)? {
            a = c;
        } else {
            b = e;
        }
    }
    Ok(0.5 * (a + b))
}

/// Moves every interior support point to the local maximizer of Ξ within
/// its cell (bounded by neighbor midpoints), then merges radii that have
/// collapsed onto each other, summing their probabilities. Line-search
/// ascent cannot resolve Ξ differences below the quadrature noise floor,
/// which otherwise leaves clusters of near-duplicate points that stall
/// the KKT certificate; relocating against Ξ directly targets the
/// first-order condition Ξ'(ρ_k) = 0 at interior optima.
fn relocate_support(pmf: &ShellPmf, p: &ChannelParams, cfg: &QuadratureConfig) -> Result<ShellPmf> {
    if pmf.len() <= 1 {
        return Ok(pmf.clone());
    }
    // Coordinate ascent on the true objective: each interior radius is
    // golden-searched within its neighbor-midpoint cell to maximize the
    // secrecy information of the moved pmf (probabilities fixed). Moving
    // to the argmax of Ξ under the *old* mixture is tempting but wrong —
    // the mixture shifts with the point and the loop can cycle forever.
    let probs = pmf.probs().to_vec();
    let mut new_radii = pmf.radii().to_vec();
    for k in 0..new_radii.len() {
        let rho = new_radii[k];
        if rho == 0.0 || (rho - p.radius).abs() < 1e-12 * p.radius.max(1.0) {
            continue;
        }
        let lo = if k == 0 {
            0.0
        } else {
            0.5 * (new_radii[k - 1] + rho)
        };
        let hi = if k + 1 == new_radii.len() {
            p.radius
        } else {
            0.5 * (rho + new_radii[k + 1])
        };
        let moved = |t: f64| -> Result<f64> {
            let mut radii = new_radii.clone();
            radii[k] = t;
            let cand = ShellPmf::new(radii, probs.clone())?;
            secrecy_information(&cand, p, cfg)
        };
        let best = golden_max(&moved, lo, hi)?;
        // Only move when it genuinely improves: golden search can land on
        // a flat plateau a hair below the current point.
        if moved(best)? >= moved(rho)? {
            new_radii[k] = best;
        }
    }
    // Merge coincident radii (probability-weighted position, snapped to
    // the boundary points 0 and R when they participate).
    let merge_tol = 1e-5 * p.radius.max(1.0);
    let mut order: Vec<usize> = (0..new_radii.len()).collect();
    order.sort_by(|&i, &j| new_radii[i].total_cmp(&new_radii[j]));
    let mut merged_radii: Vec<f64> = Vec::new();
    let mut merged_probs: Vec<f64> = Vec::new();
    for idx in order {
        let (r, q) = (new_radii[idx], probs[idx]);
        match merged_radii.last_mut() {
            Some(last) if (r - *last).abs() <= merge_tol => {
                let qp = merged_probs.last_mut().unwrap();
                let w = *qp + q;
                let pos = (*last * *qp + r * q) / w;
                *last = if *qp == 0.0 { r } else { pos };
                *qp = w;
            }
            _ => {
                merged_radii.push(r);
                merged_probs.push(q);
            }
        }
    }
    for r in merged_radii.iter_mut() {
        if r.abs() <= merge_tol {
            *r = 0.0;
        } else if (*r - p.radius).abs() <= merge_tol {
            *r = p.radius;
        }
    }
    Ok(ShellPmf::new(merged_radii, merged_probs)?)
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Some(x)
}

/// Newton refinement of the stationarity system at a candidate optimum:
/// Ξ(ρ_j) equal across the support and Ξ′(ρ_j) = 0 at every radius
/// strictly inside (0, R). The alternating ascent gets within ~1e-4 of
/// the fixed point quickly but closes the remaining gap only linearly;
/// Newton finishes the job quadratically. Returns `None` when the system
/// does not converge from the given start (caller keeps its iterate).
fn polish(
    pmf: &ShellPmf,
    p: &ChannelParams,
    cfg: &QuadratureConfig,
) -> Result<Option<ShellPmf>> {
    let mut radii = pmf.radii().to_vec();
    let mut probs = pmf.probs().to_vec();
    'restart: loop {
        let k = radii.len();
        if k <= 1 {
            return Ok(None);
        }
        let interior: Vec<usize> = (0..k)
            .filter(|&j| radii[j] > 1e-12 && radii[j] < p.radius * (1.0 - 1e-12))
            .collect();
        let m = interior.len();
        let dim = m + k; // interior radii, probs[1..], nu
        let build = |x: &[f64]| -> Result<(ShellPmf, f64)> {
            let mut r = radii.clone();
            for (i, &j) in interior.iter().enumerate() {
                r[j] = x[i];
            }
            let tail: f64 = x[m..m + k - 1].iter().sum();
            let mut q = vec![1.0 - tail];
            q.extend_from_slice(&x[m..m + k - 1]);
            if q.iter().any(|&v| !(v > 1e-12 && v < 1.0)) {
                return Err(Error::Domain("polish: probability left (0,1)".into()));
            }
            let mut sorted = r.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted != r || r[0] < 0.0 || *r.last().unwrap() > p.radius + 1e-12 {
                return Err(Error::Domain("polish: radii left their cells".into()));
            }
            let cand = ShellPmf::new(r, q)?;
            if cand.len() != k {
                return Err(Error::Domain("polish: radii collided".into()));
            }
            Ok((cand, x[dim - 1]))
        };
        let residual = |x: &[f64]| -> Result<Vec<f64>> {
            let (cand, nu) = build(x)?;
            let mut f = Vec::with_capacity(dim);
            for &r in cand.radii() {
                f.push(xi(r, &cand, p, cfg)? - nu);
            }
            for &j in &interior {
                f.push(xi_prime(cand.radii()[j], &cand, p, cfg)?);
            }
            Ok(f)
        };
        let mut x = Vec::with_capacity(dim);
        for &j in &interior {
            x.push(radii[j]);
        }
        x.extend_from_slice(&probs[1..]);
        x.push(secrecy_information(&ShellPmf::new(radii.clone(), probs.clone())?, p, cfg)?);
        let norm = |f: &[f64]| f.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let mut f = match residual(&x) {
            Ok(f) => f,
            Err(_) => return Ok(None),
        };
        for _ in 0..30 {
            if norm(&f) < 1e-11 {
                let (cand, _) = build(&x)?;
                return Ok(Some(cand));
            }
            // Forward-difference Jacobian; the system is tiny (≤ 2k+1).
            let mut jac = vec![vec![0.0; dim]; dim];
            for col in 0..dim {
                let h = 1e-7 * x[col].abs().max(1e-3);
                let mut xh = x.clone();
                xh[col] += h;
                let fh = match residual(&xh) {
                    Ok(fh) => fh,
                    Err(_) => return Ok(None),
                };
                for row in 0..dim {
                    jac[row][col] = (fh[row] - f[row]) / h;
                }
            }
            let Some(step) = solve_dense(jac, f.clone()) else {
                return Ok(None);
            };
            let mut t = 1.0;
            let mut advanced = false;
            for _ in 0..12 {
                let xt: Vec<f64> = x.iter().zip(&step).map(|(&a, &s)| a - t * s).collect();
                if let Ok(ft) = residual(&xt) {
                    if norm(&ft) < norm(&f) {
                        x = xt;
                        f = ft;
                        advanced = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !advanced {
                // A shell whose mass is collapsing blocks every step:
                // drop it and solve the smaller system instead.
                let tail: f64 = x[m..m + k - 1].iter().sum();
                let mut q = vec![1.0 - tail];
                q.extend_from_slice(&x[m..m + k - 1]);
                if let Some(jmin) = (0..k).min_by(|&i, &j| q[i].total_cmp(&q[j])) {
                    if q[jmin] < 1e-4 && k > 2 {
                        let total: f64 = 1.0 - q[jmin];
                        radii.remove(jmin);
                        q.remove(jmin);
                        probs = q.iter().map(|&v| v / total).collect();
                        continue 'restart;
                    }
                }
                return Ok(None);
            }
        }
        return Ok(None);
    }
}

/// Greedy merge of adjacent shells: a close pair is fused (probability-
/// weighted position, probabilities summed) whenever the fused pmf loses
/// no more than `max_drop` of secrecy information. Without this, a single
/// physical mass point can persist as two near-duplicates that the KKT
/// check tolerates but that inflate the reported support.
fn consolidate(
    pmf: &ShellPmf,
    p: &ChannelParams,
    cfg: &QuadratureConfig,
    max_drop: f64,
) -> Result<ShellPmf> {
    let mut current = pmf.clone();
    let gap_cap = 0.05 * p.radius.max(1.0);
    let snap_tol = 1e-9 * p.radius.max(1.0);
    'merge: loop {
        if current.len() <= 1 {
            return Ok(current);
        }
        let radii = current.radii().to_vec();
        let probs = current.probs().to_vec();
        let mut pairs: Vec<usize> = (0..radii.len() - 1)
            .filter(|&i| radii[i + 1] - radii[i] <= gap_cap)
            .collect();
        if pairs.is_empty() {
            return Ok(current);
        }
        pairs.sort_by(|&i, &j| (radii[i + 1] - radii[i]).total_cmp(&(radii[j + 1] - radii[j])));
        let obj = secrecy_information(&current, p, cfg)?;
        for i in pairs {
            let w = probs[i] + probs[i + 1];
            let mut pos = (radii[i] * probs[i] + radii[i + 1] * probs[i + 1]) / w;
            // A pair touching a boundary point fuses onto the boundary.
            if radii[i] <= snap_tol {
                pos = 0.0;
            } else if (radii[i + 1] - p.radius).abs() <= snap_tol {
                pos = p.radius;
            }
            let mut new_r = radii.clone();
            let mut new_p = probs.clone();
            new_r.remove(i + 1);
            new_p.remove(i + 1);
            new_r[i] = pos;
            new_p[i] = w;
            let cand = ShellPmf::new(new_r, new_p)?;
            if secrecy_information(&cand, p, cfg)? >= obj - max_drop {
                current = cand;
                continue 'merge;
            }
        }
        return Ok(current);
    }
}

/// Escalation move after a failed KKT check: adds a mass point at the
/// interior argmax of Ξ and resets all probabilities to equiprobable.
pub fn add_point(pmf: &ShellPmf, kkt: &KktReport, max_points: usize) -> Result<ShellPmf> {
    let mut radii = pmf.radii().to_vec();
    let dedup_tol = 1e-6 * radii.iter().cloned().fold(1.0f64, f64::max);
    if !pmf.contains_radius(kkt.argmax_t, dedup_tol) {
        if radii.len() >= max_points {
            return Err(Error::TooManyPoints(max_points));
        }
        radii.push(kkt.argmax_t);
    }
    let k = radii.len();
    Ok(ShellPmf::new(radii, vec![1.0 / k as f64; k])?)
}

/// Full capacity estimation: alternate radius ascent and probability
/// tilting, validate the ε-KKT certificate, escalate with add-point on
/// failure. Returns the certified pmf and capacity Ξ(R; P).
pub fn optimize(
    p: &ChannelParams,
    opt: &OptimizerConfig,
    cfg: &QuadratureConfig,
    initial: Option<ShellPmf>,
) -> Result<OptimizeResult> {
    if p.degraded() {
        let pmf = ShellPmf::single_shell(p.radius);
        return Ok(OptimizeResult {
            pmf,
            capacity: 0.0,
            kkt: KktReport {
                valid: true,
                worst_support_violation: 0.0,
                worst_interior_violation: 0.0,
                argmax_t: p.radius,
            },
            objective_trace: vec![0.0],
            points_added: 0,
        });
    }
    let mut pmf = initial.unwrap_or_else(|| ShellPmf::single_shell(p.radius));
    let mut trace = Vec::new();
    let mut points_added = 0u32;
    for escalation in 0..=opt.outer_cap {
        let mut prev_obj = f64::NEG_INFINITY;
        for _ in 0..opt.inner_rounds {
            let (stepped, stalled) = gradient_ascent_step(&pmf, p, opt, cfg)?;
            pmf = stepped;
            trace.push(secrecy_information(&pmf, p, cfg)?);
            // Keep the boundary shell pinned at R: it belongs to every
            // optimal support, and letting ascent drag it inward (toward
            // the unconstrained optimum) only to re-snap later causes an
            // oscillation that never converges.
            pmf = snap_outermost(&pmf, p)?;
            if std::env::var_os("WIRETAP_TRACE").is_some() {
                eprintln!("  grad: radii={:?} probs={:?}", pmf.radii(), pmf.probs());
            }
            pmf = relocate_support(&pmf, p, cfg)?;
            if std::env::var_os("WIRETAP_TRACE").is_some() {
                eprintln!("  reloc: radii={:?} probs={:?}", pmf.radii(), pmf.probs());
            }
            pmf = blahut_arimoto_step(&pmf, p, opt, cfg)?;
            if std::env::var_os("WIRETAP_TRACE").is_some() {
                eprintln!("  ba: radii={:?} probs={:?}", pmf.radii(), pmf.probs());
            }
            pmf = consolidate(&pmf, p, cfg, 0.25 * opt.epsilon)?;
            if stalled && pmf.len() == 1 {
                break;
            }
            // Rounds alternate radius and probability ascent; once a full
            // round stops moving the objective there is nothing left for
            // further rounds to do and the KKT check should arbitrate.
            let obj = *trace.last().unwrap();
            if (obj - prev_obj).abs() < 0.01 * opt.epsilon {
                break;
            }
            prev_obj = obj;
        }
        pmf = snap_outermost(&pmf, p)?;
        if pmf.len() > 1 {
            if let Some(polished) = polish(&pmf, p, cfg)? {
                let before = secrecy_information(&pmf, p, cfg)?;
                let after = secrecy_information(&polished, p, cfg)?;
                if after >= before - 0.25 * opt.epsilon {
                    pmf = polished;
                }
            }
        }
        let kkt = kkt_validate(&pmf, p, opt.epsilon, opt.kkt_grid, cfg)?;
        if std::env::var_os("WIRETAP_TRACE").is_some() {
            eprintln!(
                "escalation {escalation}: k={} radii={:?} probs={:?} valid={} argmax={:.6} supp={:.2e} int={:.2e}",
                pmf.len(),
                pmf.radii(),
                pmf.probs(),
                kkt.valid,
                kkt.argmax_t,
                kkt.worst_support_violation,
                kkt.worst_interior_violation
            );
        }
        if kkt.valid {
            let capacity = xi(p.radius, &pmf, p, cfg)?;
            return Ok(OptimizeResult {
                pmf,
                capacity,
                kkt,
                objective_trace: trace,
                points_added,
            });
        }
        if escalation == opt.outer_cap {
            return Err(Error::NonConvergence(opt.outer_cap));
        }
        pmf = add_point(&pmf, &kkt, opt.max_points)?;
        points_added += 1;
    }
    Err(Error::NonConvergence(opt.outer_cap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regime::capacity_single_shell_integral;

    fn qcfg() -> QuadratureConfig {
        QuadratureConfig {
            rel_tol: 1e-8,
            ..QuadratureConfig::default()
        }
    }

    fn ocfg() -> OptimizerConfig {
        OptimizerConfig::default()
    }

    #[test]
    fn objective_equals_capacity_for_single_shell() {
        let p = ChannelParams::new(1.0, 1.5, 2, 1.0).unwrap();
        let pmf = ShellPmf::single_shell(1.0);
        let obj = secrecy_information(&pmf, &p, &qcfg()).unwrap();
        let cap = capacity_single_shell_integral(&p, &qcfg()).unwrap();
        assert!((obj - cap).abs() < 1e-6, "{obj} vs {cap}");
    }

    #[test]
    fn objective_zero_for_equal_variances() {
        let p = ChannelParams::new(1.0, 1.0, 2, 1.0).unwrap();
        let pmf = ShellPmf::single_shell(1.0);
        assert_eq!(secrecy_information(&pmf, &p, &qcfg()).unwrap(), 0.0);
    }

    #[test]
    fn duplicated_point_matches_merged() {
        let p = ChannelParams::new(1.0, 1.5, 2, 1.0).unwrap();
        let merged = ShellPmf::new(vec![0.5, 1.0], vec![0.5, 0.5]).unwrap();
        // Radii within the merge tolerance collapse in the constructor.
        let dup = ShellPmf::new(vec![0.5, 1.0, 1.0 + 1e-12], vec![0.5, 0.25, 0.25]).unwrap();
        let a = secrecy_information(&merged, &p, &qcfg()).unwrap();
        let b = secrecy_information(&dup, &p, &qcfg()).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn gradient_step_moves_interior_shell_outward() {
        // A single shell strictly inside the low-amplitude ball wants to
        // expand toward R.
        let p = ChannelParams::new(1.0, 1.5, 2, 1.6).unwrap();
        let pmf = ShellPmf::single_shell(0.9 * 1.6);
        let (next, stalled) = gradient_ascent_step(&pmf, &p, &ocfg(), &qcfg()).unwrap();
        assert!(!stalled);
        assert!(next.radii()[0] > pmf.radii()[0]);
    }

    #[test]
    fn gradient_step_never_decreases_objective() {
        let p = ChannelParams::new(1.0, 1.5, 2, 1.5).unwrap();
        let pmf = ShellPmf::new(vec![0.4, 1.5], vec![0.3, 0.7]).unwrap();
        let before = secrecy_information(&pmf, &p, &qcfg()).unwrap();
        let (next, _) = gradient_ascent_step(&pmf, &p, &ocfg(), &qcfg()).unwrap();
        let after = secrecy_information(&next, &p, &qcfg()).unwrap();
        assert!(after >= before - 1e-10, "{after} < {before}");
    }

    #[test]
    fn ba_is_identity_for_single_shell() {
        let p = ChannelParams::new(1.0, 1.5, 2, 1.0).unwrap();
        let pmf = ShellPmf::single_shell(1.0);
        let next = blahut_arimoto_step(&pmf, &p, &ocfg(), &qcfg()).unwrap();
        assert_eq!(next.probs(), &[1.0]);
    }

    #[test]
    fn ba_tilts_toward_better_shell() {
        let p = ChannelParams::new(1.0, 1.5, 2, 1.6).unwrap();
        let pmf = ShellPmf::new(vec![0.2, 1.6], vec![0.5, 0.5]).unwrap();
        let one_round = OptimizerConfig {
            ba_max_iters: 1,
            ..ocfg()
        };
        let next = blahut_arimoto_step(&pmf, &p, &one_round, &qcfg()).unwrap();
        // Ξ(1.6) > Ξ(0.2) here, so mass must flow outward.
        assert!(next.probs()[1] > 0.5, "probs = {:?}", next.probs());
    }

    #[test]
    fn kkt_accepts_single_shell_below_threshold() {
        let p = ChannelParams::new(1.0, 1.5, 2, 1.0).unwrap();
        let pmf = ShellPmf::single_shell(1.0);
        let report = kkt_validate(&pmf, &p, 1e-6, 800, &qcfg()).unwrap();
        assert!(report.valid, "{report:?}");
    }

    #[test]
    fn kkt_rejects_single_shell_beyond_threshold() {
        // R̄₂(1, 1.5) ≈ 1.687; at 1.5x the shell alone cannot be optimal.
        let p = ChannelParams::new(1.0, 1.5, 2, 1.5 * 1.687).unwrap();
        let pmf = ShellPmf::single_shell(p.radius);
        let report = kkt_validate(&pmf, &p, 1e-6, 800, &qcfg()).unwrap();
        assert!(!report.valid, "{report:?}");
        assert!(report.argmax_t < p.radius, "argmax at {}", report.argmax_t);
    }

    #[test]
    fn add_point_appends_and_resets() {
        let pmf = ShellPmf::single_shell(2.0);
        let kkt = KktReport {
            valid: false,
            worst_support_violation: 0.0,
            worst_interior_violation: 0.1,
            argmax_t: 0.0,
        };
        let next = add_point(&pmf, &kkt, 64).unwrap();
        assert_eq!(next.radii(), &[0.0, 2.0]);
        assert_eq!(next.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn add_point_dedups_existing_radius() {
        let pmf = ShellPmf::new(vec![0.0, 2.0], vec![0.7, 0.3]).unwrap();
        let kkt = KktReport {
            valid: false,
            worst_support_violation: 0.0,
            worst_interior_violation: 0.1,
            argmax_t: 1e-9,
        };
        let next = add_point(&pmf, &kkt, 64).unwrap();
        assert_eq!(next.len(), 2);
        assert_eq!(next.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn add_point_respects_cap() {
        let pmf = ShellPmf::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let kkt = KktReport {
            valid: false,
            worst_support_violation: 0.0,
            worst_interior_violation: 0.1,
            argmax_t: 1.5,
        };
        assert!(matches!(
            add_point(&pmf, &kkt, 2),
            Err(Error::TooManyPoints(2))
        ));
    }

    #[test]
    fn optimize_low_amplitude_returns_single_shell() {
        let p = ChannelParams::new(1.0, 1.5, 2, 1.0).unwrap();
        let fast = OptimizerConfig {
            inner_rounds: 5,
            kkt_grid: 600,
            ..ocfg()
        };
        let res = optimize(&p, &fast, &qcfg(), None).unwrap();
        assert!(res.kkt.valid);
        assert_eq!(res.pmf.len(), 1);
        let cap = capacity_single_shell_integral(&p, &qcfg()).unwrap();
        assert!((res.capacity - cap).abs() < 1e-5, "{} vs {cap}", res.capacity);
    }

    #[test]
    fn optimize_degraded_returns_zero() {
        let p = ChannelParams::new(2.0, 1.0, 2, 1.0).unwrap();
        let res = optimize(&p, &ocfg(), &qcfg(), None).unwrap();
        assert_eq!(res.capacity, 0.0);
        assert!(res.kkt.valid);
    }
}
