//! Core domain types shared by every module: channel parameters, shell
//! pmfs, quadrature configuration, solver reports, unit handling.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance under which two shell radii are merged.
pub const RADIUS_MERGE_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamViolation {
    NonPositiveVariance,
    NonPositiveDimension,
    NegativeRadius,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid channel parameters: {0:?}")]
    InvalidParams(Vec<ParamViolation>),
    #[error("invalid shell pmf: {0}")]
    InvalidPmf(String),
    #[error("invalid quadrature config: {0}")]
    InvalidQuadratureConfig(String),
}

/// The problem instance: noise variances at the legitimate receiver and
/// at the eavesdropper, dimension and amplitude constraint.
///
/// `sigma1_sq >= sigma2_sq` is legal input (the channel is then not
/// degraded in the useful direction); capacity routines return exactly
/// zero in that case. The constructor flags it via [`ChannelParams::degraded`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub n: u32,
    pub radius: f64,
}

impl ChannelParams {
    pub fn new(sigma1_sq: f64, sigma2_sq: f64, n: u32, radius: f64) -> Result<Self, ModelError> {
        validate_params(ChannelParams {
            sigma1_sq,
            sigma2_sq,
            n,
            radius,
        })
    }

    /// True when the eavesdropper's channel is at least as good as the
    /// legitimate one, which forces zero secrecy capacity.
    pub fn degraded(&self) -> bool {
        self.sigma1_sq >= self.sigma2_sq
    }

    pub fn with_radius(&self, radius: f64) -> Self {
        ChannelParams { radius, ..*self }
    }
}

/// Validates every invariant and reports all violations at once.
pub fn validate_params(p: ChannelParams) -> Result<ChannelParams, ModelError> {
    let mut violations = Vec::new();
    if !(p.sigma1_sq > 0.0) || !(p.sigma2_sq > 0.0) {
        violations.push(ParamViolation::NonPositiveVariance);
    }
    if p.n < 1 {
        violations.push(ParamViolation::NonPositiveDimension);
    }
    if !(p.radius >= 0.0) {
        violations.push(ParamViolation::NegativeRadius);
    }
    if violations.is_empty() {
        Ok(p)
    } else {
        Err(ModelError::InvalidParams(violations))
    }
}

/// An isotropic input supported on finitely many co-centric shells,
/// described by the pmf of the input norm.
///
/// Radii are kept sorted strictly increasing; points closer than
/// `1e-9 * max_radius` are merged so downstream mixtures never become
/// singular. Probabilities are renormalized after validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ShellPmfRaw", into = "ShellPmfRaw")]
pub struct ShellPmf {
    radii: Vec<f64>,
    probs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ShellPmfRaw {
    radii: Vec<f64>,
    probs: Vec<f64>,
}

impl TryFrom<ShellPmfRaw> for ShellPmf {
    type Error = ModelError;
    fn try_from(raw: ShellPmfRaw) -> Result<Self, ModelError> {
        ShellPmf::new(raw.radii, raw.probs)
    }
}

impl From<ShellPmf> for ShellPmfRaw {
    fn from(pmf: ShellPmf) -> Self {
        ShellPmfRaw {
            radii: pmf.radii,
            probs: pmf.probs,
        }
    }
}

impl ShellPmf {
    pub fn new(radii: Vec<f64>, probs: Vec<f64>) -> Result<Self, ModelError> {
        if radii.is_empty() {
            return Err(ModelError::InvalidPmf("empty support".into()));
        }
        if radii.len() != probs.len() {
            return Err(ModelError::InvalidPmf(format!(
                "{} radii but {} probabilities",
                radii.len(),
                probs.len()
            )));
        }
        for &r in &radii {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(ModelError::InvalidPmf(format!("radius {r} out of range")));
            }
        }
        for &p in &probs {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(ModelError::InvalidPmf(format!(
                    "probability {p} out of range"
                )));
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(ModelError::InvalidPmf(format!(
                "probabilities sum to {total}, not 1"
            )));
        }

        // Canonical form: sort by radius, merge near-duplicates, renormalize.
        let mut pairs: Vec<(f64, f64)> = radii.into_iter().zip(probs).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let max_r = pairs.last().unwrap().0;
        let merge_tol = RADIUS_MERGE_REL_TOL * max_r;
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (r, p) in pairs {
            match merged.last_mut() {
                Some(last) if r - last.0 <= merge_tol => last.1 += p,
                _ => merged.push((r, p)),
            }
        }
        let total: f64 = merged.iter().map(|&(_, p)| p).sum();
        let radii = merged.iter().map(|&(r, _)| r).collect();
        let probs = merged.iter().map(|&(_, p)| p / total).collect();
        Ok(ShellPmf { radii, probs })
    }

    /// All probability on a single shell.
    pub fn single_shell(radius: f64) -> Self {
        ShellPmf {
            radii: vec![radius],
            probs: vec![1.0],
        }
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn max_radius(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.radii.iter().copied().zip(self.probs.iter().copied())
    }

    /// Drops shells with probability below `threshold` and renormalizes.
    pub fn pruned(&self, threshold: f64) -> Self {
        let kept: Vec<(f64, f64)> = self.iter().filter(|&(_, p)| p >= threshold).collect();
        if kept.is_empty() {
            return self.clone();
        }
        let total: f64 = kept.iter().map(|&(_, p)| p).sum();
        ShellPmf {
            radii: kept.iter().map(|&(r, _)| r).collect(),
            probs: kept.iter().map(|&(_, p)| p / total).collect(),
        }
    }

    pub fn contains_radius(&self, r: f64, tol: f64) -> bool {
        self.radii.iter().any(|&x| (x - r).abs() <= tol)
    }
}

/// Tolerances and truncation rules shared by all quadrature-based routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: u32,
    pub tail_sigmas: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_subdivisions: 200,
            tail_sigmas: 12.0,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(ModelError::InvalidQuadratureConfig(
                "tolerances must be positive".into(),
            ));
        }
        if self.max_subdivisions < 10 {
            return Err(ModelError::InvalidQuadratureConfig(
                "max_subdivisions must be at least 10".into(),
            ));
        }
        if self.tail_sigmas < 6.0 {
            return Err(ModelError::InvalidQuadratureConfig(
                "tail_sigmas must be at least 6".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of a 1-D root or optimum search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub value: f64,
    pub residual: f64,
    pub iterations: u32,
    pub converged: bool,
}

/// Output unit. All internal computation is in nats; bits only appear
/// at output boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitMode {
    Nats,
    Bits,
}

impl UnitMode {
    pub fn from_nats(&self, nats: f64) -> f64 {
        match self {
            UnitMode::Nats => nats,
            UnitMode::Bits => nats / std::f64::consts::LN_2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_valid_params() {
        let p = ChannelParams::new(1.0, 1.5, 2, 2.0).unwrap();
        assert!(!p.degraded());
    }

    #[test]
    fn rejects_zero_variance() {
        let err = ChannelParams::new(0.0, 1.5, 2, 2.0).unwrap_err();
        match err {
            ModelError::InvalidParams(v) => {
                assert_eq!(v, vec![ParamViolation::NonPositiveVariance])
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn degraded_direction_is_flagged_not_rejected() {
        let p = ChannelParams::new(2.0, 1.0, 4, 1.0).unwrap();
        assert!(p.degraded());
    }

    #[test]
    fn reports_all_violations() {
        let err = validate_params(ChannelParams {
            sigma1_sq: -1.0,
            sigma2_sq: 1.0,
            n: 0,
            radius: -2.0,
        })
        .unwrap_err();
        match err {
            ModelError::InvalidParams(v) => assert_eq!(v.len(), 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn pmf_sorts_and_merges() {
        let pmf = ShellPmf::new(vec![2.0, 1.0, 2.0 + 1e-12], vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(pmf.len(), 2);
        assert_eq!(pmf.radii(), &[1.0, 2.0]);
        assert!((pmf.probs()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pmf_rejects_bad_sum() {
        assert!(ShellPmf::new(vec![1.0, 2.0], vec![0.5, 0.4]).is_err());
    }

    #[test]
    fn unit_conversion() {
        assert!((UnitMode::Bits.from_nats(std::f64::consts::LN_2) - 1.0).abs() < 1e-15);
        assert_eq!(UnitMode::Nats.from_nats(0.3), 0.3);
    }
}
