//! Growth model: clusters with records in both surveys give an annual
//! volume increment, modeled as a Michaelis-Menten function of the first
//! volume scaled by a linear predictor in location covariates.

mod clusters;
mod competition;
mod fit;
mod likelihood;
mod raster;
mod skewt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use clusters::{
    apply_boundary_buffer, derive_clusters, derive_growth_clusters, Cluster, GrowthCluster,
};
pub use competition::{competition_metrics, CompetitionMetrics};
pub use fit::{fit_growth, GrowthMcmcConfig, GrowthPosterior};
pub use likelihood::{growth_loglik, log_prior};
pub use raster::{sample_raster, standardize_covariates, Raster, Standardization};
pub use skewt::{skewt_logpdf, skewt_std_logpdf, HansenConstants};

/// Error distribution of observed growth about the mean curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ErrorFamily {
    #[default]
    SkewT,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthParams {
    /// Curvature of the saturation curve.
    pub alpha: f64,
    /// Volume at half saturation (m³).
    pub gamma: f64,
    /// Coefficients of the asymptote, intercept first (m³/yr).
    pub beta: Vec<f64>,
    /// Error variance ((m³/yr)²).
    pub tau: f64,
    /// Skewness, in (-1, 1).
    pub delta: f64,
    /// Tail parameter, above 2. Both skew and tail are unused (zero) under
    /// the Gaussian family.
    pub omega: f64,
}

impl GrowthParams {
    /// Names of the parameters sampled under `family`, in vector order.
    pub fn names(n_beta: usize, family: ErrorFamily) -> Vec<String> {
        let mut v = vec!["alpha".to_string(), "gamma".to_string()];
        v.extend((0..n_beta).map(|k| format!("beta{k}")));
        v.push("tau".into());
        if family == ErrorFamily::SkewT {
            v.push("delta".into());
            v.push("omega".into());
        }
        v
    }

    /// Flattens in the order of [`GrowthParams::names`].
    pub fn to_vec(&self, family: ErrorFamily) -> Vec<f64> {
        let mut v = vec![self.alpha, self.gamma];
        v.extend_from_slice(&self.beta);
        v.push(self.tau);
        if family == ErrorFamily::SkewT {
            v.push(self.delta);
            v.push(self.omega);
        }
        v
    }

    pub fn from_slice(v: &[f64], n_beta: usize, family: ErrorFamily) -> Self {
        let tail = 2 + n_beta;
        let (delta, omega) = match family {
            ErrorFamily::SkewT => (v[tail + 1], v[tail + 2]),
            ErrorFamily::Gaussian => (0.0, 0.0),
        };
        Self {
            alpha: v[0],
            gamma: v[1],
            beta: v[2..tail].to_vec(),
            tau: v[tail],
            delta,
            omega,
        }
    }
}

/// Hyperparameters of the growth model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrowthPriors {
    /// `gamma ~ Uniform(a_gamma, b_gamma)`.
    pub a_gamma: f64,
    /// Upper bound for gamma. `None` uses the largest first-survey volume.
    pub b_gamma: Option<f64>,
    /// `alpha` is Beta(a_alpha, b_alpha) rescaled to `[c_alpha, d_alpha]`.
    pub a_alpha: f64,
    pub b_alpha: f64,
    pub c_alpha: f64,
    pub d_alpha: f64,
    /// Normal prior means of the coefficients. Empty means all zero.
    pub mu_beta: Vec<f64>,
    /// Normal prior variances of the coefficients. Empty means all 100.
    pub sigma2_beta: Vec<f64>,
    /// `tau ~ Uniform(0, b_tau)`.
    pub b_tau: f64,
    /// `delta` is Normal(0, sigma2_delta) truncated to (-1, 1).
    pub sigma2_delta: f64,
    /// `omega - 2 ~ Gamma(2, rate b_omega)`.
    pub b_omega: f64,
    pub error_family: ErrorFamily,
}

impl Default for GrowthPriors {
    fn default() -> Self {
        Self {
            a_gamma: 0.1,
            b_gamma: None,
            a_alpha: 1.0,
            b_alpha: 1.0,
            c_alpha: 0.5,
            d_alpha: 4.0,
            mu_beta: Vec::new(),
            sigma2_beta: Vec::new(),
            b_tau: 10.0,
            sigma2_delta: 1.0,
            b_omega: 0.1,
            error_family: ErrorFamily::SkewT,
        }
    }
}

const DEFAULT_BETA_VARIANCE: f64 = 100.0;

impl GrowthPriors {
    pub fn gaussian() -> Self {
        Self {
            error_family: ErrorFamily::Gaussian,
            ..Self::default()
        }
    }

    pub fn with_b_gamma(mut self, b: f64) -> Self {
        self.b_gamma = Some(b);
        self
    }

    /// Upper bound for gamma, falling back to `fallback` when unset.
    pub fn b_gamma_or(&self, fallback: f64) -> f64 {
        self.b_gamma.unwrap_or(fallback)
    }

    pub fn beta_mean(&self, k: usize) -> f64 {
        self.mu_beta.get(k).copied().unwrap_or(0.0)
    }

    pub fn beta_variance(&self, k: usize) -> f64 {
        self.sigma2_beta
            .get(k)
            .copied()
            .unwrap_or(DEFAULT_BETA_VARIANCE)
    }

    /// Checks orderings and positivity. `n_beta` is the coefficient count.
    pub fn validate(&self, n_beta: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if let Some(b) = self.b_gamma {
            if !(b > self.a_gamma) {
                return bad(format!("need a_gamma < b_gamma, got {} and {b}", self.a_gamma));
            }
        }
        if !(self.a_gamma > 0.0) {
            return bad("a_gamma must be positive".into());
        }
        if !(self.c_alpha > 0.0 && self.c_alpha < self.d_alpha) {
            return bad(format!(
                "need 0 < c_alpha < d_alpha, got {} and {}",
                self.c_alpha, self.d_alpha
            ));
        }
        for (name, v) in [
            ("a_alpha", self.a_alpha),
            ("b_alpha", self.b_alpha),
            ("b_tau", self.b_tau),
            ("sigma2_delta", self.sigma2_delta),
            ("b_omega", self.b_omega),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("mu_beta", &self.mu_beta), ("sigma2_beta", &self.sigma2_beta)] {
            if !v.is_empty() && v.len() != n_beta {
                return bad(format!("{name} has {} entries, expected {n_beta}", v.len()));
            }
        }
        if self.sigma2_beta.iter().any(|&s| !(s > 0.0)) {
            return bad("sigma2_beta entries must be positive".into());
        }
        Ok(())
    }
}

/// Saturation factor `v^alpha / (gamma^alpha + v^alpha)`.
#[inline]
pub fn saturation(v: f64, alpha: f64, gamma: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    // ratio form avoids overflow for large v
    1.0 / (1.0 + (gamma / v).powf(alpha))
}

#[inline]
pub fn linear_predictor(x: &[f64], beta: &[f64]) -> f64 {
    x.iter().zip(beta).map(|(a, b)| a * b).sum()
}

/// Mean annual growth `(x . beta) v^alpha / (gamma^alpha + v^alpha)`.
pub fn mm_mean(params: &GrowthParams, x: &[f64], v_first: f64) -> f64 {
    linear_predictor(x, &params.beta) * saturation(v_first, params.alpha, params.gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64) -> GrowthParams {
        GrowthParams {
            alpha,
            gamma: 12.0,
            beta: vec![3.0],
            tau: 0.5,
            delta: 0.0,
            omega: 10.0,
        }
    }

    #[test]
    fn half_maximum_at_gamma() {
        for a in [0.5, 1.0, 2.0, 3.7] {
            assert_eq!(mm_mean(&params(a), &[1.0], 12.0), 1.5);
        }
    }

    #[test]
    fn linear_saturation_value() {
        assert!((mm_mean(&params(1.0), &[1.0], 36.0) - 2.25).abs() < 1e-14);
    }

    #[test]
    fn vanishes_at_zero() {
        assert_eq!(mm_mean(&params(2.0), &[1.0], 0.0), 0.0);
        assert!(mm_mean(&params(2.0), &[1.0], 1e-9) < 1e-15);
    }

    #[test]
    fn flat_round_trip() {
        let p = GrowthParams {
            alpha: 1.5,
            gamma: 9.0,
            beta: vec![1.0, 2.0, 3.0],
            tau: 0.3,
            delta: -0.2,
            omega: 7.0,
        };
        let v = p.to_vec(ErrorFamily::SkewT);
        assert_eq!(v.len(), GrowthParams::names(3, ErrorFamily::SkewT).len());
        assert_eq!(GrowthParams::from_slice(&v, 3, ErrorFamily::SkewT), p);
    }

    #[test]
    fn prior_lengths_checked() {
        let p = GrowthPriors {
            mu_beta: vec![0.0; 2],
            ..GrowthPriors::default()
        };
        assert!(p.validate(3).is_err());
        assert!(p.validate(2).is_ok());
    }
}
