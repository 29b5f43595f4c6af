use super::skewt::HansenConstants;
use super::{linear_predictor, saturation, ErrorFamily, GrowthCluster, GrowthParams, GrowthPriors};

const LN_2PI: f64 = 1.8378770664093453;

pub(crate) fn in_support(p: &GrowthParams, priors: &GrowthPriors) -> bool {
    let b_gamma = priors.b_gamma.unwrap_or(f64::INFINITY);
    let base = p.alpha >= priors.c_alpha
        && p.alpha <= priors.d_alpha
        && p.gamma >= priors.a_gamma
        && p.gamma <= b_gamma
        && p.tau > 0.0
        && p.tau < priors.b_tau
        && p.beta.iter().all(|b| b.is_finite());
    match priors.error_family {
        ErrorFamily::Gaussian => base,
        ErrorFamily::SkewT => base && p.delta.abs() < 1.0 && p.omega > 2.0 && p.omega.is_finite(),
    }
}

/// Log likelihood given precomputed mean curve values.
pub(crate) fn loglik_from_means(
    g: impl Iterator<Item = (f64, f64)>,
    tau: f64,
    delta: f64,
    omega: f64,
    family: ErrorFamily,
) -> f64 {
    match family {
        ErrorFamily::Gaussian => {
            let (mut n, mut ss) = (0usize, 0.0);
            for (obs, mu) in g {
                n += 1;
                ss += (obs - mu) * (obs - mu);
            }
            -0.5 * n as f64 * (LN_2PI + tau.ln()) - ss / (2.0 * tau)
        }
        ErrorFamily::SkewT => {
            let h = match HansenConstants::new(delta, omega) {
                Ok(h) => h,
                Err(_) => return f64::NEG_INFINITY,
            };
            let sd = tau.sqrt();
            let mut n = 0usize;
            let mut total = 0.0;
            for (obs, mu) in g {
                n += 1;
                total += h.logpdf((obs - mu) / sd);
            }
            total - 0.5 * n as f64 * tau.ln()
        }
    }
}

/// Log likelihood of the observed growth of `clusters` under `params`;
/// negative infinity outside the prior support.
pub fn growth_loglik(params: &GrowthParams, clusters: &[GrowthCluster], priors: &GrowthPriors) -> f64 {
    if !in_support(params, priors) {
        return f64::NEG_INFINITY;
    }
    let means = clusters.iter().map(|c| {
        let mu = linear_predictor(&c.covariates, &params.beta)
            * saturation(c.v_first, params.alpha, params.gamma);
        (c.g, mu)
    });
    loglik_from_means(means, params.tau, params.delta, params.omega, priors.error_family)
}

/// Log prior density up to a constant; negative infinity outside the
/// support.
pub fn log_prior(params: &GrowthParams, priors: &GrowthPriors) -> f64 {
    if !in_support(params, priors) {
        return f64::NEG_INFINITY;
    }
    let u = (params.alpha - priors.c_alpha) / (priors.d_alpha - priors.c_alpha);
    let mut lp = 0.0;
    if priors.a_alpha != 1.0 {
        lp += (priors.a_alpha - 1.0) * u.ln();
    }
    if priors.b_alpha != 1.0 {
        lp += (priors.b_alpha - 1.0) * (1.0 - u).ln();
    }
    for (k, b) in params.beta.iter().enumerate() {
        let d = b - priors.beta_mean(k);
        lp -= d * d / (2.0 * priors.beta_variance(k));
    }
    if priors.error_family == ErrorFamily::SkewT {
        lp -= params.delta * params.delta / (2.0 * priors.sigma2_delta);
        let w = params.omega - 2.0;
        lp += w.ln() - priors.b_omega * w;
    }
    lp
}
