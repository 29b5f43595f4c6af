use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::likelihood::{in_support, loglik_from_means};
use super::{linear_predictor, log_prior, saturation, ErrorFamily, GrowthCluster, GrowthParams, GrowthPriors};
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Controls for the growth sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrowthMcmcConfig {
    /// Adaptive iterations, discarded.
    pub burnin: usize,
    /// Draws kept after burn-in.
    pub draws: usize,
    pub thin: usize,
    pub seed: u64,
    /// Sample the prior alone, ignoring the data.
    pub prior_only: bool,
    /// Iteration at which block covariances switch to their empirical
    /// estimates.
    pub adapt_start: usize,
}

impl Default for GrowthMcmcConfig {
    fn default() -> Self {
        Self {
            burnin: 2000,
            draws: 200,
            thin: 5,
            seed: 1,
            prior_only: false,
            adapt_start: 200,
        }
    }
}

impl GrowthMcmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 || self.thin == 0 {
            return Err(Error::Config("draws and thin must be at least 1".into()));
        }
        Ok(())
    }
}

/// Retained growth draws and sampler diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthPosterior {
    pub draws: Vec<GrowthParams>,
    pub family: ErrorFamily,
    pub n_beta: usize,
    pub n_clusters: usize,
    /// Upper bound of gamma actually used.
    pub b_gamma: f64,
    /// Acceptance per block after burn-in: coefficients, curve shape, error.
    pub acceptance: [f64; 3],
    pub burnin_acceptance: [f64; 3],
}

impl GrowthPosterior {
    pub fn names(&self) -> Vec<String> {
        GrowthParams::names(self.n_beta, self.family)
    }

    /// Draws of parameter `k` in the order of [`GrowthPosterior::names`].
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d.to_vec(self.family)[k]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        let rows: Vec<Vec<f64>> = self.draws.iter().map(|d| d.to_vec(self.family)).collect();
        let k = self.names().len();
        (0..k).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
    }
}

const BLOCK_NAMES: [&str; 3] = ["coefficients", "curve shape", "error"];

#[derive(Debug, Clone, Copy)]
enum Transform {
    Identity,
    Logit { lo: f64, hi: f64 },
    LogShift { lo: f64 },
}

impl Transform {
    fn to_natural(self, u: f64) -> f64 {
        match self {
            Transform::Identity => u,
            Transform::Logit { lo, hi } => lo + (hi - lo) / (1.0 + (-u).exp()),
            Transform::LogShift { lo } => lo + u.exp(),
        }
    }

    fn to_free(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Logit { lo, hi } => {
                let p = (x - lo) / (hi - lo);
                (p / (1.0 - p)).ln()
            }
            Transform::LogShift { lo } => (x - lo).ln(),
        }
    }

    /// `log |dx/du|` at natural value `x`.
    fn log_jacobian(self, x: f64) -> f64 {
        match self {
            Transform::Identity => 0.0,
            Transform::Logit { lo, hi } => (x - lo).ln() + (hi - x).ln() - (hi - lo).ln(),
            Transform::LogShift { lo } => (x - lo).ln(),
        }
    }
}

/// Random-walk block with adaptive covariance and scale.
struct Block {
    idx: Vec<usize>,
    chol: DMatrix<f64>,
    log_scale: f64,
    target: f64,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
    n_seen: usize,
    switched: bool,
    proposals: usize,
    accepts: usize,
}

impl Block {
    fn new(idx: Vec<usize>, init_cov: DMatrix<f64>) -> Self {
        let d = idx.len();
        let chol = Cholesky::new(init_cov.clone())
            .map(|c| c.l())
            .unwrap_or_else(|| DMatrix::from_diagonal(&init_cov.diagonal().map(f64::sqrt)));
        Self {
            target: if d == 1 { 0.44 } else { 0.3 },
            idx,
            chol,
            log_scale: 0.0,
            mean: DVector::zeros(d),
            m2: DMatrix::zeros(d, d),
            n_seen: 0,
            switched: false,
            proposals: 0,
            accepts: 0,
        }
    }

    fn propose(&self, u: &[f64], rng: &mut SimRng) -> Vec<f64> {
        let d = self.idx.len();
        let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let step = &self.chol * z * self.log_scale.exp();
        let mut out = u.to_vec();
        for (k, &i) in self.idx.iter().enumerate() {
            out[i] += step[k];
        }
        out
    }

    fn observe(&mut self, u: &[f64]) {
        let x = DVector::from_iterator(self.idx.len(), self.idx.iter().map(|&i| u[i]));
        self.n_seen += 1;
        let delta = &x - &self.mean;
        self.mean += &delta / self.n_seen as f64;
        let delta2 = &x - &self.mean;
        self.m2 += &delta * delta2.transpose();
    }

    fn adapt_scale(&mut self, accepted: bool, iter: usize) {
        let gain = (iter as f64 + 1.0).powf(-0.6);
        self.log_scale += gain * (f64::from(u8::from(accepted)) - self.target);
        self.log_scale = self.log_scale.clamp(-15.0, 5.0);
    }

    fn refresh_covariance(&mut self) {
        if self.n_seen < 2 {
            return;
        }
        let d = self.idx.len();
        let cov = &self.m2 / (self.n_seen as f64 - 1.0);
        let jitter = 1e-10 * (cov.diagonal().max().max(1e-12));
        let scaled = cov * (2.38f64.powi(2) / d as f64) + DMatrix::identity(d, d) * jitter;
        if let Some(c) = Cholesky::new(scaled) {
            self.chol = c.l();
            if !self.switched {
                self.log_scale = 0.0;
                self.switched = true;
            }
        }
    }
}

struct Model<'a> {
    clusters: &'a [GrowthCluster],
    priors: GrowthPriors,
    n_beta: usize,
    transforms: Vec<Transform>,
    prior_only: bool,
}

impl Model<'_> {
    /// Mean saturation factor over the clusters.
    fn mean_saturation(&self, u: &[f64]) -> f64 {
        let alpha = self.transforms[0].to_natural(u[0]);
        let gamma = self.transforms[1].to_natural(u[1]);
        let s: f64 = self.clusters.iter().map(|c| saturation(c.v_first, alpha, gamma)).sum();
        s / self.clusters.len() as f64
    }

    fn natural(&self, u: &[f64]) -> GrowthParams {
        let x: Vec<f64> = u.iter().zip(&self.transforms).map(|(&v, t)| t.to_natural(v)).collect();
        GrowthParams::from_slice(&x, self.n_beta, self.priors.error_family)
    }

    fn log_target(&self, u: &[f64]) -> f64 {
        let p = self.natural(u);
        if !in_support(&p, &self.priors) {
            return f64::NEG_INFINITY;
        }
        let x = p.to_vec(self.priors.error_family);
        let jac: f64 = x.iter().zip(&self.transforms).map(|(&v, t)| t.log_jacobian(v)).sum();
        let mut lt = log_prior(&p, &self.priors) + jac;
        if !self.prior_only {
            let means = self.clusters.iter().map(|c| {
                let mu = linear_predictor(&c.covariates, &p.beta) * saturation(c.v_first, p.alpha, p.gamma);
                (c.g, mu)
            });
            lt += loglik_from_means(means, p.tau, p.delta, p.omega, self.priors.error_family);
        }
        if lt.is_nan() {
            f64::NEG_INFINITY
        } else {
            lt
        }
    }
}

/// Least-squares coefficients of `g` on `x * saturation` at fixed curve
/// shape, with the residual variance.
fn initial_coefficients(clusters: &[GrowthCluster], alpha: f64, gamma: f64, n_beta: usize) -> Option<(Vec<f64>, f64, DMatrix<f64>)> {
    let n = clusters.len();
    if n <= n_beta {
        return None;
    }
    let z = DMatrix::from_fn(n, n_beta, |i, k| clusters[i].covariates[k] * saturation(clusters[i].v_first, alpha, gamma));
    let g = DVector::from_iterator(n, clusters.iter().map(|c| c.g));
    let ztz = z.transpose() * &z + DMatrix::identity(n_beta, n_beta) * 1e-10;
    let inv = ztz.clone().cholesky()?.inverse();
    let beta = &inv * z.transpose() * &g;
    let resid = &g - &z * &beta;
    let s2 = resid.norm_squared() / (n - n_beta) as f64;
    Some((beta.iter().copied().collect(), s2, inv))
}

/// Fits the growth model by adaptive Metropolis-within-Gibbs over the
/// blocks (coefficients), (gamma, alpha) and (tau, delta, omega). Moves of
/// the curve-shape block rescale the coefficients to keep the mean curve
/// height fixed.
pub fn fit_growth(clusters: &[GrowthCluster], priors: &GrowthPriors, config: &GrowthMcmcConfig) -> Result<GrowthPosterior> {
    config.validate()?;
    let family = priors.error_family;
    let n_beta = match clusters.first() {
        Some(c) => c.covariates.len(),
        None => priors.mu_beta.len().max(1),
    };
    if n_beta == 0 {
        return Err(Error::Config("clusters carry no covariate rows".into()));
    }
    if let Some(c) = clusters.iter().find(|c| c.covariates.len() != n_beta) {
        return Err(Error::Config(format!(
            "cluster {} has {} covariates, expected {n_beta}",
            c.cluster_id,
            c.covariates.len()
        )));
    }
    if !config.prior_only && clusters.len() < n_beta + 1 {
        return Err(Error::TooFewClusters {
            needed: n_beta + 1,
            have: clusters.len(),
        });
    }
    let fallback = clusters.iter().map(|c| c.v_first).fold(f64::NAN, f64::max);
    let b_gamma = priors.b_gamma_or(fallback);
    if !b_gamma.is_finite() {
        return Err(Error::Config("b_gamma is unset and there are no clusters to infer it".into()));
    }
    let priors = GrowthPriors {
        b_gamma: Some(b_gamma),
        ..priors.clone()
    };
    priors.validate(n_beta)?;

    // parameter layout: alpha, gamma, beta.., tau, [delta, omega]
    let mut transforms = vec![
        Transform::Logit {
            lo: priors.c_alpha,
            hi: priors.d_alpha,
        },
        Transform::Logit {
            lo: priors.a_gamma,
            hi: b_gamma,
        },
    ];
    transforms.extend(std::iter::repeat_n(Transform::Identity, n_beta));
    transforms.push(Transform::Logit { lo: 0.0, hi: priors.b_tau });
    if family == ErrorFamily::SkewT {
        transforms.push(Transform::Logit { lo: -1.0, hi: 1.0 });
        transforms.push(Transform::LogShift { lo: 2.0 });
    }
    let model = Model {
        clusters,
        priors: priors.clone(),
        n_beta,
        transforms,
        prior_only: config.prior_only,
    };

    // starting values
    let alpha0 = if priors.c_alpha < 1.0 && 1.0 < priors.d_alpha {
        1.0
    } else {
        0.5 * (priors.c_alpha + priors.d_alpha)
    };
    let span = b_gamma - priors.a_gamma;
    let gamma0 = if clusters.is_empty() || config.prior_only {
        priors.a_gamma + 0.5 * span
    } else {
        let v: Vec<f64> = clusters.iter().map(|c| c.v_first).collect();
        crate::stats::quantile(&v, 0.5).clamp(priors.a_gamma + 0.05 * span, b_gamma - 0.05 * span)
    };
    let fitted = if config.prior_only {
        None
    } else {
        initial_coefficients(clusters, alpha0, gamma0, n_beta)
    };
    let (beta0, tau0, beta_cov) = match fitted {
        Some((b, s2, inv)) => {
            let tau = s2.clamp(1e-6 * priors.b_tau, 0.5 * priors.b_tau);
            (b, tau, inv * tau)
        }
        None => (
            (0..n_beta).map(|k| priors.beta_mean(k)).collect(),
            0.5 * priors.b_tau,
            DMatrix::from_fn(n_beta, n_beta, |i, j| if i == j { priors.beta_variance(i) } else { 0.0 }),
        ),
    };
    let mut x0 = vec![alpha0, gamma0];
    x0.extend_from_slice(&beta0);
    x0.push(tau0);
    if family == ErrorFamily::SkewT {
        x0.push(0.0);
        x0.push(10.0);
    }
    let mut u: Vec<f64> = x0.iter().zip(&model.transforms).map(|(&v, t)| t.to_free(v)).collect();
    let mut current = model.log_target(&u);
    if !current.is_finite() {
        return Err(Error::NumericalFailure {
            iteration: 0,
            what: "growth target at the starting point".into(),
        });
    }

    let tau_idx = 2 + n_beta;
    let scale0 = |d: usize| 2.38f64.powi(2) / d as f64;
    let mut blocks = [
        Block::new((2..tau_idx).collect(), beta_cov * scale0(n_beta)),
        Block::new(vec![0, 1], DMatrix::identity(2, 2) * 0.1),
        Block::new(
            (tau_idx..model.transforms.len()).collect(),
            DMatrix::identity(model.transforms.len() - tau_idx, model.transforms.len() - tau_idx) * 0.05,
        ),
    ];

    let co_scale = !config.prior_only && !clusters.is_empty();
    let mut rng = SimRng::seed_from_u64(config.seed);
    let total = config.burnin + config.draws * config.thin;
    let mut draws = Vec::with_capacity(config.draws);
    let mut trace = Vec::with_capacity(config.burnin);
    let mut burn = [(0usize, 0usize); 3];
    for iter in 0..total {
        let adapting = iter < config.burnin;
        if iter == config.burnin {
            for (b, blk) in blocks.iter_mut().enumerate() {
                burn[b] = (blk.proposals, blk.accepts);
                blk.proposals = 0;
                blk.accepts = 0;
            }
        }
        for (b, blk) in blocks.iter_mut().enumerate() {
            let mut prop = blk.propose(&u, &mut rng);
            let mut log_jac = 0.0;
            if b == 1 && co_scale {
                // carry the coefficients along so the average curve height is
                // unchanged; the ridge between gamma and the asymptote is
                // otherwise crossed one small step at a time
                let r = model.mean_saturation(&u) / model.mean_saturation(&prop);
                if r.is_finite() && r > 0.0 {
                    for v in &mut prop[2..tau_idx] {
                        *v *= r;
                    }
                    log_jac = n_beta as f64 * r.ln();
                }
            }
            let lt = model.log_target(&prop);
            let accepted = lt.is_finite() && rng.random::<f64>().ln() < lt - current + log_jac;
            blk.proposals += 1;
            if accepted {
                blk.accepts += 1;
                u = prop;
                current = lt;
            }
            if adapting {
                blk.adapt_scale(accepted, iter);
                blk.observe(&u);
                if iter >= config.adapt_start && iter % 50 == 0 {
                    blk.refresh_covariance();
                }
            }
        }
        if !current.is_finite() {
            return Err(Error::NumericalFailure {
                iteration: iter,
                what: "growth target".into(),
            });
        }
        let params = model.natural(&u);
        if adapting {
            trace.push(params.to_vec(family));
        } else if (iter - config.burnin + 1).is_multiple_of(config.thin) {
            draws.push(params);
        }
    }
    if config.burnin == 0 {
        for (b, blk) in blocks.iter().enumerate() {
            burn[b] = (blk.proposals, blk.accepts);
        }
    }
    let rate = |(p, a): (usize, usize)| if p == 0 { 0.0 } else { a as f64 / p as f64 };
    let burnin_acceptance = [rate(burn[0]), rate(burn[1]), rate(burn[2])];
    for (b, &acc) in burnin_acceptance.iter().enumerate() {
        if config.burnin > 0 && acc < 0.01 {
            return Err(Error::PoorMixing {
                block: BLOCK_NAMES[b].to_string(),
                acceptance: acc,
                trace,
            });
        }
    }
    let acceptance = [
        rate((blocks[0].proposals, blocks[0].accepts)),
        rate((blocks[1].proposals, blocks[1].accepts)),
        rate((blocks[2].proposals, blocks[2].accepts)),
    ];
    Ok(GrowthPosterior {
        draws,
        family,
        n_beta,
        n_clusters: clusters.len(),
        b_gamma,
        acceptance,
        burnin_acceptance,
    })
}
