use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::covariates::CovariateSet;
use super::summarize;
use super::ParamSummary;
use crate::error::{Error, Result};
use crate::growth::{
    apply_boundary_buffer, derive_clusters, derive_growth_clusters, fit_growth, ErrorFamily,
    GrowthCluster, GrowthMcmcConfig, GrowthParams, GrowthPosterior, GrowthPriors,
};
use crate::linkage::{LinkageDraw, LinkagePosterior};
use crate::records::{FilePair, RecordFile};
use crate::rng::{derive_seed, rng_from_seed};
use crate::spatial::Domain;

/// Controls for linkage averaging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LAConfig {
    /// Linkage draws to condition on.
    pub k: usize,
    /// Growth draws kept per linkage draw.
    pub l: usize,
    /// Growth clusters need `r1 * v_first < v_last < r2 * v_first`.
    pub r1: f64,
    pub r2: f64,
    /// Clusters closer than this to the domain edge are dropped (m).
    pub boundary_buffer: f64,
    /// Burn-in, thinning and adaptation of each conditional fit. Its
    /// `draws` and `seed` are overridden per fit.
    pub growth: GrowthMcmcConfig,
    pub seed: u64,
}

impl Default for LAConfig {
    fn default() -> Self {
        Self {
            k: 100,
            l: 100,
            r1: 0.9,
            r2: 1.6,
            boundary_buffer: 15.0,
            growth: GrowthMcmcConfig::default(),
            seed: 1,
        }
    }
}

impl LAConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.l == 0 {
            return Err(Error::Config("k and l must be at least 1".into()));
        }
        if !(0.0 < self.r1 && self.r1 < self.r2) {
            return Err(Error::Config(format!(
                "need 0 < r1 < r2, got {} and {}",
                self.r1, self.r2
            )));
        }
        if !(self.boundary_buffer >= 0.0) {
            return Err(Error::Config("boundary_buffer must be nonnegative".into()));
        }
        self.growth.validate()
    }
}

/// Growth clusters of one linkage draw, buffered and with covariates.
pub fn clusters_for_draw(
    draw: &LinkageDraw,
    first: &RecordFile,
    second: &RecordFile,
    domain: &Domain,
    covariates: &CovariateSet,
    config: &LAConfig,
) -> Result<Vec<GrowthCluster>> {
    let pair = FilePair::new(first, second);
    let partition = derive_clusters(&draw.lambda, first.len());
    let clusters = derive_growth_clusters(&partition, &pair, &draw.s, config.r1, config.r2);
    let clusters = apply_boundary_buffer(clusters, domain, config.boundary_buffer);
    covariates.attach(clusters, first)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledDraw {
    /// Position of the linkage draw among those sampled.
    pub t: usize,
    /// Position of the growth draw within its conditional fit.
    pub u: usize,
    /// Sweep of the linkage sampler the draw came from.
    pub linkage_iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedDraw {
    pub t: usize,
    pub linkage_iteration: usize,
    pub clusters: usize,
    pub needed: usize,
}

/// Equal-weight mixture of the conditional growth posteriors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledPosterior {
    pub family: ErrorFamily,
    pub n_beta: usize,
    pub b_gamma: f64,
    pub k: usize,
    pub l: usize,
    /// Tags of `draws`, ordered by (t, u).
    pub tags: Vec<PooledDraw>,
    pub draws: Vec<GrowthParams>,
    /// Growth clusters behind each used linkage draw, by `t`.
    pub clusters_per_draw: Vec<(usize, usize)>,
    pub skipped: Vec<SkippedDraw>,
    pub summaries: Vec<ParamSummary>,
    /// Post burn-in acceptance per block for each conditional fit.
    pub acceptance: Vec<[f64; 3]>,
}

impl PooledPosterior {
    pub fn names(&self) -> Vec<String> {
        GrowthParams::names(self.n_beta, self.family)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d.to_vec(self.family)[k]).collect()
    }

    pub fn summary(&self, name: &str) -> Option<&ParamSummary> {
        self.summaries.iter().find(|s| s.name == name)
    }

    /// Pools already-fitted conditional posteriors, in the given order.
    pub fn from_fits(fits: &[(PooledDraw, GrowthPosterior)], k: usize, l: usize) -> Result<Self> {
        let (_, head) = fits.first().ok_or(Error::NoUsableDraws(k))?;
        let mut tags = Vec::new();
        let mut draws = Vec::new();
        for (tag, post) in fits {
            for (u, d) in post.draws.iter().enumerate() {
                tags.push(PooledDraw { u, ..*tag });
                draws.push(d.clone());
            }
        }
        let mut pooled = Self {
            family: head.family,
            n_beta: head.n_beta,
            b_gamma: head.b_gamma,
            k,
            l,
            tags,
            draws,
            clusters_per_draw: fits.iter().map(|(t, p)| (t.t, p.n_clusters)).collect(),
            skipped: Vec::new(),
            summaries: Vec::new(),
            acceptance: fits.iter().map(|(_, p)| p.acceptance).collect(),
        };
        pooled.summaries = summarize(&pooled.names(), |k| pooled.column(k), 0.9);
        Ok(pooled)
    }
}

/// Linkage-averaged growth posterior: `k` linkage draws sampled without
/// replacement, one conditional growth fit of `l` draws each, pooled with
/// equal weight. Draws with too few growth clusters are skipped.
pub fn run_la(
    linkage: &LinkagePosterior,
    first: &RecordFile,
    second: &RecordFile,
    domain: &Domain,
    covariates: &CovariateSet,
    priors: &GrowthPriors,
    config: &LAConfig,
) -> Result<PooledPosterior> {
    config.validate()?;
    let retained = linkage.draws.len();
    if retained < config.k {
        return Err(Error::Validation {
            row: None,
            message: format!(
                "linkage posterior holds {retained} draws but k = {}",
                config.k
            ),
        });
    }
    // one gamma support for every conditional fit
    let b_gamma = priors.b_gamma_or(
        first
            .records
            .iter()
            .map(|r| r.volume)
            .fold(f64::NAN, f64::max),
    );
    let priors = priors.clone().with_b_gamma(b_gamma);
    let mut rng = rng_from_seed(derive_seed(config.seed, 0));
    let picked: Vec<usize> = sample(&mut rng, retained, config.k).into_vec();

    let outcomes: Vec<Result<std::result::Result<(PooledDraw, GrowthPosterior), SkippedDraw>>> = picked
        .par_iter()
        .enumerate()
        .map(|(t, &i)| {
            let draw = &linkage.draws[i];
            let tag = PooledDraw {
                t,
                u: 0,
                linkage_iteration: draw.iteration,
            };
            let clusters = clusters_for_draw(draw, first, second, domain, covariates, config)?;
            let mcmc = GrowthMcmcConfig {
                draws: config.l,
                seed: derive_seed(config.seed, t as u64 + 1),
                ..config.growth.clone()
            };
            match fit_growth(&clusters, &priors, &mcmc) {
                Ok(post) => Ok(Ok((tag, post))),
                Err(Error::TooFewClusters { needed, have }) => Ok(Err(SkippedDraw {
                    t,
                    linkage_iteration: draw.iteration,
                    clusters: have,
                    needed,
                })),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut fits = Vec::with_capacity(config.k);
    let mut skipped = Vec::new();
    for o in outcomes {
        match o? {
            Ok(fit) => fits.push(fit),
            Err(s) => skipped.push(s),
        }
    }
    for s in &skipped {
        eprintln!(
            "warning: skipping linkage draw {} (sweep {}): {} growth clusters, need {}",
            s.t, s.linkage_iteration, s.clusters, s.needed
        );
    }
    if fits.is_empty() {
        return Err(Error::NoUsableDraws(config.k));
    }
    let mut pooled = PooledPosterior::from_fits(&fits, config.k, config.l)?;
    pooled.skipped = skipped;
    Ok(pooled)
}
