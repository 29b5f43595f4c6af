use serde::{Deserialize, Serialize};

use super::covariates::CovariateSet;
use super::la::LAConfig;
use crate::error::{Error, Result};
use crate::growth::{apply_boundary_buffer, fit_growth, GrowthCluster, GrowthMcmcConfig, GrowthPosterior, GrowthPriors};
use crate::records::{RecordFile, RecordRef};
use crate::spatial::{Domain, GridIndex};

/// A first-survey record and its nearest second-survey record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NdmPair {
    /// Positions within the files.
    pub first: usize,
    pub second: usize,
    pub first_id: u64,
    pub second_id: u64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NDMResult {
    /// One pair per first-survey record, in file order.
    pub pairs: Vec<NdmPair>,
    pub clusters: Vec<GrowthCluster>,
    pub posterior: Option<GrowthPosterior>,
}

/// Pairs every first-survey record with its Euclidean-nearest
/// second-survey record, ties to the lower record id. Several first-survey
/// records may share a partner.
pub fn ndm_link(first: &RecordFile, second: &RecordFile) -> Result<Vec<NdmPair>> {
    if second.is_empty() {
        return Err(Error::EmptyInput);
    }
    // index in id order so the index's own tie rule picks the lower id
    let mut order: Vec<usize> = (0..second.len()).collect();
    order.sort_by_key(|&j| second.records[j].id);
    let locs: Vec<_> = order.iter().map(|&j| second.records[j].location).collect();
    let cell = (second_extent_side(&locs) / (locs.len() as f64).sqrt()).max(1e-6);
    let index = GridIndex::build(&locs, cell);
    Ok(first
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let j = order[index.nearest(&r.location).expect("nonempty index")];
            let other = &second.records[j];
            NdmPair {
                first: i,
                second: j,
                first_id: r.id,
                second_id: other.id,
                distance: r.location.dist(&other.location),
            }
        })
        .collect())
}

fn second_extent_side(locs: &[crate::spatial::Point2]) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in locs {
        lo = lo.min(p.x.min(p.y));
        hi = hi.max(p.x.max(p.y));
    }
    (hi - lo).max(1.0)
}

/// Growth clusters from nearest-distance pairs. Each pair is its own
/// cluster, located at the first-survey record.
pub fn ndm_clusters(pairs: &[NdmPair], first: &RecordFile, second: &RecordFile, r1: f64, r2: f64) -> Vec<GrowthCluster> {
    assert!(0.0 < r1 && r1 < r2, "need 0 < r1 < r2");
    let years = f64::from(second.year - first.year);
    pairs
        .iter()
        .filter_map(|p| {
            let a = &first.records[p.first];
            let b = &second.records[p.second];
            if !(r1 * a.volume < b.volume && b.volume < r2 * a.volume) {
                return None;
            }
            Some(GrowthCluster {
                cluster_id: p.first as u32,
                v_first: a.volume,
                v_last: b.volume,
                years_span: years,
                g: (b.volume - a.volume) / years,
                latent_location: a.location,
                covariates: Vec::new(),
                members: vec![
                    RecordRef {
                        file: 0,
                        index: p.first,
                    },
                    RecordRef {
                        file: 1,
                        index: p.second,
                    },
                ],
            })
        })
        .collect()
}

/// Nearest-distance matching followed by a single growth fit, using the
/// same rate bounds, buffer and sampler settings as linkage averaging.
/// The fit keeps `config.k * config.l` draws so it is comparable in size
/// with the pooled posterior.
pub fn run_ndm(
    first: &RecordFile,
    second: &RecordFile,
    domain: &Domain,
    covariates: &CovariateSet,
    priors: &GrowthPriors,
    config: &LAConfig,
) -> Result<NDMResult> {
    config.validate()?;
    let pairs = ndm_link(first, second)?;
    let clusters = ndm_clusters(&pairs, first, second, config.r1, config.r2);
    let clusters = apply_boundary_buffer(clusters, domain, config.boundary_buffer);
    let clusters = covariates.attach(clusters, first)?;
    let b_gamma = priors.b_gamma_or(
        first
            .records
            .iter()
            .map(|r| r.volume)
            .fold(f64::NAN, f64::max),
    );
    let mcmc = GrowthMcmcConfig {
        draws: config.k * config.l,
        seed: crate::rng::derive_seed(config.seed, u64::MAX),
        ..config.growth.clone()
    };
    let posterior = fit_growth(&clusters, &priors.clone().with_b_gamma(b_gamma), &mcmc)?;
    Ok(NDMResult {
        pairs,
        clusters,
        posterior: Some(posterior),
    })
}
