//! Linkage averaging and the nearest-distance baseline.

mod covariates;
mod la;
mod ndm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::{fit_growth, GrowthCluster, GrowthMcmcConfig, GrowthPosterior, GrowthPriors};
use crate::linkage::LinkageDraw;
use crate::records::RecordFile;
use crate::spatial::{Domain, Point2};
use crate::stats;

pub use covariates::{CompetitionCovariates, CovariateSet};
pub use la::{clusters_for_draw, run_la, LAConfig, PooledDraw, PooledPosterior, SkippedDraw};
pub use ndm::{ndm_clusters, ndm_link, run_ndm, NDMResult, NdmPair};

/// Equal-tailed interval with linear interpolation between order
/// statistics.
pub fn credible_interval(draws: &[f64], level: f64) -> (f64, f64) {
    assert!(draws.len() >= 2, "need at least two draws");
    assert!(level > 0.0 && level < 1.0, "level must lie in (0, 1)");
    let mut v = draws.to_vec();
    v.sort_by(f64::total_cmp);
    let a = 0.5 * (1.0 - level);
    (stats::quantile_sorted(&v, a), stats::quantile_sorted(&v, 1.0 - a))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub level: f64,
    pub lo: f64,
    pub hi: f64,
}

pub(crate) fn summarize(names: &[String], column: impl Fn(usize) -> Vec<f64>, level: f64) -> Vec<ParamSummary> {
    names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let col = column(k);
            let (lo, hi) = if col.len() >= 2 {
                credible_interval(&col, level)
            } else {
                (col[0], col[0])
            };
            ParamSummary {
                name: name.clone(),
                mean: stats::mean(&col),
                sd: if col.len() >= 2 { stats::sd(&col) } else { 0.0 },
                level,
                lo,
                hi,
            }
        })
        .collect()
}

/// Summaries of a single growth posterior.
pub fn summarize_growth(post: &GrowthPosterior, level: f64) -> Vec<ParamSummary> {
    summarize(&post.names(), |k| post.column(k), level)
}

/// A fixed linkage as a pseudo-draw, with each latent placed at the
/// centroid of its first-survey members (or of all members when it has
/// none).
pub fn fixed_linkage_draw(lambda: &[u32], first: &RecordFile, second: &RecordFile) -> Result<LinkageDraw> {
    let n1 = first.len();
    if lambda.len() != n1 + second.len() {
        return Err(Error::Validation {
            row: None,
            message: format!(
                "linkage has {} labels for {} records",
                lambda.len(),
                n1 + second.len()
            ),
        });
    }
    let n_latent = lambda.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let mut acc = vec![[(0.0, 0.0, 0usize); 2]; n_latent];
    for (g, &l) in lambda.iter().enumerate() {
        let (file, p) = if g < n1 {
            (0, first.records[g].location)
        } else {
            (1, second.records[g - n1].location)
        };
        let a = &mut acc[l as usize][file];
        a.0 += p.x;
        a.1 += p.y;
        a.2 += 1;
    }
    let s = acc
        .iter()
        .map(|a| {
            let (x, y, n) = if a[0].2 > 0 {
                a[0]
            } else {
                (a[0].0 + a[1].0, a[0].1 + a[1].1, a[0].2 + a[1].2)
            };
            if n == 0 {
                Point2::ORIGIN
            } else {
                Point2::new(x / n as f64, y / n as f64)
            }
        })
        .collect();
    Ok(LinkageDraw {
        iteration: 0,
        lambda: lambda.to_vec(),
        s,
    })
}

/// Growth fit conditional on one fixed linkage.
#[allow(clippy::too_many_arguments)]
pub fn fit_fixed_linkage(
    draw: &LinkageDraw,
    first: &RecordFile,
    second: &RecordFile,
    domain: &Domain,
    covariates: &CovariateSet,
    priors: &GrowthPriors,
    config: &LAConfig,
    draws: usize,
) -> Result<(Vec<GrowthCluster>, GrowthPosterior)> {
    config.validate()?;
    let clusters = clusters_for_draw(draw, first, second, domain, covariates, config)?;
    let mcmc = GrowthMcmcConfig {
        draws,
        seed: config.seed,
        ..config.growth.clone()
    };
    let post = fit_growth(&clusters, priors, &mcmc)?;
    Ok((clusters, post))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_of_one_to_hundred() {
        let d: Vec<f64> = (1..=100).map(f64::from).collect();
        let (lo, hi) = credible_interval(&d, 0.9);
        assert!((lo - 5.95).abs() < 1e-12 && (hi - 95.05).abs() < 1e-12);
    }

    #[test]
    fn constant_interval() {
        assert_eq!(credible_interval(&[2.5; 10], 0.5), (2.5, 2.5));
    }
}
