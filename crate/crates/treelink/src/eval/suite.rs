use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::archive::{RunArchive, Trace};
use super::metrics::{
    eval_coverage, eval_links, eval_posterior_links, gaussian_truth, pairs_from_ndm,
    pairs_from_partition, CoverageResult, LinkEvalResult, PosteriorLinkEval,
};
use crate::error::Result;
use crate::growth::{fit_growth, GrowthMcmcConfig, GrowthPosterior, GrowthPriors};
use crate::linkage::{run_gibbs, LinkageDraw, LinkagePriors, SamplerConfig};
use crate::pipeline::{clusters_for_draw, run_la, run_ndm, summarize_growth, CovariateSet, LAConfig, ParamSummary, PooledPosterior};
use crate::rng::derive_seed;
use crate::sim::{generate_dataset, SimConfig};

/// Everything applied to each simulated dataset of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReplicateDesign {
    pub linkage_priors: LinkagePriors,
    pub sampler: SamplerConfig,
    pub growth_priors: GrowthPriors,
    pub la: LAConfig,
    /// Credible level of the reported intervals.
    pub level: f64,
    /// Also fit the growth model on the true linkage.
    pub truth_fit: bool,
}

impl Default for ReplicateDesign {
    fn default() -> Self {
        Self {
            linkage_priors: LinkagePriors::default(),
            sampler: SamplerConfig::default(),
            growth_priors: GrowthPriors::gaussian(),
            la: LAConfig {
                r1: 0.5,
                r2: 3.0,
                ..LAConfig::default()
            },
            level: 0.9,
            truth_fit: false,
        }
    }
}

/// Outcome of one simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub seed: u64,
    pub n_records: [usize; 2],
    pub n_recruits: usize,
    pub truth: Vec<(String, f64)>,
    pub la_links: PosteriorLinkEval,
    pub ndm_links: LinkEvalResult,
    pub pooled: PooledPosterior,
    pub ndm: GrowthPosterior,
    pub ndm_summary: Vec<ParamSummary>,
    pub truth_fit: Option<Vec<ParamSummary>>,
}

/// Simulates one dataset and runs linkage, linkage averaging and the
/// nearest-distance baseline on it. Sampler seeds are derived from
/// `sim.seed`.
pub fn run_replicate(sim: &SimConfig, design: &ReplicateDesign) -> Result<ReplicateResult> {
    let d = generate_dataset(sim)?;
    let labels = d.truth.latent_ids(&d.first, &d.second)?;
    let truth_pairs = pairs_from_partition(&labels);

    let sampler = SamplerConfig {
        seed: derive_seed(sim.seed, 20),
        ..design.sampler.clone()
    };
    let post = run_gibbs(&d.first, &d.second, d.domain, &design.linkage_priors, &sampler)?;
    let la_links = eval_posterior_links(&post.draws, &truth_pairs);

    let la = LAConfig {
        seed: derive_seed(sim.seed, 21),
        ..design.la.clone()
    };
    let covariates = CovariateSet::new(d.covariates.clone());
    let pooled = run_la(&post, &d.first, &d.second, &d.domain, &covariates, &design.growth_priors, &la)?;
    let ndm = run_ndm(&d.first, &d.second, &d.domain, &covariates, &design.growth_priors, &la)?;
    let ndm_links = eval_links(&pairs_from_ndm(&ndm.pairs, d.first.len(), d.second.len()), &truth_pairs);
    let ndm_post = ndm.posterior.expect("run_ndm always fits");

    let truth_fit = if design.truth_fit {
        let (lambda, s) = d.truth.linkage(&d.first, &d.second)?;
        let draw = LinkageDraw {
            iteration: 0,
            lambda,
            s,
        };
        let clusters = clusters_for_draw(&draw, &d.first, &d.second, &d.domain, &covariates, &la)?;
        let mcmc = GrowthMcmcConfig {
            draws: la.k * la.l,
            seed: derive_seed(sim.seed, 22),
            ..la.growth.clone()
        };
        let priors = design.growth_priors.clone().with_b_gamma(pooled.b_gamma);
        Some(summarize_growth(&fit_growth(&clusters, &priors, &mcmc)?, design.level))
    } else {
        None
    };

    Ok(ReplicateResult {
        seed: sim.seed,
        n_records: [d.first.len(), d.second.len()],
        n_recruits: d.truth.recruits.len(),
        truth: gaussian_truth(&d.truth.growth_params),
        la_links,
        ndm_links,
        ndm_summary: summarize_growth(&ndm_post, design.level),
        pooled,
        ndm: ndm_post,
        truth_fit,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ReplicateMeta {
    seed: u64,
    n_records: [usize; 2],
    n_recruits: usize,
    truth: Vec<(String, f64)>,
    ndm_links: LinkEvalResult,
}

impl ReplicateResult {
    /// Summaries of each method, keyed "la", "ndm" and, when fitted, "truth".
    pub fn method_summaries(&self) -> Vec<(&'static str, &[ParamSummary])> {
        let mut out = vec![
            ("la", self.pooled.summaries.as_slice()),
            ("ndm", self.ndm_summary.as_slice()),
        ];
        if let Some(t) = &self.truth_fit {
            out.push(("truth", t.as_slice()));
        }
        out
    }

    /// One archive per replicate: link metrics per draw, summaries of every
    /// method and the pooled and baseline growth draws.
    pub fn to_archive(&self, config: Value) -> Result<RunArchive> {
        let mut a = RunArchive::new("replicate", self.seed, config);
        a.put_document(
            "replicate",
            &ReplicateMeta {
                seed: self.seed,
                n_records: self.n_records,
                n_recruits: self.n_recruits,
                truth: self.truth.clone(),
                ndm_links: self.ndm_links,
            },
        )?;
        a.put_document("la_links", &self.la_links)?;
        a.put_document("la_summary", &self.pooled.summaries)?;
        a.put_document("ndm_summary", &self.ndm_summary)?;
        if let Some(t) = &self.truth_fit {
            a.put_document("truth_summary", t)?;
        }
        for (name, names, rows) in [
            ("la_draws", self.pooled.names(), &self.pooled.draws),
            ("ndm_draws", self.ndm.names(), &self.ndm.draws),
        ] {
            let family = self.pooled.family;
            a.traces.insert(
                name.into(),
                Trace::f64(names, rows.len(), rows.iter().flat_map(|d| d.to_vec(family)).collect()),
            );
        }
        Ok(a)
    }
}

/// A labelled group of replicates, e.g. one density and noise cell.
pub struct SuiteCell<'a> {
    pub label: String,
    pub replicates: &'a [ReplicateResult],
}

/// One row per replicate with dataset-level link metrics and interval hits.
pub fn replicate_csv(cells: &[SuiteCell<'_>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "cell",
        "replicate",
        "seed",
        "n_first",
        "n_second",
        "n_recruits",
        "method",
        "precision",
        "recall",
        "parameter",
        "truth",
        "mean",
        "lo",
        "hi",
        "covered",
    ])?;
    for cell in cells {
        for (r, rep) in cell.replicates.iter().enumerate() {
            for (method, summaries) in rep.method_summaries() {
                let (p, rc) = match method {
                    "la" => (rep.la_links.precision.mean.to_string(), rep.la_links.recall.mean.to_string()),
                    "ndm" => (rep.ndm_links.precision.to_string(), rep.ndm_links.recall.to_string()),
                    _ => ("1".into(), "1".into()),
                };
                for (name, value) in &rep.truth {
                    let Some(s) = summaries.iter().find(|s| &s.name == name) else {
                        continue;
                    };
                    w.write_record([
                        cell.label.clone(),
                        r.to_string(),
                        rep.seed.to_string(),
                        rep.n_records[0].to_string(),
                        rep.n_records[1].to_string(),
                        rep.n_recruits.to_string(),
                        method.to_string(),
                        p.clone(),
                        rc.clone(),
                        name.clone(),
                        value.to_string(),
                        s.mean.to_string(),
                        s.lo.to_string(),
                        s.hi.to_string(),
                        u8::from(s.lo <= *value && *value <= s.hi).to_string(),
                    ])?;
                }
            }
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))?).expect("utf8"))
}

/// Coverage of every method within each cell.
pub fn coverage_tables(cells: &[SuiteCell<'_>]) -> Vec<(String, &'static str, CoverageResult)> {
    let mut out = Vec::new();
    for cell in cells {
        let Some(head) = cell.replicates.first() else {
            continue;
        };
        for (m, (method, _)) in head.method_summaries().into_iter().enumerate() {
            let reps: Vec<Vec<ParamSummary>> = cell
                .replicates
                .iter()
                .filter_map(|r| r.method_summaries().get(m).map(|(_, s)| s.to_vec()))
                .collect();
            out.push((cell.label.clone(), method, eval_coverage(&reps, &head.truth)));
        }
    }
    out
}

pub fn coverage_csv(tables: &[(String, &'static str, CoverageResult)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["cell", "method", "parameter", "truth", "intervals", "hits", "coverage"])?;
    for (cell, method, cov) in tables {
        for row in &cov.rows {
            w.write_record([
                cell.clone(),
                method.to_string(),
                row.name.clone(),
                row.truth.to_string(),
                row.intervals.to_string(),
                row.hits.to_string(),
                row.coverage.to_string(),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))?).expect("utf8"))
}
