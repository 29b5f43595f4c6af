use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::growth::GrowthParams;
use crate::linkage::LinkageDraw;
use crate::pipeline::{NdmPair, ParamSummary};
use crate::stats;

/// Unordered coreferent record pairs over global record positions (first
/// survey, then second), stored with the smaller position first.
pub type PairSet = HashSet<(u32, u32)>;

/// Every pair of records sharing a label.
pub fn pairs_from_partition<L: Ord + Copy>(labels: &[L]) -> PairSet {
    let mut groups: BTreeMap<L, Vec<u32>> = BTreeMap::new();
    for (g, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(g as u32);
    }
    let mut out = PairSet::new();
    for members in groups.values() {
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                out.insert((a, b));
            }
        }
    }
    out
}

/// Coreference pairs implied by nearest-distance matching. Matches are
/// closed transitively, so first-survey records sharing a partner are also
/// paired with each other.
pub fn pairs_from_ndm(pairs: &[NdmPair], n_first: usize, n_second: usize) -> PairSet {
    let mut labels: Vec<u32> = (0..(n_first + n_second) as u32).collect();
    for p in pairs {
        labels[p.first] = (n_first + p.second) as u32;
    }
    pairs_from_partition(&labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkEvalResult {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
}

/// Precision and recall of predicted pairs. With nothing predicted the
/// precision is 1; with nothing to find the recall is 1.
pub fn eval_links(predicted: &PairSet, truth: &PairSet) -> LinkEvalResult {
    let tp = predicted.intersection(truth).count();
    let fp = predicted.len() - tp;
    let fn_ = truth.len() - tp;
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    LinkEvalResult {
        tp,
        fp,
        fn_,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

impl Spread {
    pub fn of(xs: &[f64]) -> Self {
        Self {
            mean: stats::mean(xs),
            q25: stats::quantile(xs, 0.25),
            median: stats::quantile(xs, 0.5),
            q75: stats::quantile(xs, 0.75),
        }
    }
}

/// Link metrics for every retained linkage draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorLinkEval {
    pub per_draw: Vec<LinkEvalResult>,
    pub precision: Spread,
    pub recall: Spread,
}

pub fn eval_posterior_links(draws: &[LinkageDraw], truth: &PairSet) -> PosteriorLinkEval {
    assert!(!draws.is_empty(), "no draws to evaluate");
    let per_draw: Vec<LinkEvalResult> = draws
        .iter()
        .map(|d| eval_links(&pairs_from_partition(&d.lambda), truth))
        .collect();
    let p: Vec<f64> = per_draw.iter().map(|r| r.precision).collect();
    let r: Vec<f64> = per_draw.iter().map(|r| r.recall).collect();
    PosteriorLinkEval {
        precision: Spread::of(&p),
        recall: Spread::of(&r),
        per_draw,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub name: String,
    pub truth: f64,
    pub intervals: usize,
    pub hits: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub rows: Vec<CoverageRow>,
}

impl CoverageResult {
    pub fn get(&self, name: &str) -> Option<&CoverageRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Fraction of replicates whose interval for each named parameter holds
/// the truth. Parameters missing from a replicate are not counted there.
pub fn eval_coverage(replicates: &[Vec<ParamSummary>], truth: &[(String, f64)]) -> CoverageResult {
    assert!(!replicates.is_empty(), "need at least one replicate");
    let rows = truth
        .iter()
        .map(|(name, value)| {
            let (mut intervals, mut hits) = (0, 0);
            for rep in replicates {
                if let Some(s) = rep.iter().find(|s| &s.name == name) {
                    intervals += 1;
                    if s.lo <= *value && *value <= s.hi {
                        hits += 1;
                    }
                }
            }
            CoverageRow {
                name: name.clone(),
                truth: *value,
                intervals,
                hits,
                coverage: if intervals == 0 { f64::NAN } else { hits as f64 / intervals as f64 },
            }
        })
        .collect();
    CoverageResult { rows }
}

/// Named true values of a Gaussian-error growth model, in the order the
/// samplers report them.
pub fn gaussian_truth(params: &GrowthParams) -> Vec<(String, f64)> {
    let family = crate::growth::ErrorFamily::Gaussian;
    GrowthParams::names(params.beta.len(), family)
        .into_iter()
        .zip(params.to_vec(family))
        .collect()
}
