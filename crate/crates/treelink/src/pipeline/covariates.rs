use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::{competition_metrics, sample_raster, GrowthCluster, Raster};
use crate::records::RecordFile;
use crate::stats;

/// Competition metrics of the first survey, standardized over the records
/// where all three are defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitionCovariates {
    pub radius: f64,
    /// Standardized (RSI, LNV, ND) per first-survey record, in file order.
    pub values: Vec<Option<[f64; 3]>>,
}

impl CompetitionCovariates {
    pub fn new(first: &RecordFile, radius: f64) -> Result<Self> {
        let raw = competition_metrics(first, radius);
        let defined: Vec<[f64; 3]> = raw
            .iter()
            .filter_map(|m| m.rsi.map(|rsi| [rsi, m.lnv, m.nd]))
            .collect();
        if defined.len() < 2 {
            return Err(Error::DegenerateCovariate("competition".into()));
        }
        let mut scale = [(0.0, 1.0); 3];
        for (k, name) in ["rsi", "lnv", "nd"].iter().enumerate() {
            let col: Vec<f64> = defined.iter().map(|v| v[k]).collect();
            let sd = stats::sd(&col);
            if !(sd > 0.0) {
                return Err(Error::DegenerateCovariate((*name).into()));
            }
            scale[k] = (stats::mean(&col), sd);
        }
        let values = raw
            .iter()
            .map(|m| {
                m.rsi.map(|rsi| {
                    let v = [rsi, m.lnv, m.nd];
                    std::array::from_fn(|k| (v[k] - scale[k].0) / scale[k].1)
                })
            })
            .collect();
        Ok(Self { radius, values })
    }
}

/// Everything needed to build a covariate row for a growth cluster.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CovariateSet {
    /// Standardized rasters, sampled at the cluster's latent location.
    pub rasters: Vec<Raster>,
    pub competition: Option<CompetitionCovariates>,
}

impl CovariateSet {
    pub fn new(rasters: Vec<Raster>) -> Self {
        Self {
            rasters,
            competition: None,
        }
    }

    pub fn with_competition(mut self, first: &RecordFile, radius: f64) -> Result<Self> {
        self.competition = Some(CompetitionCovariates::new(first, radius)?);
        Ok(self)
    }

    /// Coefficients in the growth model, intercept included.
    pub fn n_beta(&self) -> usize {
        1 + self.rasters.len() + if self.competition.is_some() { 3 } else { 0 }
    }

    /// Fills in covariate rows. Competition metrics come from the cluster's
    /// largest first-survey member; clusters where that record has no
    /// neighbors are dropped.
    pub fn attach(&self, clusters: Vec<GrowthCluster>, first: &RecordFile) -> Result<Vec<GrowthCluster>> {
        let mut out = Vec::with_capacity(clusters.len());
        for mut c in clusters {
            let mut x = Vec::with_capacity(self.n_beta());
            x.push(1.0);
            for r in &self.rasters {
                x.push(sample_raster(r, &c.latent_location)?);
            }
            if let Some(comp) = &self.competition {
                let lead = c
                    .members
                    .iter()
                    .filter(|m| m.file == 0)
                    .max_by(|a, b| {
                        let va = first.records[a.index].volume;
                        let vb = first.records[b.index].volume;
                        va.total_cmp(&vb).then(b.index.cmp(&a.index))
                    })
                    .expect("growth clusters span both surveys");
                match comp.values[lead.index] {
                    Some(v) => x.extend_from_slice(&v),
                    None => continue,
                }
            }
            c.covariates = x;
            out.push(c);
        }
        Ok(out)
    }
}
