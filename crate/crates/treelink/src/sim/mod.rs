//! Synthetic two-survey datasets with known linkage.

mod field;
mod latents;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::{mm_mean, sample_raster, standardize_covariates, GrowthParams, Raster, Standardization};
use crate::records::{Record, RecordFile};
use crate::rng::{derive_seed, rng_from_seed};
use crate::spatial::{Domain, Point2, RigidTransform};

pub use field::FourierField;
pub use latents::{generate_latents, generate_recruits, LatentPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Latents per m².
    pub density: f64,
    /// Side of the simulated square (m).
    pub domain_side: f64,
    /// Side of the centered analysis window (m).
    pub window_side: f64,
    pub hardcore_radius: f64,
    /// Chance that a proposal inside the hard-core radius is kept.
    pub softcore_violation_prob: f64,
    /// Location noise SD per coordinate (m).
    pub sigma_obs: f64,
    /// Rotation of the second survey (rad).
    pub theta_true: f64,
    /// Translation of the second survey (m).
    pub t_true: Point2,
    /// Growth truth; errors are Gaussian with variance `tau`.
    pub growth_params: GrowthParams,
    /// Recruits per m³ of first-survey volume.
    pub recruit_rate: f64,
    /// Scale of the Cauchy recruit offsets (m).
    pub recruit_offset_scale: f64,
    /// Log of the median mark at zero covariates.
    pub mark_log_median: f64,
    pub mark_log_sd: f64,
    /// Effects of the leading covariates on the log mark.
    pub mark_covariate_effects: Vec<f64>,
    pub first_year: i32,
    pub last_year: i32,
    /// Number of covariate rasters.
    pub n_covariates: usize,
    pub field_length_scale: f64,
    pub field_cellsize: f64,
    pub field_features: usize,
    /// Smallest second-survey volume (m³).
    pub volume_floor: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            density: 0.06,
            domain_side: 130.0,
            window_side: 100.0,
            hardcore_radius: 1.5,
            softcore_violation_prob: 0.05,
            sigma_obs: 0.25,
            theta_true: 0.003,
            t_true: Point2::new(0.5, -0.35),
            growth_params: GrowthParams {
                alpha: 1.0,
                gamma: 12.0,
                beta: vec![3.0, 0.5, -0.5, 0.5, -0.5],
                tau: 0.5,
                delta: 0.0,
                omega: 0.0,
            },
            recruit_rate: 0.001,
            recruit_offset_scale: 1.0,
            mark_log_median: 20f64.ln(),
            mark_log_sd: 1.2,
            mark_covariate_effects: vec![0.2, -0.2],
            first_year: 2015,
            last_year: 2019,
            n_covariates: 4,
            field_length_scale: 15.0,
            field_cellsize: 1.0,
            field_features: 300,
            volume_floor: 0.01,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.density > 0.0) {
            return bad("density must be positive");
        }
        if !(0.0..1.0).contains(&self.softcore_violation_prob) {
            return bad("softcore_violation_prob must lie in [0, 1)");
        }
        if !(self.sigma_obs > 0.0) {
            return bad("sigma_obs must be positive");
        }
        if !(self.window_side > 0.0 && self.window_side <= self.domain_side) {
            return bad("window_side must lie in (0, domain_side]");
        }
        if self.last_year <= self.first_year {
            return bad("last_year must follow first_year");
        }
        if self.growth_params.beta.len() != self.n_covariates + 1 {
            return bad("growth_params.beta needs one entry per covariate plus an intercept");
        }
        if self.mark_covariate_effects.len() > self.n_covariates {
            return bad("more mark covariate effects than covariates");
        }
        if !(self.growth_params.tau >= 0.0) || !(self.recruit_rate >= 0.0) {
            return bad("tau and recruit_rate must be nonnegative");
        }
        if !(self.hardcore_radius >= 0.0 && self.mark_log_sd > 0.0 && self.recruit_offset_scale > 0.0) {
            return bad("radii and scales must be positive");
        }
        Ok(())
    }

    /// The simulated square.
    pub fn area(&self) -> Domain {
        Domain::square(0.0, self.domain_side)
    }

    /// The analysis window.
    pub fn window(&self) -> Domain {
        Domain::square(0.5 * (self.domain_side - self.window_side), self.window_side)
    }

    pub fn years(&self) -> f64 {
        f64::from(self.last_year - self.first_year)
    }
}

/// Which latent produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthLink {
    pub file_index: u8,
    pub record_id: u64,
    pub latent_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub latents: Vec<LatentPoint>,
    pub recruits: Vec<LatentPoint>,
    /// Latent index of each recruit's parent.
    pub recruit_parents: Vec<usize>,
    /// One entry per emitted record. Latent ids at or above
    /// `latents.len()` are recruits.
    pub links: Vec<TruthLink>,
    pub growth_params: GrowthParams,
    pub theta: f64,
    pub t: Point2,
}

impl SimTruth {
    pub fn is_recruit(&self, latent_id: u64) -> bool {
        latent_id as usize >= self.latents.len()
    }

    pub fn latent_location(&self, latent_id: u64) -> Point2 {
        let k = latent_id as usize;
        if k < self.latents.len() {
            self.latents[k].location
        } else {
            self.recruits[k - self.latents.len()].location
        }
    }

    /// True latent of every record, first file then second, in file order.
    pub fn latent_ids(&self, first: &RecordFile, second: &RecordFile) -> Result<Vec<u64>> {
        let lookup = |file: &RecordFile| -> Result<Vec<u64>> {
            let map: std::collections::HashMap<u64, u64> = self
                .links
                .iter()
                .filter(|l| l.file_index == file.file_index)
                .map(|l| (l.record_id, l.latent_id))
                .collect();
            file.records
                .iter()
                .map(|r| {
                    map.get(&r.id).copied().ok_or_else(|| Error::Validation {
                        row: None,
                        message: format!("record {} of file {} has no truth entry", r.id, file.file_index),
                    })
                })
                .collect()
        };
        let mut ids = lookup(first)?;
        ids.extend(lookup(second)?);
        Ok(ids)
    }

    /// Dense linkage labels (0..K) and the matching latent locations.
    pub fn linkage(&self, first: &RecordFile, second: &RecordFile) -> Result<(Vec<u32>, Vec<Point2>)> {
        let ids = self.latent_ids(first, second)?;
        let mut dense = std::collections::BTreeMap::new();
        for &id in &ids {
            let next = dense.len() as u32;
            dense.entry(id).or_insert(next);
        }
        let mut s = vec![Point2::ORIGIN; dense.len()];
        for (&id, &k) in &dense {
            s[k as usize] = self.latent_location(id);
        }
        Ok((ids.iter().map(|id| dense[id]).collect(), s))
    }
}

/// A generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub config: SimConfig,
    /// Analysis window.
    pub domain: Domain,
    pub first: RecordFile,
    pub second: RecordFile,
    /// Standardized covariate rasters.
    pub covariates: Vec<Raster>,
    pub standardization: Vec<Standardization>,
    pub truth: SimTruth,
}

/// Covariate row `[1, z_1(p), ..., z_k(p)]`.
pub fn covariate_row(covariates: &[Raster], p: &Point2) -> Result<Vec<f64>> {
    let mut x = Vec::with_capacity(covariates.len() + 1);
    x.push(1.0);
    for r in covariates {
        x.push(sample_raster(r, p)?);
    }
    Ok(x)
}

/// Observes latents (and recruits, second survey only) with location
/// noise, applies the second survey's misalignment and growth, and keeps
/// records falling in the analysis window.
pub fn generate_observation<R: Rng + ?Sized>(
    latents: &[LatentPoint],
    recruits: &[LatentPoint],
    recruit_parents: &[usize],
    covariates: &[Raster],
    config: &SimConfig,
    rng: &mut R,
) -> Result<(RecordFile, RecordFile, SimTruth)> {
    let window = config.window();
    let noise = Normal::new(0.0, config.sigma_obs).map_err(|e| Error::Config(e.to_string()))?;
    let growth_sd = config.growth_params.tau.sqrt();
    let years = config.years();
    let tr = RigidTransform::new(config.theta_true, config.t_true, window.midpoint());
    let jitter = |p: Point2, rng: &mut R| Point2::new(p.x + noise.sample(rng), p.y + noise.sample(rng));

    let mut first: Vec<(u64, Point2, f64)> = Vec::new();
    let mut second: Vec<(u64, Point2, f64)> = Vec::new();
    for (j, l) in latents.iter().enumerate() {
        let y1 = jitter(l.location, rng);
        let y2 = jitter(tr.apply(&l.location), rng);
        let mu = mm_mean(&config.growth_params, &covariate_row(covariates, &l.location)?, l.mark);
        let e: f64 = if growth_sd > 0.0 {
            rng.sample::<f64, _>(rand_distr::StandardNormal) * growth_sd
        } else {
            0.0
        };
        let v2 = (l.mark + years * (mu + e)).max(config.volume_floor);
        if window.contains(&y1) {
            first.push((j as u64, y1, l.mark));
        }
        if window.contains(&y2) {
            second.push((j as u64, y2, v2));
        }
    }
    for (k, r) in recruits.iter().enumerate() {
        let y2 = jitter(tr.apply(&r.location), rng);
        let mu = mm_mean(&config.growth_params, &covariate_row(covariates, &r.location)?, r.mark);
        let v2 = (r.mark + years * mu).max(config.volume_floor);
        if window.contains(&y2) {
            second.push(((latents.len() + k) as u64, y2, v2));
        }
    }
    first.shuffle(rng);
    second.shuffle(rng);
    let mut links = Vec::with_capacity(first.len() + second.len());
    let mut emit = |rows: Vec<(u64, Point2, f64)>, file_index: u8, year: i32| {
        let records = rows
            .into_iter()
            .enumerate()
            .map(|(i, (latent_id, location, volume))| {
                let id = i as u64 + 1;
                links.push(TruthLink {
                    file_index,
                    record_id: id,
                    latent_id,
                });
                Record { id, location, volume }
            })
            .collect();
        RecordFile::new(file_index, year, records)
    };
    let f1 = emit(first, 1, config.first_year);
    let f2 = emit(second, 2, config.last_year);
    let truth = SimTruth {
        latents: latents.to_vec(),
        recruits: recruits.to_vec(),
        recruit_parents: recruit_parents.to_vec(),
        links,
        growth_params: config.growth_params.clone(),
        theta: config.theta_true,
        t: config.t_true,
    };
    Ok((f1, f2, truth))
}

/// Covariate rasters over the simulated square, standardized over the
/// analysis window.
pub fn generate_covariates<R: Rng + ?Sized>(
    config: &SimConfig,
    rng: &mut R,
) -> Result<(Vec<Raster>, Vec<Standardization>)> {
    let raw: Vec<Raster> = (0..config.n_covariates)
        .map(|_| {
            FourierField::new(config.field_length_scale, config.field_features, rng).rasterize(
                0.0,
                config.domain_side,
                config.field_cellsize,
            )
        })
        .collect();
    standardize_covariates(&raw, &config.window())
}

/// Full pipeline, deterministic in `config.seed`.
pub fn generate_dataset(config: &SimConfig) -> Result<Dataset> {
    config.validate()?;
    let stream = |k| rng_from_seed(derive_seed(config.seed, k));
    let (covariates, standardization) = generate_covariates(config, &mut stream(1))?;
    let latents = generate_latents(config, &covariates, &mut stream(2))?;
    let (recruits, parents) = generate_recruits(&latents, config, &mut stream(3));
    let (first, second, truth) =
        generate_observation(&latents, &recruits, &parents, &covariates, config, &mut stream(4))?;
    Ok(Dataset {
        config: config.clone(),
        domain: config.window(),
        first,
        second,
        covariates,
        standardization,
        truth,
    })
}
