//! Hierarchical spatial record linkage for two surveys.
//!
//! Every record is a noisy, rigidly transformed view of one of `N` latent
//! locations. The second survey carries its own rotation (about the
//! midpoint of the analysis domain) and translation; the first survey
//! anchors the latent coordinate frame. Inference is by Gibbs sampling,
//! with the assignment update restricted to latents inside a bounding box
//! around each record.

mod sampler;
mod state;
mod updates;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{FilePair, RecordFile};
use crate::spatial::{expand_domain, Domain, Point2};

pub use sampler::{
    posterior_similarity, run_gibbs, run_gibbs_on, LinkageDiagnostics, LinkageDraw,
    LinkagePosterior, SimilarityMatrix,
};
pub use state::{init_state, latent_count, LinkageState};
pub use updates::{
    assignment_probabilities, build_indices, update_lambda, update_s, update_sigma2, update_theta, update_translation,
    ThetaAdapter, UpdateCounters,
};

/// Hyperparameters of the linkage model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkagePriors {
    /// Inverse-gamma shape for the location noise variance.
    pub c_sigma: f64,
    /// Inverse-gamma scale for the location noise variance (m²).
    pub d_sigma: f64,
    /// Upper truncation of the noise variance (m²).
    pub b_sigma: f64,
    /// Von Mises concentration of the rotation prior.
    pub kappa: f64,
    /// Von Mises mean of the rotation prior (rad).
    pub nu: f64,
    /// Rotations are restricted to `|theta| < b_theta`.
    pub b_theta: f64,
    /// Prior variance of each translation coordinate (m²).
    pub sigma_t2: f64,
    /// Latent population size is `q` times the larger file size.
    pub q: f64,
    /// Hold the second survey's rotation at zero.
    pub fix_theta: bool,
    /// Hold the second survey's translation at zero.
    pub fix_translation: bool,
    /// Latent locations live on the analysis domain grown by this margin (m).
    pub latent_domain_margin_m: f64,
}

impl Default for LinkagePriors {
    fn default() -> Self {
        Self {
            c_sigma: 2.0,
            d_sigma: 0.1,
            b_sigma: 4.0,
            kappa: 1.0,
            nu: 0.0,
            b_theta: 0.2,
            sigma_t2: 4.0,
            q: 1.25,
            fix_theta: false,
            fix_translation: false,
            latent_domain_margin_m: 5.0,
        }
    }
}

impl LinkagePriors {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("c_sigma", self.c_sigma),
            ("d_sigma", self.d_sigma),
            ("b_sigma", self.b_sigma),
            ("kappa", self.kappa),
            ("sigma_t2", self.sigma_t2),
            ("q", self.q),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.b_theta > 0.0 && self.b_theta <= std::f64::consts::PI) {
            return Err(Error::Config(format!(
                "b_theta must lie in (0, pi], got {}",
                self.b_theta
            )));
        }
        if !(self.latent_domain_margin_m >= 0.0) {
            return Err(Error::Config(
                "latent_domain_margin_m must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// How candidate latents are gathered for each assignment update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CandidateMode {
    /// Latents inside an axis-aligned box around the record.
    #[default]
    BoundingBox,
    /// Every latent, without touching the spatial index.
    Exhaustive,
}

/// Sampler controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    /// Half-width of the candidate box (m).
    pub box_half_width: f64,
    pub min_candidates: usize,
    pub box_growth_factor: f64,
    pub candidate_mode: CandidateMode,
    /// Visit records in a fresh random order each sweep instead of ascending.
    pub random_scan: bool,
    /// Initial random-walk step for the rotation (rad).
    pub theta_step: f64,
    /// Target acceptance rate for the rotation step during burn-in.
    pub theta_target_acceptance: f64,
    /// Store per-sweep wall-clock times. Off by default so that archives
    /// are reproducible byte for byte.
    pub record_timing: bool,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            burnin: 1000,
            thin: 10,
            box_half_width: 3.0,
            min_candidates: 2,
            box_growth_factor: 1.5,
            candidate_mode: CandidateMode::BoundingBox,
            random_scan: false,
            theta_step: 0.002,
            theta_target_acceptance: 0.4,
            record_timing: false,
            seed: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burnin >= self.iterations {
            return Err(Error::Config(format!(
                "burnin ({}) must be smaller than iterations ({})",
                self.burnin, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if !(self.box_half_width > 0.0) {
            return Err(Error::Config("box_half_width must be positive".into()));
        }
        if self.min_candidates < 2 {
            return Err(Error::Config("min_candidates must be at least 2".into()));
        }
        if !(self.box_growth_factor > 1.0) {
            return Err(Error::Config("box_growth_factor must exceed 1".into()));
        }
        if !(self.theta_step > 0.0) {
            return Err(Error::Config("theta_step must be positive".into()));
        }
        Ok(())
    }

    pub fn retained_draws(&self) -> usize {
        (self.iterations - self.burnin) / self.thin
    }
}

/// Observed data in the layout the sampler works on: all locations in one
/// array, first survey then second.
#[derive(Debug, Clone)]
pub struct LinkageData {
    pub locations: Vec<Point2>,
    pub n: [usize; 2],
    /// Analysis domain `D`.
    pub domain: Domain,
    /// Support of the latent locations, `D` grown by the configured margin.
    pub latent_domain: Domain,
    /// Rotation center, the midpoint of `D`.
    pub mu: Point2,
}

impl LinkageData {
    pub fn new(first: &RecordFile, second: &RecordFile, domain: Domain, margin: f64) -> Self {
        let pair = FilePair::new(first, second);
        let mut locations = Vec::with_capacity(pair.total());
        locations.extend(first.locations());
        locations.extend(second.locations());
        Self::from_locations(locations, [first.len(), second.len()], domain, margin)
    }

    pub fn from_locations(
        locations: Vec<Point2>,
        n: [usize; 2],
        domain: Domain,
        margin: f64,
    ) -> Self {
        assert_eq!(locations.len(), n[0] + n[1]);
        Self {
            locations,
            n,
            latent_domain: expand_domain(&domain, margin),
            mu: domain.midpoint(),
            domain,
        }
    }

    pub fn total(&self) -> usize {
        self.n[0] + self.n[1]
    }

    /// Survey slot (0 or 1) of global record `g`.
    #[inline]
    pub fn file_of(&self, g: usize) -> usize {
        usize::from(g >= self.n[0])
    }

    pub fn file_range(&self, file: usize) -> std::ops::Range<usize> {
        if file == 0 {
            0..self.n[0]
        } else {
            self.n[0]..self.total()
        }
    }
}
