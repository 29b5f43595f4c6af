//! The JSON configuration read by the command line front end.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::growth::GrowthPriors;
use crate::linkage::{LinkagePriors, SamplerConfig};
use crate::pipeline::LAConfig;
use crate::rng::derive_seed;
use crate::sim::SimConfig;
use crate::spatial::Domain;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub sim: SimConfig,
    pub linkage: LinkageSection,
    pub growth: GrowthSection,
    pub inputs: Inputs,
    pub suite: SuiteConfig,
    pub timing: TimingConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            sim: SimConfig::default(),
            linkage: LinkageSection::default(),
            growth: GrowthSection::default(),
            inputs: Inputs::default(),
            suite: SuiteConfig::default(),
            timing: TimingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkageSection {
    pub priors: LinkagePriors,
    pub sampler: SamplerConfig,
}

/// Which fixed linkage the `growth` command conditions on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedLinkage {
    #[default]
    Truth,
    Ndm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowthSection {
    pub priors: GrowthPriors,
    pub la: LAConfig,
    /// Credible level of reported intervals.
    pub level: f64,
    /// Adds RSI, LNV and ND within this radius (m) to the covariates.
    pub competition_radius: Option<f64>,
    pub fixed_linkage: FixedLinkage,
}

impl Default for GrowthSection {
    fn default() -> Self {
        Self {
            priors: GrowthPriors::default(),
            la: LAConfig::default(),
            level: 0.9,
            competition_radius: None,
            fixed_linkage: FixedLinkage::Truth,
        }
    }
}

/// Input files. Relative paths are resolved against the directory of the
/// config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    /// Directory written by `simulate`; supplies records, truth, rasters
    /// and domain at once.
    pub dataset: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub covariates: Vec<PathBuf>,
    /// Analysis domain. Defaults to the bounding box of all records.
    pub domain: Option<Domain>,
    /// Archive written by `link`, consumed by `la`.
    pub linkage_archive: Option<PathBuf>,
    /// Archives consumed by `evaluate` and `timing`.
    pub archives: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub replicates: usize,
    pub densities: Vec<f64>,
    pub noises: Vec<f64>,
    /// Growth-rate bounds used in the suite instead of those of `growth.la`.
    pub r1: f64,
    pub r2: f64,
    pub truth_fit: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            replicates: 2,
            densities: vec![0.06],
            noises: vec![0.25],
            r1: 0.5,
            r2: 3.0,
            truth_fit: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    /// Total record counts (both surveys) to simulate.
    pub sizes: Vec<usize>,
    pub boxes: Vec<f64>,
    /// Also time the sampler with every latent as a candidate.
    pub unrestricted: bool,
    pub iterations: usize,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            sizes: vec![200, 400, 800],
            boxes: vec![3.0],
            unrestricted: true,
            iterations: 30,
        }
    }
}

impl RunConfig {
    /// Parses a config, insisting on a supported `schema_version`.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        match raw.get("schema_version").and_then(Value::as_u64) {
            Some(v) if v == u64::from(CONFIG_SCHEMA_VERSION) => {}
            Some(v) => return Err(Error::Config(format!("unsupported schema_version {v}"))),
            None => return Err(Error::Config("missing schema_version".into())),
        }
        let cfg: Self = serde_json::from_value(raw).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves its relative input paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.inputs.resolve(base);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.linkage.priors.validate()?;
        self.linkage.sampler.validate()?;
        self.growth.la.validate()?;
        if !(self.growth.level > 0.0 && self.growth.level < 1.0) {
            return Err(Error::Config("growth.level must lie in (0, 1)".into()));
        }
        if self.growth.competition_radius.is_some_and(|r| !(r > 0.0)) {
            return Err(Error::Config("growth.competition_radius must be positive".into()));
        }
        if !(0.0 < self.suite.r1 && self.suite.r1 < self.suite.r2) {
            return Err(Error::Config("suite needs 0 < r1 < r2".into()));
        }
        Ok(())
    }

    /// Replaces every seed with a child of `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sim.seed = derive_seed(seed, 1);
        self.linkage.sampler.seed = derive_seed(seed, 2);
        self.growth.la.seed = derive_seed(seed, 3);
        self
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

impl Inputs {
    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.dataset,
            &mut self.records,
            &mut self.truth,
            &mut self.linkage_archive,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        self.covariates.iter_mut().for_each(fix);
        self.archives.iter_mut().for_each(fix);
    }
}
