use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::growth::{ErrorFamily, GrowthParams, GrowthPosterior};
use crate::linkage::{CandidateMode, LinkageDiagnostics, LinkageDraw, LinkagePosterior, SamplerConfig};
use crate::pipeline::{summarize_growth, NDMResult, NdmPair, ParamSummary, PooledDraw, PooledPosterior, SkippedDraw};
use crate::spatial::Point2;

pub const ARCHIVE_SCHEMA_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const CONFIG: &str = "config.json";

/// Element type of a binary trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F64,
    U32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceData {
    F64(Vec<f64>),
    U32(Vec<u32>),
}

impl TraceData {
    fn len(&self) -> usize {
        match self {
            TraceData::F64(v) => v.len(),
            TraceData::U32(v) => v.len(),
        }
    }

    fn dtype(&self) -> Dtype {
        match self {
            TraceData::F64(_) => Dtype::F64,
            TraceData::U32(_) => Dtype::U32,
        }
    }

    fn to_le_bytes(&self) -> Vec<u8> {
        match self {
            TraceData::F64(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            TraceData::U32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }

    fn from_le_bytes(bytes: &[u8], dtype: Dtype) -> Result<Self> {
        let width = match dtype {
            Dtype::F64 => 8,
            Dtype::U32 => 4,
        };
        if !bytes.len().is_multiple_of(width) {
            return Err(Error::Archive(format!(
                "trace of {} bytes is not a whole number of {width}-byte values",
                bytes.len()
            )));
        }
        let chunks = bytes.chunks_exact(width);
        Ok(match dtype {
            Dtype::F64 => TraceData::F64(
                chunks
                    .map(|c| f64::from_le_bytes(c.try_into().expect("width 8")))
                    .collect(),
            ),
            Dtype::U32 => TraceData::U32(
                chunks
                    .map(|c| u32::from_le_bytes(c.try_into().expect("width 4")))
                    .collect(),
            ),
        })
    }
}

/// Row-major table of draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub columns: Vec<String>,
    pub rows: usize,
    pub data: TraceData,
}

impl Trace {
    pub fn f64(columns: Vec<String>, rows: usize, data: Vec<f64>) -> Self {
        Self { columns, rows, data: TraceData::F64(data) }
    }

    pub fn u32(columns: Vec<String>, rows: usize, data: Vec<u32>) -> Self {
        Self { columns, rows, data: TraceData::U32(data) }
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    fn check(&self, name: &str) -> Result<()> {
        if self.data.len() != self.rows * self.cols() {
            return Err(Error::Archive(format!(
                "trace `{name}` holds {} values for shape {}x{}",
                self.data.len(),
                self.rows,
                self.cols()
            )));
        }
        Ok(())
    }

    pub fn as_f64(&self) -> Result<&[f64]> {
        match &self.data {
            TraceData::F64(v) => Ok(v),
            TraceData::U32(_) => Err(Error::Archive("expected an f64 trace".into())),
        }
    }

    pub fn as_u32(&self) -> Result<&[u32]> {
        match &self.data {
            TraceData::U32(v) => Ok(v),
            TraceData::F64(_) => Err(Error::Archive("expected a u32 trace".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "lowercase")]
enum Entry {
    Config { path: String, sha256: String, bytes: u64 },
    Document { name: String, path: String, sha256: String, bytes: u64 },
    Trace {
        name: String,
        path: String,
        sha256: String,
        bytes: u64,
        dtype: Dtype,
        rows: usize,
        columns: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    kind: String,
    seed: u64,
    files: Vec<Entry>,
}

/// A run on disk: a directory holding `manifest.json`, `config.json`, one
/// JSON file per document and one little-endian binary file per trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArchive {
    pub kind: String,
    pub seed: u64,
    pub config: Value,
    pub documents: BTreeMap<String, Value>,
    pub traces: BTreeMap<String, Trace>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn json_bytes(v: &Value) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v)?;
    out.push(b'\n');
    Ok(out)
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        && name != "manifest"
        && name != "config"
}

impl RunArchive {
    pub fn new(kind: impl Into<String>, seed: u64, config: Value) -> Self {
        Self {
            kind: kind.into(),
            seed,
            config,
            documents: BTreeMap::new(),
            traces: BTreeMap::new(),
        }
    }

    pub fn put_document<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.documents.insert(name.into(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn document<T: DeserializeOwned>(&self, name: &str) -> Result<T> {
        let v = self
            .documents
            .get(name)
            .ok_or_else(|| Error::Archive(format!("{} archive has no `{name}` document", self.kind)))?;
        Ok(T::deserialize(v)?)
    }

    pub fn trace(&self, name: &str) -> Result<&Trace> {
        self.traces
            .get(name)
            .ok_or_else(|| Error::Archive(format!("{} archive has no `{name}` trace", self.kind)))
    }

    fn expect_kind(&self, kinds: &[&str]) -> Result<()> {
        if kinds.contains(&self.kind.as_str()) {
            Ok(())
        } else {
            Err(Error::Archive(format!(
                "expected a {} archive, found `{}`",
                kinds.join(" or "),
                self.kind
            )))
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        let bytes = json_bytes(&self.config)?;
        std::fs::write(dir.join(CONFIG), &bytes)?;
        files.push(Entry::Config {
            path: CONFIG.into(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
        for (name, doc) in &self.documents {
            if !valid_name(name) {
                return Err(Error::Archive(format!("bad document name `{name}`")));
            }
            let path = format!("{name}.json");
            let bytes = json_bytes(doc)?;
            std::fs::write(dir.join(&path), &bytes)?;
            files.push(Entry::Document {
                name: name.clone(),
                path,
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            });
        }
        for (name, trace) in &self.traces {
            if !valid_name(name) {
                return Err(Error::Archive(format!("bad trace name `{name}`")));
            }
            trace.check(name)?;
            let path = format!("{name}.bin");
            let bytes = trace.data.to_le_bytes();
            std::fs::write(dir.join(&path), &bytes)?;
            files.push(Entry::Trace {
                name: name.clone(),
                path,
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
                dtype: trace.data.dtype(),
                rows: trace.rows,
                columns: trace.columns.clone(),
            });
        }
        let manifest = Manifest {
            schema_version: ARCHIVE_SCHEMA_VERSION,
            kind: self.kind.clone(),
            seed: self.seed,
            files,
        };
        std::fs::write(dir.join(MANIFEST), json_bytes(&serde_json::to_value(&manifest)?)?)?;
        Ok(())
    }

    /// Reads an archive, checking every file against its manifest hash.
    pub fn read(dir: &Path) -> Result<Self> {
        let raw = std::fs::read(dir.join(MANIFEST))
            .map_err(|e| Error::Archive(format!("cannot read {}: {e}", dir.join(MANIFEST).display())))?;
        let manifest: Manifest = serde_json::from_slice(&raw)?;
        if manifest.schema_version != ARCHIVE_SCHEMA_VERSION {
            return Err(Error::Archive(format!(
                "unsupported archive schema version {}",
                manifest.schema_version
            )));
        }
        let load = |path: &str, sha256: &str| -> Result<Vec<u8>> {
            let bytes = std::fs::read(dir.join(path))?;
            if sha256_hex(&bytes) != sha256 {
                return Err(Error::Archive(format!("checksum mismatch for {path}")));
            }
            Ok(bytes)
        };
        let mut archive = RunArchive::new(manifest.kind, manifest.seed, Value::Null);
        for entry in &manifest.files {
            match entry {
                Entry::Config { path, sha256, .. } => {
                    archive.config = serde_json::from_slice(&load(path, sha256)?)?;
                }
                Entry::Document { name, path, sha256, .. } => {
                    archive
                        .documents
                        .insert(name.clone(), serde_json::from_slice(&load(path, sha256)?)?);
                }
                Entry::Trace { name, path, sha256, dtype, rows, columns, .. } => {
                    let data = TraceData::from_le_bytes(&load(path, sha256)?, *dtype)?;
                    let trace = Trace { columns: columns.clone(), rows: *rows, data };
                    trace.check(name)?;
                    archive.traces.insert(name.clone(), trace);
                }
            }
        }
        Ok(archive)
    }

    /// Parameter summaries, for archives that carry them.
    pub fn summaries(&self) -> Result<Vec<ParamSummary>> {
        self.document("summary")
    }

    // linkage

    pub fn from_linkage(post: &LinkagePosterior, sampler: &SamplerConfig, config: Value) -> Result<Self> {
        let mut a = RunArchive::new("link", post.seed, config);
        let n = post.n_total();
        let m = post.n_latent;
        for d in &post.draws {
            if d.lambda.len() != n || d.s.len() != m {
                return Err(Error::Archive("linkage draws have inconsistent sizes".into()));
            }
        }
        a.put_document(
            "linkage",
            &LinkageMeta {
                iterations: post.iterations,
                burnin: post.burnin,
                thin: post.thin,
                n_records: post.n_records,
                n_latent: m,
                draw_iterations: post.draws.iter().map(|d| d.iteration).collect(),
                diagnostics: post.diagnostics,
            },
        )?;
        let rows = post.draws.len();
        a.traces.insert(
            "lambda".into(),
            Trace::u32(
                (0..n).map(|g| format!("r{g}")).collect(),
                rows,
                post.draws.iter().flat_map(|d| d.lambda.iter().copied()).collect(),
            ),
        );
        a.traces.insert(
            "latents".into(),
            Trace::f64(
                (0..m).flat_map(|j| [format!("x{j}"), format!("y{j}")]).collect(),
                rows,
                post.draws
                    .iter()
                    .flat_map(|d| d.s.iter().flat_map(|p| [p.x, p.y]))
                    .collect(),
            ),
        );
        let sweeps = post.sigma2_trace.len();
        a.traces.insert(
            "chain".into(),
            Trace::f64(
                ["sigma2", "theta", "tx", "ty"].map(String::from).to_vec(),
                sweeps,
                (0..sweeps)
                    .flat_map(|i| {
                        [
                            post.sigma2_trace[i],
                            post.theta_trace[i],
                            post.t_trace[i].x,
                            post.t_trace[i].y,
                        ]
                    })
                    .collect(),
            ),
        );
        if let Some(times) = &post.sweep_seconds {
            a.traces.insert(
                "sweep_seconds".into(),
                Trace::f64(vec!["seconds".into()], times.len(), times.clone()),
            );
            a.put_document(
                "timing",
                &TimingMeta {
                    n_records: n,
                    box_half_width: match sampler.candidate_mode {
                        CandidateMode::BoundingBox => Some(sampler.box_half_width),
                        CandidateMode::Exhaustive => None,
                    },
                    mean_sweep_seconds: post.mean_sweep_seconds().unwrap_or(0.0),
                },
            )?;
        }
        Ok(a)
    }

    pub fn linkage_posterior(&self) -> Result<LinkagePosterior> {
        self.expect_kind(&["link"])?;
        let meta: LinkageMeta = self.document("linkage")?;
        let n = meta.n_records[0] + meta.n_records[1];
        let lambda = self.trace("lambda")?.as_u32()?;
        let latents = self.trace("latents")?.as_f64()?;
        let rows = meta.draw_iterations.len();
        if lambda.len() != rows * n || latents.len() != rows * 2 * meta.n_latent {
            return Err(Error::Archive("linkage traces do not match their metadata".into()));
        }
        let draws = meta
            .draw_iterations
            .iter()
            .enumerate()
            .map(|(i, &iteration)| LinkageDraw {
                iteration,
                lambda: lambda[i * n..(i + 1) * n].to_vec(),
                s: latents[i * 2 * meta.n_latent..(i + 1) * 2 * meta.n_latent]
                    .chunks_exact(2)
                    .map(|c| Point2::new(c[0], c[1]))
                    .collect(),
            })
            .collect();
        let chain = self.trace("chain")?.as_f64()?;
        let sweep_seconds = match self.traces.get("sweep_seconds") {
            Some(t) => Some(t.as_f64()?.to_vec()),
            None => None,
        };
        Ok(LinkagePosterior {
            draws,
            sigma2_trace: chain.chunks_exact(4).map(|c| c[0]).collect(),
            theta_trace: chain.chunks_exact(4).map(|c| c[1]).collect(),
            t_trace: chain.chunks_exact(4).map(|c| Point2::new(c[2], c[3])).collect(),
            iterations: meta.iterations,
            burnin: meta.burnin,
            thin: meta.thin,
            seed: self.seed,
            n_records: meta.n_records,
            n_latent: meta.n_latent,
            diagnostics: meta.diagnostics,
            sweep_seconds,
        })
    }

    // growth

    fn put_growth(&mut self, post: &GrowthPosterior, level: f64) -> Result<()> {
        self.put_document(
            "growth",
            &GrowthMeta {
                family: post.family,
                n_beta: post.n_beta,
                n_clusters: post.n_clusters,
                b_gamma: post.b_gamma,
                acceptance: post.acceptance,
                burnin_acceptance: post.burnin_acceptance,
            },
        )?;
        self.put_document("summary", &summarize_growth(post, level))?;
        let names = post.names();
        self.traces.insert(
            "draws".into(),
            Trace::f64(
                names,
                post.draws.len(),
                post.draws.iter().flat_map(|d| d.to_vec(post.family)).collect(),
            ),
        );
        Ok(())
    }

    fn draws_trace(&self, family: ErrorFamily, n_beta: usize) -> Result<Vec<GrowthParams>> {
        let t = self.trace("draws")?;
        if t.columns != GrowthParams::names(n_beta, family) {
            return Err(Error::Archive("growth trace columns do not match the model".into()));
        }
        Ok(t.as_f64()?
            .chunks_exact(t.cols())
            .map(|row| GrowthParams::from_slice(row, n_beta, family))
            .collect())
    }

    /// A single growth fit, summarized at `level`.
    pub fn from_growth(post: &GrowthPosterior, seed: u64, level: f64, config: Value) -> Result<Self> {
        let mut a = RunArchive::new("growth", seed, config);
        a.put_growth(post, level)?;
        Ok(a)
    }

    pub fn growth_posterior(&self) -> Result<GrowthPosterior> {
        self.expect_kind(&["growth", "ndm"])?;
        let meta: GrowthMeta = self.document("growth")?;
        Ok(GrowthPosterior {
            draws: self.draws_trace(meta.family, meta.n_beta)?,
            family: meta.family,
            n_beta: meta.n_beta,
            n_clusters: meta.n_clusters,
            b_gamma: meta.b_gamma,
            acceptance: meta.acceptance,
            burnin_acceptance: meta.burnin_acceptance,
        })
    }

    pub fn from_ndm(result: &NDMResult, seed: u64, level: f64, config: Value) -> Result<Self> {
        let mut a = RunArchive::new("ndm", seed, config);
        a.put_document("pairs", &result.pairs)?;
        if let Some(post) = &result.posterior {
            a.put_growth(post, level)?;
        }
        Ok(a)
    }

    pub fn ndm_pairs(&self) -> Result<Vec<NdmPair>> {
        self.expect_kind(&["ndm"])?;
        self.document("pairs")
    }

    // linkage averaging

    pub fn from_pooled(pooled: &PooledPosterior, seed: u64, config: Value) -> Result<Self> {
        let mut a = RunArchive::new("la", seed, config);
        a.put_document(
            "pooled",
            &PooledMeta {
                family: pooled.family,
                n_beta: pooled.n_beta,
                b_gamma: pooled.b_gamma,
                k: pooled.k,
                l: pooled.l,
                clusters_per_draw: pooled.clusters_per_draw.clone(),
                skipped: pooled.skipped.clone(),
                acceptance: pooled.acceptance.clone(),
            },
        )?;
        a.put_document("summary", &pooled.summaries)?;
        a.traces.insert(
            "draws".into(),
            Trace::f64(
                pooled.names(),
                pooled.draws.len(),
                pooled.draws.iter().flat_map(|d| d.to_vec(pooled.family)).collect(),
            ),
        );
        let tags = pooled
            .tags
            .iter()
            .map(|t| -> Result<[u32; 3]> {
                let c = |v: usize| {
                    u32::try_from(v).map_err(|_| Error::Archive(format!("tag {v} exceeds u32")))
                };
                Ok([c(t.t)?, c(t.u)?, c(t.linkage_iteration)?])
            })
            .collect::<Result<Vec<_>>>()?;
        a.traces.insert(
            "tags".into(),
            Trace::u32(
                ["t", "u", "linkage_iteration"].map(String::from).to_vec(),
                tags.len(),
                tags.into_iter().flatten().collect(),
            ),
        );
        Ok(a)
    }

    pub fn pooled_posterior(&self) -> Result<PooledPosterior> {
        self.expect_kind(&["la"])?;
        let meta: PooledMeta = self.document("pooled")?;
        let tags = self
            .trace("tags")?
            .as_u32()?
            .chunks_exact(3)
            .map(|c| PooledDraw {
                t: c[0] as usize,
                u: c[1] as usize,
                linkage_iteration: c[2] as usize,
            })
            .collect();
        Ok(PooledPosterior {
            family: meta.family,
            n_beta: meta.n_beta,
            b_gamma: meta.b_gamma,
            k: meta.k,
            l: meta.l,
            tags,
            draws: self.draws_trace(meta.family, meta.n_beta)?,
            clusters_per_draw: meta.clusters_per_draw,
            skipped: meta.skipped,
            summaries: self.summaries()?,
            acceptance: meta.acceptance,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LinkageMeta {
    iterations: usize,
    burnin: usize,
    thin: usize,
    n_records: [usize; 2],
    n_latent: usize,
    draw_iterations: Vec<usize>,
    diagnostics: LinkageDiagnostics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GrowthMeta {
    family: ErrorFamily,
    n_beta: usize,
    n_clusters: usize,
    b_gamma: f64,
    acceptance: [f64; 3],
    burnin_acceptance: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PooledMeta {
    family: ErrorFamily,
    n_beta: usize,
    b_gamma: f64,
    k: usize,
    l: usize,
    clusters_per_draw: Vec<(usize, usize)>,
    skipped: Vec<SkippedDraw>,
    acceptance: Vec<[f64; 3]>,
}

/// Timing metadata of a linkage run. A missing box means every latent was
/// a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingMeta {
    pub n_records: usize,
    pub box_half_width: Option<f64>,
    pub mean_sweep_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub n_records: usize,
    pub box_half_width: Option<f64>,
    pub runs: usize,
    pub seconds_per_iteration: f64,
    /// Unrestricted time at the same `n` over this row's time; 1 when no
    /// unrestricted run exists at that `n`.
    pub speedup: f64,
}

/// Mean seconds per sweep for each (n, box) configuration, sorted by n
/// then box, with unrestricted runs last.
pub fn timing_report(archives: &[RunArchive]) -> Result<Vec<TimingRow>> {
    let key = |b: Option<f64>| b.unwrap_or(f64::INFINITY);
    let mut groups: Vec<(usize, Option<f64>, Vec<f64>)> = Vec::new();
    for a in archives {
        let t: TimingMeta = a.document("timing")?;
        match groups
            .iter_mut()
            .find(|g| g.0 == t.n_records && g.1 == t.box_half_width)
        {
            Some(g) => g.2.push(t.mean_sweep_seconds),
            None => groups.push((t.n_records, t.box_half_width, vec![t.mean_sweep_seconds])),
        }
    }
    groups.sort_by(|a, b| a.0.cmp(&b.0).then(key(a.1).total_cmp(&key(b.1))));
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(groups
        .iter()
        .map(|(n, b, times)| {
            let own = mean(times);
            let speedup = groups
                .iter()
                .find(|g| g.0 == *n && g.1.is_none())
                .map_or(1.0, |g| mean(&g.2) / own);
            TimingRow {
                n_records: *n,
                box_half_width: *b,
                runs: times.len(),
                seconds_per_iteration: own,
                speedup,
            }
        })
        .collect())
}

pub fn timing_csv(rows: &[TimingRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n_records", "box_half_width", "runs", "seconds_per_iteration", "speedup"])?;
    for r in rows {
        w.write_record([
            r.n_records.to_string(),
            r.box_half_width.map_or("unrestricted".into(), |b| b.to_string()),
            r.runs.to_string(),
            r.seconds_per_iteration.to_string(),
            r.speedup.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf8"))
}
