//! Command line front end. `run` parses arguments, executes one subcommand
//! and returns the process exit status.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{FixedLinkage, RunConfig};
use crate::error::{Error, Result};
use crate::eval::{
    coverage_csv, coverage_tables, dense_labels, eval_coverage, eval_links, eval_posterior_links,
    gaussian_truth, ingest_records, pairs_from_ndm, pairs_from_partition, read_dataset, read_truth,
    replicate_csv, run_replicate, timing_csv, timing_report, truth_labels, write_dataset,
    LinkEvalResult, ReplicateDesign, RunArchive, Spread, SuiteCell,
};
use crate::growth::{GrowthParams, GrowthPriors, Raster};
use crate::linkage::{run_gibbs, CandidateMode, SamplerConfig};
use crate::pipeline::{fit_fixed_linkage, fixed_linkage_draw, run_la, run_ndm, CovariateSet, LAConfig, ParamSummary};
use crate::records::RecordFile;
use crate::rng::derive_seed;
use crate::sim::{generate_dataset, SimConfig, TruthLink};
use crate::spatial::Domain;

#[derive(Debug, Parser)]
#[command(name = "treelink", version, about = "Spatial record linkage and growth-curve inference for repeated surveys")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config with a `schema_version` field. Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Simulate two surveys with known linkage.
    Simulate,
    /// Sample the linkage posterior of two surveys.
    Link,
    /// Fit the growth model on a fixed linkage (truth or nearest distance).
    Growth,
    /// Linkage-averaged growth fit from a `link` archive.
    La,
    /// Nearest-distance matching and its growth fit.
    Ndm,
    /// Link metrics and interval coverage of archives against the truth.
    Evaluate,
    /// Replicated simulation study.
    Suite,
    /// Per-iteration sampler timing by record count and box size.
    Timing,
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
    let out = cli.out.as_path();
    pool.install(|| match cli.command {
        Command::Simulate => simulate(&cfg, out),
        Command::Link => link(&cfg, out),
        Command::Growth => growth(&cfg, out),
        Command::La => la(&cfg, out),
        Command::Ndm => ndm(&cfg, out),
        Command::Evaluate => evaluate(&cfg, out),
        Command::Suite => suite(&cfg, out),
        Command::Timing => timing(&cfg, out),
    })
}

struct Inputs {
    first: RecordFile,
    second: RecordFile,
    domain: Domain,
    rasters: Vec<Raster>,
    truth: Option<Vec<TruthLink>>,
    truth_params: Option<GrowthParams>,
}

fn bounding_box(first: &RecordFile, second: &RecordFile) -> Result<Domain> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in first.locations().chain(second.locations()) {
        lo = [lo[0].min(p.x), lo[1].min(p.y)];
        hi = [hi[0].max(p.x), hi[1].max(p.y)];
    }
    let d = Domain::new(lo[0], lo[1], hi[0], hi[1]);
    if !d.is_valid() || d.area() <= 0.0 {
        return Err(Error::Validation {
            row: None,
            message: "records span no area; set inputs.domain".into(),
        });
    }
    Ok(d)
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let inp = &cfg.inputs;
    let mut loaded = if let Some(dir) = &inp.dataset {
        let d = read_dataset(dir)?;
        Inputs {
            domain: d.meta.domain,
            first: d.first,
            second: d.second,
            rasters: d.covariates,
            truth: Some(d.truth),
            truth_params: Some(d.meta.growth_params),
        }
    } else {
        let path = inp
            .records
            .as_ref()
            .ok_or_else(|| Error::Config("set inputs.dataset or inputs.records".into()))?;
        let (first, second) = ingest_records(path)?;
        Inputs {
            domain: bounding_box(&first, &second)?,
            truth: None,
            truth_params: None,
            rasters: Vec::new(),
            first,
            second,
        }
    };
    if let Some(p) = &inp.truth {
        loaded.truth = Some(read_truth(p)?);
    }
    if !inp.covariates.is_empty() {
        loaded.rasters = inp
            .covariates
            .iter()
            .map(|p| Raster::read(p))
            .collect::<Result<_>>()?;
    }
    if let Some(d) = inp.domain {
        if !d.is_valid() {
            return Err(Error::Config("inputs.domain is empty".into()));
        }
        loaded.domain = d;
    }
    Ok(loaded)
}

fn covariate_set(cfg: &RunConfig, inputs: &Inputs) -> Result<CovariateSet> {
    let set = CovariateSet::new(inputs.rasters.clone());
    match cfg.growth.competition_radius {
        Some(r) => set.with_competition(&inputs.first, r),
        None => Ok(set),
    }
}

fn largest_first_volume(first: &RecordFile) -> f64 {
    first.records.iter().map(|r| r.volume).fold(f64::NAN, f64::max)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)?;
    Ok(())
}

fn simulate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let d = generate_dataset(&cfg.sim)?;
    write_dataset(&d, out)?;
    println!(
        "simulated {} + {} records ({} recruits) in {}",
        d.first.len(),
        d.second.len(),
        d.truth.recruits.len(),
        out.display()
    );
    Ok(())
}

fn link(cfg: &RunConfig, out: &Path) -> Result<()> {
    let inputs = load_inputs(cfg)?;
    let sampler = &cfg.linkage.sampler;
    let post = run_gibbs(&inputs.first, &inputs.second, inputs.domain, &cfg.linkage.priors, sampler)?;
    RunArchive::from_linkage(&post, sampler, cfg.to_value())?.write(out)?;
    println!(
        "linked {} records: {} draws, final sigma2 {:.4}, theta acceptance {:.2}",
        post.n_total(),
        post.draws.len(),
        post.sigma2_trace.last().copied().unwrap_or(f64::NAN),
        post.diagnostics.theta_acceptance
    );
    Ok(())
}

fn print_summaries(summaries: &[ParamSummary]) {
    for s in summaries {
        println!(
            "  {:8} mean {:10.4}  sd {:9.4}  {:.0}% [{:.4}, {:.4}]",
            s.name,
            s.mean,
            s.sd,
            100.0 * s.level,
            s.lo,
            s.hi
        );
    }
}

fn growth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let inputs = load_inputs(cfg)?;
    let covariates = covariate_set(cfg, &inputs)?;
    let la = &cfg.growth.la;
    let priors = cfg
        .growth
        .priors
        .clone()
        .with_b_gamma(cfg.growth.priors.b_gamma_or(largest_first_volume(&inputs.first)));
    let post = match cfg.growth.fixed_linkage {
        FixedLinkage::Truth => {
            let truth = inputs.truth.as_ref().ok_or_else(|| {
                Error::Config("growth on the true linkage needs inputs.truth or inputs.dataset".into())
            })?;
            let labels = dense_labels(&truth_labels(truth, &inputs.first, &inputs.second)?);
            let draw = fixed_linkage_draw(&labels, &inputs.first, &inputs.second)?;
            let (_, post) = fit_fixed_linkage(
                &draw,
                &inputs.first,
                &inputs.second,
                &inputs.domain,
                &covariates,
                &priors,
                la,
                la.k * la.l,
            )?;
            post
        }
        FixedLinkage::Ndm => run_ndm(&inputs.first, &inputs.second, &inputs.domain, &covariates, &priors, la)?
            .posterior
            .expect("run_ndm always fits"),
    };
    let archive = RunArchive::from_growth(&post, la.seed, cfg.growth.level, cfg.to_value())?;
    archive.write(out)?;
    println!("growth fit on {} clusters", post.n_clusters);
    print_summaries(&archive.summaries()?);
    Ok(())
}

fn la(cfg: &RunConfig, out: &Path) -> Result<()> {
    let inputs = load_inputs(cfg)?;
    let path = cfg
        .inputs
        .linkage_archive
        .as_ref()
        .ok_or_else(|| Error::Config("la needs inputs.linkage_archive".into()))?;
    let post = RunArchive::read(path)?.linkage_posterior()?;
    if post.n_records != [inputs.first.len(), inputs.second.len()] {
        return Err(Error::Validation {
            row: None,
            message: format!(
                "linkage archive covers {:?} records but the inputs hold {} and {}",
                post.n_records,
                inputs.first.len(),
                inputs.second.len()
            ),
        });
    }
    let covariates = covariate_set(cfg, &inputs)?;
    let pooled = run_la(
        &post,
        &inputs.first,
        &inputs.second,
        &inputs.domain,
        &covariates,
        &cfg.growth.priors,
        &cfg.growth.la,
    )?;
    RunArchive::from_pooled(&pooled, cfg.growth.la.seed, cfg.to_value())?.write(out)?;
    println!(
        "pooled {} draws from {} linkage draws ({} skipped)",
        pooled.draws.len(),
        pooled.clusters_per_draw.len(),
        pooled.skipped.len()
    );
    print_summaries(&pooled.summaries);
    Ok(())
}

fn ndm(cfg: &RunConfig, out: &Path) -> Result<()> {
    let inputs = load_inputs(cfg)?;
    let covariates = covariate_set(cfg, &inputs)?;
    let result = run_ndm(
        &inputs.first,
        &inputs.second,
        &inputs.domain,
        &covariates,
        &cfg.growth.priors,
        &cfg.growth.la,
    )?;
    let archive = RunArchive::from_ndm(&result, cfg.growth.la.seed, cfg.growth.level, cfg.to_value())?;
    archive.write(out)?;
    println!("{} nearest-distance pairs, {} growth clusters", result.pairs.len(), result.clusters.len());
    print_summaries(&archive.summaries()?);
    Ok(())
}

#[derive(Serialize)]
struct ArchiveLinks {
    archive: String,
    kind: String,
    draws: usize,
    precision: Spread,
    recall: Spread,
}

#[derive(Serialize)]
struct Metrics {
    links: Vec<ArchiveLinks>,
    coverage: Vec<crate::eval::CoverageRow>,
}

fn archive_label(p: &Path) -> String {
    p.file_name()
        .map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn evaluate(cfg: &RunConfig, out: &Path) -> Result<()> {
    if cfg.inputs.archives.is_empty() {
        return Err(Error::Config("evaluate needs inputs.archives".into()));
    }
    let inputs = load_inputs(cfg)?;
    let truth_pairs = match &inputs.truth {
        Some(t) => Some(pairs_from_partition(&truth_labels(t, &inputs.first, &inputs.second)?)),
        None => None,
    };
    let truth_params = inputs.truth_params.as_ref().map(gaussian_truth);
    let n = [inputs.first.len(), inputs.second.len()];

    let mut links = csv::Writer::from_writer(Vec::new());
    links.write_record(["archive", "kind", "draw", "tp", "fp", "fn", "precision", "recall"])?;
    let mut intervals = csv::Writer::from_writer(Vec::new());
    intervals.write_record(["archive", "kind", "parameter", "truth", "mean", "lo", "hi", "covered"])?;
    let mut metrics = Metrics {
        links: Vec::new(),
        coverage: Vec::new(),
    };
    let mut by_kind: Vec<(String, Vec<Vec<ParamSummary>>)> = Vec::new();

    for path in &cfg.inputs.archives {
        let archive = RunArchive::read(path)?;
        let label = archive_label(path);
        let per_draw: Option<Vec<LinkEvalResult>> = match (archive.kind.as_str(), &truth_pairs) {
            ("link", Some(tp)) => {
                let post = archive.linkage_posterior()?;
                if post.n_records != n {
                    return Err(Error::Validation {
                        row: None,
                        message: format!("archive {label} does not match the input records"),
                    });
                }
                Some(eval_posterior_links(&post.draws, tp).per_draw)
            }
            ("ndm", Some(tp)) => Some(vec![eval_links(&pairs_from_ndm(&archive.ndm_pairs()?, n[0], n[1]), tp)]),
            _ => None,
        };
        if let Some(rows) = per_draw {
            for (i, r) in rows.iter().enumerate() {
                links.write_record([
                    label.clone(),
                    archive.kind.clone(),
                    i.to_string(),
                    r.tp.to_string(),
                    r.fp.to_string(),
                    r.fn_.to_string(),
                    r.precision.to_string(),
                    r.recall.to_string(),
                ])?;
            }
            let p: Vec<f64> = rows.iter().map(|r| r.precision).collect();
            let r: Vec<f64> = rows.iter().map(|r| r.recall).collect();
            metrics.links.push(ArchiveLinks {
                archive: label.clone(),
                kind: archive.kind.clone(),
                draws: rows.len(),
                precision: Spread::of(&p),
                recall: Spread::of(&r),
            });
        }
        if let (true, Some(truth)) = (archive.documents.contains_key("summary"), &truth_params) {
            let summaries = archive.summaries()?;
            for (name, value) in truth {
                if let Some(s) = summaries.iter().find(|s| &s.name == name) {
                    intervals.write_record([
                        label.clone(),
                        archive.kind.clone(),
                        name.clone(),
                        value.to_string(),
                        s.mean.to_string(),
                        s.lo.to_string(),
                        s.hi.to_string(),
                        u8::from(s.lo <= *value && *value <= s.hi).to_string(),
                    ])?;
                }
            }
            match by_kind.iter_mut().find(|(k, _)| *k == archive.kind) {
                Some((_, v)) => v.push(summaries),
                None => by_kind.push((archive.kind.clone(), vec![summaries])),
            }
        }
    }

    std::fs::create_dir_all(out)?;
    let mut coverage = csv::Writer::from_writer(Vec::new());
    coverage.write_record(["method", "parameter", "truth", "intervals", "hits", "coverage"])?;
    if let Some(truth) = &truth_params {
        for (kind, reps) in &by_kind {
            let cov = eval_coverage(reps, truth);
            for row in &cov.rows {
                coverage.write_record([
                    kind.clone(),
                    row.name.clone(),
                    row.truth.to_string(),
                    row.intervals.to_string(),
                    row.hits.to_string(),
                    row.coverage.to_string(),
                ])?;
            }
            metrics.coverage.extend(cov.rows.into_iter().filter(|r| r.intervals > 0));
        }
    }
    let finish = |w: csv::Writer<Vec<u8>>| w.into_inner().map_err(|e| Error::Io(e.into_error()));
    std::fs::write(out.join("links.csv"), finish(links)?)?;
    std::fs::write(out.join("intervals.csv"), finish(intervals)?)?;
    std::fs::write(out.join("coverage.csv"), finish(coverage)?)?;
    write_json(&out.join("metrics.json"), &metrics)?;
    for l in &metrics.links {
        println!(
            "{:20} {:5} precision {:.3} recall {:.3} ({} draws)",
            l.archive, l.kind, l.precision.mean, l.recall.mean, l.draws
        );
    }
    for row in &metrics.coverage {
        println!("  {:8} truth {:8.3} hits {}/{}", row.name, row.truth, row.hits, row.intervals);
    }
    Ok(())
}

fn suite(cfg: &RunConfig, out: &Path) -> Result<()> {
    let s = &cfg.suite;
    if s.replicates == 0 || s.densities.is_empty() || s.noises.is_empty() {
        return Err(Error::Config("suite needs replicates, densities and noises".into()));
    }
    let cells: Vec<(String, SimConfig)> = s
        .densities
        .iter()
        .flat_map(|&density| {
            s.noises.iter().map(move |&sigma_obs| {
                (
                    format!("density{density}_noise{sigma_obs}"),
                    SimConfig {
                        density,
                        sigma_obs,
                        ..cfg.sim.clone()
                    },
                )
            })
        })
        .collect();
    let design = ReplicateDesign {
        linkage_priors: cfg.linkage.priors.clone(),
        sampler: cfg.linkage.sampler.clone(),
        growth_priors: GrowthPriors {
            error_family: crate::growth::ErrorFamily::Gaussian,
            ..cfg.growth.priors.clone()
        },
        la: LAConfig {
            r1: s.r1,
            r2: s.r2,
            ..cfg.growth.la.clone()
        },
        level: cfg.growth.level,
        truth_fit: s.truth_fit,
    };
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..s.replicates).map(move |r| (c, r)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(c, r)| {
            let sim = SimConfig {
                seed: derive_seed(cfg.sim.seed, ((c as u64) << 32) | r as u64),
                ..cells[c].1.clone()
            };
            let rep = run_replicate(&sim, &design)?;
            let dir = out.join(&cells[c].0).join(format!("rep{r:03}"));
            rep.to_archive(cfg.to_value())?.write(&dir)?;
            Ok(rep)
        })
        .collect::<Result<Vec<_>>>()?;

    let grouped: Vec<SuiteCell<'_>> = cells
        .iter()
        .enumerate()
        .map(|(c, (label, _))| SuiteCell {
            label: label.clone(),
            replicates: &results[c * s.replicates..(c + 1) * s.replicates],
        })
        .collect();
    std::fs::write(out.join("replicates.csv"), replicate_csv(&grouped)?)?;
    let tables = coverage_tables(&grouped);
    std::fs::write(out.join("coverage.csv"), coverage_csv(&tables)?)?;
    for cell in &grouped {
        let mean = |f: &dyn Fn(&crate::eval::ReplicateResult) -> f64| {
            cell.replicates.iter().map(f).sum::<f64>() / cell.replicates.len() as f64
        };
        println!(
            "{}: LA precision {:.3} recall {:.3} | NDM precision {:.3} recall {:.3}",
            cell.label,
            mean(&|r| r.la_links.precision.mean),
            mean(&|r| r.la_links.recall.mean),
            mean(&|r| r.ndm_links.precision),
            mean(&|r| r.ndm_links.recall),
        );
    }
    for (cell, method, cov) in &tables {
        let line: Vec<String> = cov
            .rows
            .iter()
            .map(|r| format!("{} {:.2}", r.name, r.coverage))
            .collect();
        println!("  {cell} {method:5} {}", line.join("  "));
    }
    Ok(())
}

fn timing(cfg: &RunConfig, out: &Path) -> Result<()> {
    let archives = if cfg.inputs.archives.is_empty() {
        timing_study(cfg, out)?
    } else {
        cfg.inputs
            .archives
            .iter()
            .map(|p| RunArchive::read(p))
            .collect::<Result<Vec<_>>>()?
    };
    let rows = timing_report(&archives)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("timing.csv"), timing_csv(&rows)?)?;
    for r in &rows {
        let b = r.box_half_width.map_or("unrestricted".into(), |b| format!("{b} m"));
        println!(
            "n {:5}  box {:>12}  {:.3e} s/iter  speedup {:.1}",
            r.n_records, b, r.seconds_per_iteration, r.speedup
        );
    }
    Ok(())
}

/// Simulates one dataset per size and times the sampler on it for every
/// box and, optionally, with no box at all.
fn timing_study(cfg: &RunConfig, out: &Path) -> Result<Vec<RunArchive>> {
    let t = &cfg.timing;
    if t.sizes.is_empty() || t.iterations < 2 {
        return Err(Error::Config("timing needs sizes and at least 2 iterations".into()));
    }
    let mut archives = Vec::new();
    for &n in &t.sizes {
        let side = (n as f64 / (2.0 * cfg.sim.density)).sqrt();
        let sim = SimConfig {
            window_side: side,
            domain_side: side + 30.0,
            ..cfg.sim.clone()
        };
        let d = generate_dataset(&sim)?;
        let mut modes: Vec<(String, SamplerConfig)> = t
            .boxes
            .iter()
            .map(|&b| {
                (
                    format!("n{n}_box{b}"),
                    SamplerConfig {
                        box_half_width: b,
                        candidate_mode: CandidateMode::BoundingBox,
                        ..cfg.linkage.sampler.clone()
                    },
                )
            })
            .collect();
        if t.unrestricted {
            modes.push((
                format!("n{n}_unrestricted"),
                SamplerConfig {
                    candidate_mode: CandidateMode::Exhaustive,
                    ..cfg.linkage.sampler.clone()
                },
            ));
        }
        for (name, sampler) in modes {
            let sampler = SamplerConfig {
                iterations: t.iterations,
                burnin: t.iterations / 2,
                thin: 1,
                record_timing: true,
                ..sampler
            };
            let post = run_gibbs(&d.first, &d.second, d.domain, &cfg.linkage.priors, &sampler)?;
            let archive = RunArchive::from_linkage(&post, &sampler, cfg.to_value())?;
            archive.write(&out.join(name))?;
            archives.push(archive);
        }
    }
    Ok(archives)
}
