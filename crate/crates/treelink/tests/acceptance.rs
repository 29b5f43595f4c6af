//! End-to-end acceptance checks. Prints one PASS or FAIL line per
//! criterion. Pass criterion numbers as arguments to run a subset; set
//! `ACCEPTANCE_STRICT=1` to exit nonzero when any criterion fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use treelink::eval::{coverage_tables, run_replicate, ReplicateDesign, ReplicateResult, SuiteCell};
use treelink::growth::{fit_growth, mm_mean, skewt_logpdf, GrowthMcmcConfig, GrowthParams, GrowthPriors, HansenConstants};
use treelink::linkage::{
    posterior_similarity, run_gibbs, update_s, update_sigma2, update_translation, CandidateMode, LinkageData,
    LinkagePriors, LinkageState, SamplerConfig, UpdateCounters,
};
use treelink::pipeline::{clusters_for_draw, run_la, CovariateSet, LAConfig};
use treelink::rng::{derive_seed, rng_from_seed};
use treelink::sim::{generate_dataset, SimConfig};
use treelink::spatial::{Domain, Point2};
use treelink::stats::{ks_two_sample, linear_fit, mean, pearson, quantile, variance};

type Outcome = (bool, String);

// ---------------------------------------------------------------- 1

fn exact_conditional_equivalence() -> Outcome {
    let sim = SimConfig {
        domain_side: 40.0,
        window_side: 18.5,
        seed: 4,
        ..SimConfig::default()
    };
    let d = generate_dataset(&sim).unwrap();
    let n = d.first.len() + d.second.len();
    let base = SamplerConfig {
        iterations: 30_000,
        burnin: 2_000,
        thin: 10,
        box_half_width: 1e3,
        seed: 11,
        ..SamplerConfig::default()
    };
    let priors = LinkagePriors::default();
    let boxed = run_gibbs(&d.first, &d.second, d.domain, &priors, &base).unwrap();
    let full = run_gibbs(
        &d.first,
        &d.second,
        d.domain,
        &priors,
        &SamplerConfig {
            candidate_mode: CandidateMode::Exhaustive,
            seed: 12,
            ..base
        },
    )
    .unwrap();
    let r = pearson(
        &posterior_similarity(&boxed, n).upper_triangle(),
        &posterior_similarity(&full, n).upper_triangle(),
    );
    (r > 0.99, format!("{n} records, similarity correlation {r:.5} (need > 0.99)"))
}

// ---------------------------------------------------------------- 2

const DRAWS: usize = 100_000;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn conjugate_moments() -> Outcome {
    let dom = Domain::square(0.0, 100.0);
    let mut rng = rng_from_seed(2);
    // 40 latents seen by both surveys, second survey shifted
    let s: Vec<Point2> = (0..40)
        .map(|_| Point2::new(rng.random_range(10.0..90.0), rng.random_range(10.0..90.0)))
        .collect();
    let noise = 0.3;
    let shift = Point2::new(0.8, -0.4);
    let mut locs = Vec::new();
    for off in [Point2::ORIGIN, shift] {
        for p in &s {
            let zx: f64 = StandardNormal.sample(&mut rng);
            let zy: f64 = StandardNormal.sample(&mut rng);
            locs.push(Point2::new(p.x + off.x + noise * zx, p.y + off.y + noise * zy));
        }
    }
    let data = LinkageData::from_locations(locs, [40, 40], dom, 5.0);
    let lambda: Vec<u32> = (0..40u32).chain(0..40).collect();
    let base = LinkageState {
        lambda,
        s: s.clone(),
        sigma2: noise * noise,
        theta: [0.0; 2],
        t: [Point2::ORIGIN, shift],
    };
    let priors = LinkagePriors {
        b_sigma: 1e6,
        ..LinkagePriors::default()
    };
    let mut worst: f64 = 0.0;
    let mut track = |what: &str, got: f64, want: f64, notes: &mut Vec<String>| {
        let e = rel(got, want);
        worst = worst.max(e);
        if e >= 0.01 {
            notes.push(format!("{what} off by {:.2}%", 100.0 * e));
        }
    };
    let mut notes = Vec::new();

    // latent 0: members y_0 and y_40 - t
    {
        let mut rng = rng_from_seed(derive_seed(2, 1));
        let mut st = base.clone();
        let mut c = UpdateCounters::default();
        let (mut xs, mut ys) = (Vec::with_capacity(DRAWS), Vec::with_capacity(DRAWS));
        for _ in 0..DRAWS {
            update_s(&mut st, &data, &mut rng, &mut c);
            xs.push(st.s[0].x);
            ys.push(st.s[0].y);
        }
        let center = (data.locations[0] + (data.locations[40] - shift)) * 0.5;
        let v = base.sigma2 / 2.0;
        track("s mean x", mean(&xs), center.x, &mut notes);
        track("s mean y", mean(&ys), center.y, &mut notes);
        track("s var x", variance(&xs), v, &mut notes);
        track("s var y", variance(&ys), v, &mut notes);
    }
    {
        let mut rng = rng_from_seed(derive_seed(2, 2));
        let mut st = base.clone();
        let mut draws = Vec::with_capacity(DRAWS);
        let mut ssr = 0.0;
        for _ in 0..DRAWS {
            ssr = update_sigma2(&mut st, &data, &priors, &mut rng);
            draws.push(st.sigma2);
        }
        let shape = priors.c_sigma + 80.0;
        let scale = priors.d_sigma + ssr / 2.0;
        let m = scale / (shape - 1.0);
        track("sigma2 mean", mean(&draws), m, &mut notes);
        track("sigma2 var", variance(&draws), m * m / (shape - 2.0), &mut notes);
    }
    {
        let mut rng = rng_from_seed(derive_seed(2, 3));
        let mut st = base.clone();
        let (mut xs, mut ys) = (Vec::with_capacity(DRAWS), Vec::with_capacity(DRAWS));
        for _ in 0..DRAWS {
            update_translation(&mut st, &data, &priors, &mut rng);
            xs.push(st.t[1].x);
            ys.push(st.t[1].y);
        }
        let precision = 40.0 / st.sigma2 + 1.0 / priors.sigma_t2;
        let mut acc = Point2::ORIGIN;
        for g in 40..80 {
            acc = acc + (data.locations[g] - st.s[st.lambda[g] as usize]);
        }
        let m = acc * (1.0 / (st.sigma2 * precision));
        track("t mean x", mean(&xs), m.x, &mut notes);
        track("t mean y", mean(&ys), m.y, &mut notes);
        track("t var x", variance(&xs), 1.0 / precision, &mut notes);
        track("t var y", variance(&ys), 1.0 / precision, &mut notes);
    }
    let detail = format!("worst relative error {:.3}% over 12 moments (need < 1%) {}", 100.0 * worst, notes.join("; "));
    (notes.is_empty(), detail)
}

// ---------------------------------------------------------------- 3

/// Integral over the real line via x = m + tan(t) and composite Simpson on
/// each side of `m`.
fn integrate(f: impl Fn(f64) -> f64, m: f64) -> f64 {
    let n = 200_000;
    let half = std::f64::consts::FRAC_PI_2;
    let side = |sign: f64| {
        let h = half / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let t = i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let val = if i == n {
                0.0
            } else {
                let c = t.cos();
                f(m + sign * t.tan()) / (c * c)
            };
            s += w * val;
        }
        s * h / 3.0
    };
    side(1.0) + side(-1.0)
}

fn skewt_contract() -> Outcome {
    let (mu, tau): (f64, f64) = (1.3, 0.7);
    let (mut mass_err, mut mean_err, mut var_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for delta in [-0.5, 0.0, 0.5] {
        for omega in [3.0, 8.0, 200.0] {
            let pdf = |g: f64| skewt_logpdf(g, mu, tau, delta, omega).unwrap().exp();
            let h = HansenConstants::new(delta, omega).unwrap();
            let kink = mu - h.a / h.b * tau.sqrt();
            mass_err = mass_err.max((integrate(pdf, kink) - 1.0).abs());
            mean_err = mean_err.max((integrate(|g| g * pdf(g), kink) - mu).abs() / mu);
            var_err = var_err.max((integrate(|g| (g - mu).powi(2) * pdf(g), kink) - tau).abs() / tau);
        }
    }
    let mut normal_gap: f64 = 0.0;
    for i in 0..=800 {
        let g = mu + (i as f64 / 100.0 - 4.0) * tau.sqrt();
        let normal = -0.5 * (2.0 * std::f64::consts::PI * tau).ln() - (g - mu).powi(2) / (2.0 * tau);
        normal_gap = normal_gap.max((skewt_logpdf(g, mu, tau, 0.0, 200.0).unwrap() - normal).abs());
    }
    let ok = mass_err < 1e-6 && mean_err < 1e-3 && var_err < 1e-3 && normal_gap < 1e-3;
    let detail = format!(
        "mass err {mass_err:.1e} (< 1e-6), mean rel err {mean_err:.1e}, variance rel err {var_err:.1e} (< 1e-3); \
         omega 200 vs normal log-density max gap {normal_gap:.4} over 4 sd (need < 1e-3; the t tail term alone is about z^4/(4 omega) = 0.02 at z = 4 and 0.2 in log density there)"
    );
    (ok, detail)
}

// ---------------------------------------------------------------- 4

fn michaelis_menten() -> Outcome {
    let mut exact = true;
    let mut rng = rng_from_seed(4);
    for _ in 0..1000 {
        let p = GrowthParams {
            alpha: rng.random_range(0.3..4.0),
            gamma: rng.random_range(0.5..200.0),
            beta: (0..5).map(|_| rng.random_range(-3.0..3.0)).collect(),
            tau: 1.0,
            delta: 0.0,
            omega: 0.0,
        };
        let x: Vec<f64> = std::iter::once(1.0).chain((0..4).map(|_| rng.random_range(-2.0..2.0))).collect();
        let xb: f64 = x.iter().zip(&p.beta).map(|(a, b)| a * b).sum();
        exact &= mm_mean(&p, &x, p.gamma) == xb / 2.0;
    }
    let second = |alpha: f64, v: f64| {
        let p = GrowthParams {
            alpha,
            gamma: 12.0,
            beta: vec![3.0],
            tau: 1.0,
            delta: 0.0,
            omega: 0.0,
        };
        let h = v * 1e-3;
        (mm_mean(&p, &[1.0], v + h) - 2.0 * mm_mean(&p, &[1.0], v) + mm_mean(&p, &[1.0], v - h)) / (h * h)
    };
    // near zero the curve is convex for alpha > 1 and concave for alpha < 1
    let v = 0.5;
    let flips = [1.2, 1.5, 2.0, 3.0].iter().all(|&a| second(a, v) > 0.0)
        && [0.5, 0.8, 0.95].iter().all(|&a| second(a, v) < 0.0)
        && second(1.0, v) < 0.0;
    (exact && flips, format!("mu(gamma) == x.beta/2 on 1000 draws: {exact}; curvature sign flips at alpha = 1: {flips}"))
}

// ---------------------------------------------------------------- 5, 6

fn study_design() -> ReplicateDesign {
    ReplicateDesign {
        sampler: SamplerConfig {
            iterations: 2000,
            burnin: 1000,
            thin: 10,
            ..SamplerConfig::default()
        },
        la: LAConfig {
            k: 40,
            l: 25,
            r1: 0.5,
            r2: 3.0,
            ..LAConfig::default()
        },
        ..ReplicateDesign::default()
    }
}

fn replicates() -> Vec<ReplicateResult> {
    let design = study_design();
    (0..20u64)
        .into_par_iter()
        .map(|r| {
            let sim = SimConfig {
                density: 0.06,
                sigma_obs: 0.25,
                seed: derive_seed(2024, r),
                ..SimConfig::default()
            };
            run_replicate(&sim, &design).expect("replicate runs")
        })
        .collect()
}

fn coverage(reps: &[ReplicateResult]) -> Outcome {
    let cells = [SuiteCell {
        label: "medium".into(),
        replicates: reps,
    }];
    let tables = coverage_tables(&cells);
    let get = |method: &str, name: &str| {
        tables
            .iter()
            .find(|(_, m, _)| *m == method)
            .and_then(|(_, _, c)| c.get(name))
            .map_or(f64::NAN, |r| r.coverage)
    };
    let betas: Vec<f64> = (1..=4).map(|k| get("la", &format!("beta{k}"))).collect();
    let band = betas.iter().all(|c| (0.70..=1.00).contains(c));
    let (la0, ndm0) = (get("la", "beta0"), get("ndm", "beta0"));
    let others: Vec<String> = ["alpha", "gamma", "tau"]
        .iter()
        .map(|n| format!("{n} {:.2}/{:.2}", get("la", n), get("ndm", n)))
        .collect();
    let skipped: usize = reps.iter().map(|r| r.pooled.skipped.len()).sum();
    (
        band && la0 > ndm0,
        format!(
            "LA beta1..4 coverage {:.2} {:.2} {:.2} {:.2} (need each in [0.70, 1.00]); beta0 LA {la0:.2} vs NDM {ndm0:.2} (need LA > NDM); \
             LA/NDM {}; skipped LA draws {skipped}",
            betas[0],
            betas[1],
            betas[2],
            betas[3],
            others.join(", ")
        ),
    )
}

fn precision_recall(reps: &[ReplicateResult]) -> Outcome {
    let avg = |f: &dyn Fn(&ReplicateResult) -> f64| mean(&reps.iter().map(f).collect::<Vec<_>>());
    let la_p = avg(&|r| r.la_links.precision.mean);
    let la_r = avg(&|r| r.la_links.recall.mean);
    let ndm_p = avg(&|r| r.ndm_links.precision);
    let ndm_r = avg(&|r| r.ndm_links.recall);
    (
        la_p >= ndm_p && ndm_r >= la_r,
        format!("precision LA {la_p:.4} vs NDM {ndm_p:.4}; recall LA {la_r:.4} vs NDM {ndm_r:.4}"),
    )
}

// ---------------------------------------------------------------- 7

fn seconds_per_iteration(sim: &SimConfig, config: &SamplerConfig) -> (usize, f64) {
    let d = generate_dataset(sim).unwrap();
    let post = run_gibbs(&d.first, &d.second, d.domain, &LinkagePriors::default(), config).unwrap();
    let times = post.sweep_seconds.clone().unwrap();
    // skip the first sweeps, which carry allocation and cache warm-up
    (post.n_total(), quantile(&times[5..], 0.5))
}

fn timing_scaling() -> Outcome {
    let sampler = SamplerConfig {
        iterations: 45,
        burnin: 20,
        thin: 1,
        record_timing: true,
        ..SamplerConfig::default()
    };
    let density = SimConfig::default().density;
    let (mut ns, mut boxed, mut full) = (Vec::new(), Vec::new(), Vec::new());
    for n in [200usize, 400, 800] {
        let side = (n as f64 / (2.0 * density)).sqrt();
        let sim = SimConfig {
            window_side: side,
            domain_side: side + 30.0,
            seed: 70 + n as u64,
            ..SimConfig::default()
        };
        let (total, tb) = seconds_per_iteration(&sim, &sampler);
        let (_, tf) = seconds_per_iteration(
            &sim,
            &SamplerConfig {
                candidate_mode: CandidateMode::Exhaustive,
                iterations: 25,
                burnin: 10,
                ..sampler.clone()
            },
        );
        ns.push(total as f64);
        boxed.push(tb);
        full.push(tf);
    }
    let (_, slope, r2) = linear_fit(&ns, &boxed);
    let speedup = full[2] / boxed[2];
    // at most linear: doubling n at most a bit more than doubles the time
    let ratio = boxed[2] / boxed[0] / (ns[2] / ns[0]);
    (
        r2 > 0.95 && speedup > 10.0 && slope > 0.0,
        format!(
            "n {:?}: box {:.2e} {:.2e} {:.2e} s/iter, R^2 {r2:.4} (need > 0.95), growth vs linear {ratio:.2}; unrestricted {:.2e} s/iter at n {}, speedup {speedup:.1} (need > 10)",
            ns.iter().map(|n| *n as usize).collect::<Vec<_>>(),
            boxed[0],
            boxed[1],
            boxed[2],
            full[2],
            ns[2]
        ),
    )
}

// ---------------------------------------------------------------- 8

const CLI_CONFIG: &str = r#"{
  "schema_version": 1,
  "sim": { "domain_side": 70.0, "window_side": 50.0, "seed": 8 },
  "linkage": { "sampler": { "iterations": 200, "burnin": 100, "thin": 5, "seed": 8 } },
  "growth": {
    "la": { "k": 4, "l": 20, "r1": 0.5, "r2": 3.0, "boundary_buffer": 5.0,
            "growth": { "burnin": 500 }, "seed": 8 }
  },
  "inputs": { "dataset": "data", "linkage_archive": "link", "archives": ["link", "la", "ndm", "growth"] },
  "suite": { "replicates": 2 }
}"#;

fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn cli_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_treelink");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, CLI_CONFIG).unwrap();
    let run = |cmd: &str, out: &str, extra: &[&str]| -> bool {
        Command::new(bin)
            .args([cmd, "--config", cfg.to_str().unwrap(), "--out", dir.path().join(out).to_str().unwrap()])
            .args(extra)
            .output()
            .map(|o| o.status.success())
            .unwrap_or(false)
    };
    let mut failed = Vec::new();
    let steps: [(&str, &str, &[&str]); 7] = [
        ("simulate", "data", &[]),
        ("link", "link", &[]),
        ("la", "la", &[]),
        ("ndm", "ndm", &[]),
        ("growth", "growth", &[]),
        ("evaluate", "eval", &[]),
        ("suite", "suite", &["--threads", "2"]),
    ];
    for (cmd, out, extra) in steps {
        let again = format!("{out}_again");
        if !run(cmd, out, extra) || !run(cmd, &again, extra) {
            failed.push(format!("{cmd} did not run"));
            continue;
        }
        let (a, b) = (tree(&dir.path().join(out)), tree(&dir.path().join(&again)));
        if a.is_empty() || a != b {
            failed.push(format!("{cmd} differs"));
        }
    }
    // timing replays stored archives; the study itself measures wall time
    let study_cfg = dir.path().join("study.json");
    std::fs::write(&study_cfg, r#"{"schema_version": 1, "timing": {"sizes": [60, 120], "iterations": 4}}"#).unwrap();
    let study = Command::new(bin)
        .args(["timing", "--config", study_cfg.to_str().unwrap(), "--out", dir.path().join("study").to_str().unwrap()])
        .output()
        .is_ok_and(|o| o.status.success());
    if !study {
        failed.push("timing study did not run".into());
    } else {
        let replay = dir.path().join("replay.json");
        std::fs::write(
            &replay,
            r#"{"schema_version": 1, "inputs": {"archives": ["study/n60_box3", "study/n60_unrestricted", "study/n120_box3", "study/n120_unrestricted"]}}"#,
        )
        .unwrap();
        let go = |out: &str| {
            Command::new(bin)
                .args(["timing", "--config", replay.to_str().unwrap(), "--out", dir.path().join(out).to_str().unwrap()])
                .output()
                .map(|o| o.status.success())
                .unwrap_or(false)
        };
        if !(go("t1") && go("t2")) || tree(&dir.path().join("t1")) != tree(&dir.path().join("t2")) {
            failed.push("timing replay differs".into());
        }
    }
    let detail = if failed.is_empty() {
        "simulate, link, la, ndm, growth, evaluate, suite and timing replay rerun byte-identical".to_string()
    } else {
        failed.join("; ")
    };
    (failed.is_empty(), detail)
}

// ---------------------------------------------------------------- 9

fn degenerate_pooling() -> Outcome {
    let d = common::small_dataset(21);
    let draw = common::truth_draw(&d);
    let (k, l, thin) = (10, 200, 40);
    let post = common::constant_posterior(&draw, [d.first.len(), d.second.len()], k);
    let cov = CovariateSet::new(d.covariates.clone());
    let la = common::quick_la(k, l, thin);
    let priors = GrowthPriors::gaussian();
    let pooled = run_la(&post, &d.first, &d.second, &d.domain, &cov, &priors, &la).unwrap();
    let clusters = clusters_for_draw(&draw, &d.first, &d.second, &d.domain, &cov, &la).unwrap();
    let single = fit_growth(
        &clusters,
        &priors.with_b_gamma(pooled.b_gamma),
        &GrowthMcmcConfig {
            draws: k * l,
            seed: 777,
            ..la.growth.clone()
        },
    )
    .unwrap();
    let mut worst = (String::new(), 1.0);
    for (j, name) in pooled.names().iter().enumerate() {
        let p = ks_two_sample(&pooled.column(j), &single.column(j)).p_value;
        if p < worst.1 {
            worst = (name.clone(), p);
        }
    }
    (
        worst.1 > 0.01,
        format!("{} clusters, {} pooled vs {} single draws; smallest KS p {:.3} ({}) (need > 0.01)", clusters.len(), pooled.draws.len(), single.draws.len(), worst.1, worst.0),
    )
}

// ----------------------------------------------------------------

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let on = |k: usize| wanted.is_empty() || wanted.contains(&k);
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut check = |k: usize, name: &'static str, f: &dyn Fn() -> Outcome| {
        if on(k) {
            let t0 = Instant::now();
            let o = f();
            let secs = t0.elapsed().as_secs_f64();
            println!("{} {k} {name}: {} [{secs:.1} s]", if o.0 { "PASS" } else { "FAIL" }, o.1);
            results.push((k, name, o, secs));
        }
    };
    check(1, "exact-conditional equivalence", &exact_conditional_equivalence);
    check(2, "conjugate update moments", &conjugate_moments);
    check(3, "skew-t contract", &skewt_contract);
    check(4, "Michaelis-Menten identities", &michaelis_menten);
    if on(5) || on(6) {
        let t0 = Instant::now();
        let reps = replicates();
        let secs = t0.elapsed().as_secs_f64();
        check(5, "simulation coverage", &|| coverage(&reps));
        check(6, "precision/recall ordering", &|| precision_recall(&reps));
        println!("     (20 replicates took {secs:.0} s)");
    }
    check(7, "timing scaling", &timing_scaling);
    check(8, "CLI determinism", &cli_determinism);
    check(9, "degenerate pooling", &degenerate_pooling);
    let failed = results.iter().filter(|r| !(r.2).0).count();
    println!("{} of {} criteria pass", results.len() - failed, results.len());
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
