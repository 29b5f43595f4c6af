mod common;

use std::path::Path;

use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use treelink::eval::{
    eval_coverage, eval_links, eval_posterior_links, gaussian_truth, pairs_from_partition, parse_records,
    read_dataset, read_truth, records_to_csv, write_dataset, write_truth, PairSet, RunArchive,
};
use treelink::growth::{fit_growth, GrowthMcmcConfig, GrowthPriors};
use treelink::linkage::{run_gibbs, LinkageDraw, LinkagePriors, SamplerConfig};
use treelink::pipeline::{clusters_for_draw, run_la, run_ndm, CovariateSet, ParamSummary};
use treelink::records::{Record, RecordFile};
use treelink::rng::rng_from_seed;
use treelink::sim::{SimConfig, TruthLink};
use treelink::spatial::Point2;

use common::{quick_la, small_dataset, truth_draw};

fn brute_pairs(labels: &[u32]) -> PairSet {
    let mut s = PairSet::new();
    for a in 0..labels.len() {
        for b in a + 1..labels.len() {
            if labels[a] == labels[b] {
                s.insert((a as u32, b as u32));
            }
        }
    }
    s
}

proptest! {
    #[test]
    fn partition_pairs_match_quadratic_scan(labels in prop::collection::vec(0u32..15, 0..60)) {
        prop_assert_eq!(pairs_from_partition(&labels), brute_pairs(&labels));
    }

    #[test]
    fn link_counts_add_up(
        truth in prop::collection::vec(0u32..10, 2..40),
        shuffle in prop::collection::vec(0u32..10, 40),
    ) {
        let pred: Vec<u32> = truth.iter().zip(&shuffle).map(|(_, s)| *s).collect();
        let (p, t) = (pairs_from_partition(&pred), pairs_from_partition(&truth));
        let r = eval_links(&p, &t);
        prop_assert_eq!(r.tp + r.fp, p.len());
        prop_assert_eq!(r.tp + r.fn_, t.len());
        prop_assert!((0.0..=1.0).contains(&r.precision) && (0.0..=1.0).contains(&r.recall));
    }
}

#[test]
fn perfect_prediction() {
    let labels = [0u32, 1, 2, 0, 1, 3];
    let t = pairs_from_partition(&labels);
    let r = eval_links(&t, &t);
    assert_eq!((r.tp, r.fp, r.fn_), (2, 0, 0));
    assert_eq!((r.precision, r.recall), (1.0, 1.0));
}

#[test]
fn per_draw_metrics_of_three_draws() {
    // truth: records 0-3 and 1-4 are the same trees
    let truth = pairs_from_partition(&[0u32, 1, 2, 0, 1]);
    let draw = |lambda: Vec<u32>| LinkageDraw {
        iteration: 0,
        lambda,
        s: vec![Point2::ORIGIN; 5],
    };
    let draws = [
        draw(vec![0, 1, 2, 0, 1]), // exact
        draw(vec![0, 1, 2, 0, 4]), // misses 1-4
        draw(vec![0, 0, 2, 0, 1]), // adds 0-1 and 1-3
    ];
    let e = eval_posterior_links(&draws, &truth);
    let pr: Vec<(f64, f64)> = e.per_draw.iter().map(|r| (r.precision, r.recall)).collect();
    assert_eq!(pr, [(1.0, 1.0), (1.0, 0.5), (1.0 / 3.0, 0.5)]);
    assert!((e.precision.mean - (2.0 + 1.0 / 3.0) / 3.0).abs() < 1e-12);
    assert!((e.recall.mean - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(e.recall.median, 0.5);
}

fn summary(name: &str, lo: f64, hi: f64) -> ParamSummary {
    ParamSummary {
        name: name.into(),
        mean: 0.5 * (lo + hi),
        sd: 1.0,
        level: 0.9,
        lo,
        hi,
    }
}

#[test]
fn wide_intervals_always_cover() {
    let truth = gaussian_truth(&SimConfig::default().growth_params);
    assert_eq!(truth.len(), 8);
    let reps: Vec<Vec<ParamSummary>> = (0..5)
        .map(|_| truth.iter().map(|(n, _)| summary(n, -1e9, 1e9)).collect())
        .collect();
    let cov = eval_coverage(&reps, &truth);
    assert_eq!(cov.rows.len(), 8);
    let names: Vec<&str> = cov.rows.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(names, ["alpha", "gamma", "beta0", "beta1", "beta2", "beta3", "beta4", "tau"]);
    assert!(cov.rows.iter().all(|r| r.coverage == 1.0 && r.intervals == 5));
}

#[test]
fn ninety_of_hundred() {
    let truth = vec![("beta1".to_string(), 0.5)];
    let reps: Vec<Vec<ParamSummary>> = (0..100)
        .map(|i| vec![if i < 90 { summary("beta1", 0.0, 1.0) } else { summary("beta1", 0.6, 1.0) }])
        .collect();
    let row = &eval_coverage(&reps, &truth).rows[0];
    assert_eq!((row.hits, row.intervals), (90, 100));
    assert!((row.coverage - 0.9).abs() < 1e-12);
}

#[test]
fn calibrated_intervals_cover_at_nominal_rate() {
    let truth = gaussian_truth(&SimConfig::default().growth_params);
    let mut rng = rng_from_seed(3);
    let reps: Vec<Vec<ParamSummary>> = (0..200)
        .map(|_| {
            truth
                .iter()
                .map(|(n, v)| {
                    let est = v + rng.sample::<f64, _>(StandardNormal);
                    summary(n, est - 1.6449, est + 1.6449)
                })
                .collect()
        })
        .collect();
    let bound = 3.0 * (0.9f64 * 0.1 / 200.0).sqrt();
    for row in eval_coverage(&reps, &truth).rows {
        assert!((row.coverage - 0.9).abs() < bound, "{}: {}", row.name, row.coverage);
    }
}

fn file_strategy(idx: u8) -> impl Strategy<Value = RecordFile> {
    prop::collection::vec((-1e4f64..1e4, -1e4f64..1e4, 1e-3f64..1e4), 1..30).prop_map(move |rows| {
        RecordFile::new(
            idx,
            2011 + 4 * i32::from(idx),
            rows.into_iter()
                .enumerate()
                .map(|(i, (x, y, v))| Record {
                    id: i as u64 + 1,
                    location: Point2::new(x, y),
                    volume: v,
                })
                .collect(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn records_survive_csv(a in file_strategy(1), b in file_strategy(2)) {
        let text = records_to_csv(&a, &b).unwrap();
        let (a2, b2) = parse_records(&text, Path::new("mem.csv")).unwrap();
        prop_assert_eq!(a2, a);
        prop_assert_eq!(b2, b);
    }

    #[test]
    fn truth_survives_csv(rows in prop::collection::vec((1u8..3, any::<u32>(), any::<u32>()), 0..40)) {
        let links: Vec<TruthLink> = rows
            .iter()
            .map(|&(f, r, l)| TruthLink { file_index: f, record_id: u64::from(r), latent_id: u64::from(l) })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("truth.csv");
        write_truth(&path, &links).unwrap();
        prop_assert_eq!(read_truth(&path).unwrap(), links);
    }
}

#[test]
fn dataset_directory_round_trip() {
    let d = small_dataset(1);
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&d, dir.path()).unwrap();
    let back = read_dataset(dir.path()).unwrap();
    assert_eq!(back.first, d.first);
    assert_eq!(back.second, d.second);
    assert_eq!(back.truth, d.truth.links);
    assert_eq!(back.meta.domain, d.domain);
    assert_eq!(back.covariates.len(), d.covariates.len());
}

/// Writes, reads and writes again; both copies must match byte for byte.
fn assert_stable(a: &RunArchive) -> RunArchive {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    a.write(d1.path()).unwrap();
    let back = RunArchive::read(d1.path()).unwrap();
    assert_eq!(&back, a);
    back.write(d2.path()).unwrap();
    let mut names: Vec<_> = std::fs::read_dir(d1.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for n in names {
        let x = std::fs::read(d1.path().join(&n)).unwrap();
        let y = std::fs::read(d2.path().join(&n)).unwrap();
        assert!(x == y, "{n:?} differs");
    }
    back
}

#[test]
fn archives_round_trip() {
    let d = small_dataset(2);
    let cfg = serde_json::json!({"note": "test", "value": 0.1});
    let sampler = SamplerConfig {
        iterations: 60,
        burnin: 20,
        thin: 4,
        ..SamplerConfig::default()
    };
    let post = run_gibbs(&d.first, &d.second, d.domain, &LinkagePriors::default(), &sampler).unwrap();
    let a = RunArchive::from_linkage(&post, &sampler, cfg.clone()).unwrap();
    assert_eq!(assert_stable(&a).linkage_posterior().unwrap(), post);

    let cov = CovariateSet::new(d.covariates.clone());
    let la = quick_la(3, 20, 1);
    let pooled = run_la(&post, &d.first, &d.second, &d.domain, &cov, &GrowthPriors::gaussian(), &la).unwrap();
    let a = RunArchive::from_pooled(&pooled, la.seed, cfg.clone()).unwrap();
    assert_eq!(assert_stable(&a).pooled_posterior().unwrap(), pooled);

    let ndm = run_ndm(&d.first, &d.second, &d.domain, &cov, &GrowthPriors::default(), &la).unwrap();
    let a = RunArchive::from_ndm(&ndm, la.seed, 0.9, cfg.clone()).unwrap();
    let back = assert_stable(&a);
    assert_eq!(back.ndm_pairs().unwrap(), ndm.pairs);
    assert_eq!(&back.growth_posterior().unwrap(), ndm.posterior.as_ref().unwrap());

    let clusters = clusters_for_draw(&truth_draw(&d), &d.first, &d.second, &d.domain, &cov, &la).unwrap();
    let fit = fit_growth(
        &clusters,
        &GrowthPriors::default().with_b_gamma(100.0),
        &GrowthMcmcConfig {
            burnin: 300,
            draws: 50,
            ..GrowthMcmcConfig::default()
        },
    )
    .unwrap();
    let a = RunArchive::from_growth(&fit, 4, 0.9, cfg).unwrap();
    let back = assert_stable(&a);
    assert_eq!(back.growth_posterior().unwrap(), fit);
    assert_eq!(back.summaries().unwrap().len(), fit.names().len());
}

#[test]
fn wrong_kind_is_refused() {
    let d = small_dataset(3);
    let cov = CovariateSet::new(d.covariates.clone());
    let la = quick_la(1, 10, 1);
    let ndm = run_ndm(&d.first, &d.second, &d.domain, &cov, &GrowthPriors::gaussian(), &la).unwrap();
    let a = RunArchive::from_ndm(&ndm, 1, 0.9, serde_json::Value::Null).unwrap();
    assert!(a.linkage_posterior().is_err());
    assert!(a.pooled_posterior().is_err());
}
