mod common;

use proptest::prelude::*;
use rand::Rng;

use treelink::growth::{fit_growth, GrowthMcmcConfig, GrowthPriors};
use treelink::linkage::LinkageDraw;
use treelink::pipeline::{
    clusters_for_draw, credible_interval, ndm_link, run_la, run_ndm, CovariateSet, PooledPosterior,
};
use treelink::records::{Record, RecordFile};
use treelink::rng::{derive_seed, rng_from_seed};
use treelink::spatial::Point2;
use treelink::stats::ks_two_sample;
use treelink::Error;

use common::{constant_posterior, quick_la, small_dataset, truth_draw};

#[test]
fn single_draw_equals_conditional_fit() {
    let d = small_dataset(1);
    let draw = truth_draw(&d);
    let post = constant_posterior(&draw, [d.first.len(), d.second.len()], 1);
    let cov = CovariateSet::new(d.covariates.clone());
    let la = quick_la(1, 200, 5);
    let priors = GrowthPriors::gaussian();
    let pooled = run_la(&post, &d.first, &d.second, &d.domain, &cov, &priors, &la).unwrap();

    let b_gamma = d.first.records.iter().map(|r| r.volume).fold(f64::NAN, f64::max);
    let clusters = clusters_for_draw(&draw, &d.first, &d.second, &d.domain, &cov, &la).unwrap();
    let single = fit_growth(
        &clusters,
        &priors.with_b_gamma(b_gamma),
        &GrowthMcmcConfig {
            draws: 200,
            seed: derive_seed(la.seed, 1),
            ..la.growth.clone()
        },
    )
    .unwrap();
    assert_eq!(pooled.draws, single.draws);
    assert_eq!(pooled.b_gamma, b_gamma);
}

#[test]
fn constant_linkage_pools_like_one_long_fit() {
    let d = small_dataset(2);
    let draw = truth_draw(&d);
    let (k, l, thin) = (8, 150, 40);
    let post = constant_posterior(&draw, [d.first.len(), d.second.len()], k);
    let cov = CovariateSet::new(d.covariates.clone());
    let la = quick_la(k, l, thin);
    let priors = GrowthPriors::gaussian();
    let pooled = run_la(&post, &d.first, &d.second, &d.domain, &cov, &priors, &la).unwrap();

    let clusters = clusters_for_draw(&draw, &d.first, &d.second, &d.domain, &cov, &la).unwrap();
    let single = fit_growth(
        &clusters,
        &priors.with_b_gamma(pooled.b_gamma),
        &GrowthMcmcConfig {
            draws: k * l,
            seed: 12345,
            ..la.growth.clone()
        },
    )
    .unwrap();
    for (j, name) in pooled.names().iter().enumerate() {
        let ks = ks_two_sample(&pooled.column(j), &single.column(j));
        assert!(ks.p_value > 0.01, "{name}: {ks:?}");
    }
}

#[test]
fn pooled_draws_are_tagged_in_order() {
    let d = small_dataset(3);
    let draw = truth_draw(&d);
    let post = constant_posterior(&draw, [d.first.len(), d.second.len()], 12);
    let cov = CovariateSet::new(d.covariates.clone());
    let la = quick_la(5, 7, 1);
    let pooled = run_la(&post, &d.first, &d.second, &d.domain, &cov, &GrowthPriors::gaussian(), &la).unwrap();
    assert_eq!(pooled.draws.len(), 35);
    assert_eq!(pooled.tags.len(), 35);
    for (i, tag) in pooled.tags.iter().enumerate() {
        assert_eq!((tag.t, tag.u), (i / 7, i % 7));
    }
    let mut used: Vec<usize> = pooled.tags.iter().map(|t| t.linkage_iteration).collect();
    used.dedup();
    assert_eq!(used.len(), 5);
    used.sort();
    used.dedup();
    assert_eq!(used.len(), 5, "a linkage draw was reused");
    assert!(pooled.skipped.is_empty());
}

#[test]
fn pooling_ignores_thread_count() {
    let d = small_dataset(4);
    let draw = truth_draw(&d);
    let post = constant_posterior(&draw, [d.first.len(), d.second.len()], 6);
    let cov = CovariateSet::new(d.covariates.clone());
    let la = quick_la(6, 20, 2);
    let run = |threads| -> PooledPosterior {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_la(&post, &d.first, &d.second, &d.domain, &cov, &GrowthPriors::gaussian(), &la).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn too_few_linkage_draws_is_rejected() {
    let d = small_dataset(5);
    let post = constant_posterior(&truth_draw(&d), [d.first.len(), d.second.len()], 3);
    let cov = CovariateSet::new(d.covariates.clone());
    let r = run_la(&post, &d.first, &d.second, &d.domain, &cov, &GrowthPriors::gaussian(), &quick_la(4, 10, 1));
    assert!(matches!(r, Err(Error::Validation { .. })));
}

#[test]
fn starved_draws_are_skipped() {
    let d = small_dataset(6);
    let n = d.first.len() + d.second.len();
    let good = truth_draw(&d);
    // every record on its own latent: no cluster spans both surveys
    let lonely = LinkageDraw {
        iteration: 0,
        lambda: (0..n as u32).collect(),
        s: d.first
            .records
            .iter()
            .chain(&d.second.records)
            .map(|r| r.location)
            .collect(),
    };
    let mut post = constant_posterior(&good, [d.first.len(), d.second.len()], 4);
    post.draws[1] = LinkageDraw {
        iteration: 101,
        ..lonely.clone()
    };
    let cov = CovariateSet::new(d.covariates.clone());
    let pooled = run_la(&post, &d.first, &d.second, &d.domain, &cov, &GrowthPriors::gaussian(), &quick_la(4, 10, 1)).unwrap();
    assert_eq!(pooled.skipped.len(), 1);
    assert_eq!(pooled.skipped[0].linkage_iteration, 101);
    assert_eq!(pooled.draws.len(), 30);

    let all_bad = constant_posterior(&lonely, [d.first.len(), d.second.len()], 2);
    let r = run_la(&all_bad, &d.first, &d.second, &d.domain, &cov, &GrowthPriors::gaussian(), &quick_la(2, 10, 1));
    assert!(matches!(r, Err(Error::NoUsableDraws(2))));
}

fn random_file(idx: u8, n: usize, seed: u64) -> RecordFile {
    let mut rng = rng_from_seed(seed);
    RecordFile::new(
        idx,
        2015,
        (0..n)
            .map(|i| Record {
                id: (n - i) as u64 * 3,
                location: Point2::new(rng.random_range(0.0..50.0), rng.random_range(0.0..50.0)),
                volume: 1.0,
            })
            .collect(),
    )
}

#[test]
fn nearest_match_agrees_with_brute_force() {
    let a = random_file(1, 200, 7);
    let b = random_file(2, 200, 8);
    let pairs = ndm_link(&a, &b).unwrap();
    assert_eq!(pairs.len(), 200);
    for (i, p) in pairs.iter().enumerate() {
        assert_eq!(p.first, i);
        let y = a.records[i].location;
        let best = b
            .records
            .iter()
            .enumerate()
            .min_by(|(_, r), (_, s)| {
                r.location
                    .dist2(&y)
                    .total_cmp(&s.location.dist2(&y))
                    .then(r.id.cmp(&s.id))
            })
            .unwrap()
            .0;
        assert_eq!(p.second, best);
        assert_eq!(p.second_id, b.records[best].id);
    }
}

#[test]
fn ndm_fit_has_pooled_size() {
    let d = small_dataset(9);
    let cov = CovariateSet::new(d.covariates.clone());
    let la = quick_la(3, 40, 1);
    let r = run_ndm(&d.first, &d.second, &d.domain, &cov, &GrowthPriors::gaussian(), &la).unwrap();
    assert_eq!(r.pairs.len(), d.first.len());
    assert_eq!(r.posterior.unwrap().draws.len(), 120);
    assert!(r.clusters.iter().all(|c| c.members.len() == 2));
}

#[test]
fn interval_of_one_to_hundred() {
    let v: Vec<f64> = (1..=100).map(f64::from).collect();
    let (lo, hi) = credible_interval(&v, 0.9);
    assert!((lo - 5.95).abs() < 1e-12 && (hi - 95.05).abs() < 1e-12);
}

proptest! {
    #[test]
    fn interval_widens_with_level(
        draws in prop::collection::vec(-100.0f64..100.0, 2..200),
        a in 0.01f64..0.98,
        b in 0.01f64..0.98,
    ) {
        let (lo_a, hi_a) = credible_interval(&draws, a.min(b));
        let (lo_b, hi_b) = credible_interval(&draws, a.max(b));
        prop_assert!(lo_b <= lo_a && hi_a <= hi_b);
        prop_assert!(lo_a <= hi_a);
    }
}
