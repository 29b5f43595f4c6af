//! The nearest-distance baseline: match every first-survey tree to its
//! closest second-survey tree, score the matching, and fit growth on it.

use treelink::eval::{eval_links, pairs_from_ndm, pairs_from_partition};
use treelink::growth::GrowthPriors;
use treelink::pipeline::{ndm_link, run_ndm, summarize_growth, CovariateSet, LAConfig};
use treelink::sim::{generate_dataset, SimConfig};

fn main() -> treelink::Result<()> {
    let d = generate_dataset(&SimConfig {
        window_side: 70.0,
        domain_side: 100.0,
        seed: 21,
        ..SimConfig::default()
    })?;
    let pairs = ndm_link(&d.first, &d.second)?;
    let mut shared = std::collections::HashMap::new();
    for p in &pairs {
        *shared.entry(p.second).or_insert(0) += 1;
    }
    let reused = shared.values().filter(|&&c| c > 1).count();
    println!("{} pairs; {} second-survey trees matched more than once", pairs.len(), reused);

    let truth = pairs_from_partition(&d.truth.latent_ids(&d.first, &d.second)?);
    let r = eval_links(&pairs_from_ndm(&pairs, d.first.len(), d.second.len()), &truth);
    println!("tp {} fp {} fn {}  precision {:.3} recall {:.3}", r.tp, r.fp, r.fn_, r.precision, r.recall);

    let config = LAConfig {
        k: 10,
        l: 50,
        r1: 0.5,
        r2: 3.0,
        boundary_buffer: 10.0,
        ..LAConfig::default()
    };
    let result = run_ndm(
        &d.first,
        &d.second,
        &d.domain,
        &CovariateSet::new(d.covariates.clone()),
        &GrowthPriors::gaussian(),
        &config,
    )?;
    println!("{} growth clusters", result.clusters.len());
    let post = result.posterior.expect("fitted");
    for s in summarize_growth(&post, 0.9) {
        println!("{:6} mean {:7.3}  90% [{:7.3}, {:7.3}]", s.name, s.mean, s.lo, s.hi);
    }
    Ok(())
}
