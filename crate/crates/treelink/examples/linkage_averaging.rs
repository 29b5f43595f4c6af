//! Carries linkage uncertainty into the growth model by fitting it on a
//! sample of linkage draws and pooling the conditional posteriors.

use treelink::growth::GrowthPriors;
use treelink::linkage::{run_gibbs, LinkagePriors, SamplerConfig};
use treelink::pipeline::{run_la, CovariateSet, LAConfig};
use treelink::sim::{generate_dataset, SimConfig};

fn main() -> treelink::Result<()> {
    let d = generate_dataset(&SimConfig {
        window_side: 70.0,
        domain_side: 100.0,
        seed: 21,
        ..SimConfig::default()
    })?;
    let post = run_gibbs(
        &d.first,
        &d.second,
        d.domain,
        &LinkagePriors::default(),
        &SamplerConfig {
            iterations: 800,
            burnin: 400,
            thin: 10,
            ..SamplerConfig::default()
        },
    )?;
    let config = LAConfig {
        k: 10,
        l: 50,
        r1: 0.5,
        r2: 3.0,
        boundary_buffer: 10.0,
        ..LAConfig::default()
    };
    let pooled = run_la(
        &post,
        &d.first,
        &d.second,
        &d.domain,
        &CovariateSet::new(d.covariates.clone()),
        &GrowthPriors::gaussian(),
        &config,
    )?;
    println!("{} pooled draws, b_gamma {:.1}", pooled.draws.len(), pooled.b_gamma);
    for (t, n) in &pooled.clusters_per_draw {
        print!("t{t}:{n} ");
    }
    println!();
    let truth = d.truth.growth_params.to_vec(pooled.family);
    for (s, v) in pooled.summaries.iter().zip(truth) {
        println!("{:6} truth {v:6.2}  mean {:7.3}  90% [{:7.3}, {:7.3}]", s.name, s.mean, s.lo, s.hi);
    }
    Ok(())
}
