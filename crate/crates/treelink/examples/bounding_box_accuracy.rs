//! Compares pairwise co-assignment frequencies of the bounding-box sampler
//! with those of a sampler that considers every latent.

use treelink::linkage::{posterior_similarity, run_gibbs, CandidateMode, LinkagePriors, SamplerConfig};
use treelink::sim::{generate_dataset, SimConfig};
use treelink::stats;

fn main() -> treelink::Result<()> {
    let d = generate_dataset(&SimConfig {
        window_side: 14.0,
        domain_side: 40.0,
        sigma_obs: 0.5,
        seed: 11,
        ..SimConfig::default()
    })?;
    let n = d.first.len() + d.second.len();
    println!("{n} records");
    let priors = LinkagePriors::default();
    let exact = run_gibbs(
        &d.first,
        &d.second,
        d.domain,
        &priors,
        &SamplerConfig {
            iterations: 20_000,
            burnin: 1000,
            thin: 5,
            candidate_mode: CandidateMode::Exhaustive,
            ..SamplerConfig::default()
        },
    )?;
    let reference = posterior_similarity(&exact, n).upper_triangle();
    for half_width in [0.5, 1.0, 2.0, 3.0, 50.0] {
        let post = run_gibbs(
            &d.first,
            &d.second,
            d.domain,
            &priors,
            &SamplerConfig {
                iterations: 20_000,
                burnin: 1000,
                thin: 5,
                box_half_width: half_width,
                seed: 2,
                ..SamplerConfig::default()
            },
        )?;
        let sim = posterior_similarity(&post, n).upper_triangle();
        println!("box {half_width:5.1} m: correlation {:.4}", stats::pearson(&reference, &sim));
    }
    Ok(())
}
