//! Fits the saturating growth curve to clusters simulated straight from the
//! model, then reports posterior summaries beside the generating values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use treelink::growth::{fit_growth, mm_mean, GrowthCluster, GrowthMcmcConfig, GrowthParams, GrowthPriors};
use treelink::pipeline::summarize_growth;
use treelink::stats::effective_sample_size;
use treelink::Point2;

fn main() -> treelink::Result<()> {
    let truth = GrowthParams {
        alpha: 1.0,
        gamma: 12.0,
        beta: vec![3.0, 0.5, -0.5, 0.5, -0.5],
        tau: 0.5,
        delta: 0.0,
        omega: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise = Normal::new(0.0, truth.tau.sqrt()).unwrap();
    let clusters: Vec<GrowthCluster> = (0..600)
        .map(|i| {
            let mut x = vec![1.0];
            x.extend((0..4).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let v = (20f64.ln() + 1.2 * rng.sample::<f64, _>(StandardNormal)).exp();
            let g = mm_mean(&truth, &x, v) + rng.sample(noise);
            GrowthCluster {
                cluster_id: i,
                v_first: v,
                v_last: v + 4.0 * g,
                years_span: 4.0,
                g,
                latent_location: Point2::ORIGIN,
                covariates: x,
                members: Vec::new(),
            }
        })
        .collect();

    let post = fit_growth(
        &clusters,
        &GrowthPriors::gaussian(),
        &GrowthMcmcConfig {
            draws: 2000,
            ..GrowthMcmcConfig::default()
        },
    )?;
    println!("acceptance per block {:.2?}", post.acceptance);
    let truth_vec = truth.to_vec(post.family);
    for (k, s) in summarize_growth(&post, 0.9).iter().enumerate() {
        println!(
            "{:6} truth {:6.2}  mean {:7.3}  90% [{:7.3}, {:7.3}]  ess {:5.0}",
            s.name,
            truth_vec[k],
            s.mean,
            s.lo,
            s.hi,
            effective_sample_size(&post.column(k))
        );
    }
    Ok(())
}
