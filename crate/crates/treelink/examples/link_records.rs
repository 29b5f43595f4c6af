//! Samples the linkage posterior of two simulated surveys and scores the
//! draws against the true linkage.

use treelink::eval::{eval_posterior_links, pairs_from_partition};
use treelink::linkage::{run_gibbs, LinkagePriors, SamplerConfig};
use treelink::sim::{generate_dataset, SimConfig};
use treelink::stats;

fn main() -> treelink::Result<()> {
    let d = generate_dataset(&SimConfig {
        window_side: 50.0,
        domain_side: 80.0,
        seed: 3,
        ..SimConfig::default()
    })?;
    let sampler = SamplerConfig {
        iterations: 600,
        burnin: 300,
        thin: 5,
        ..SamplerConfig::default()
    };
    let post = run_gibbs(&d.first, &d.second, d.domain, &LinkagePriors::default(), &sampler)?;

    let kept = |v: &[f64]| v[post.burnin..].to_vec();
    let sigma2 = kept(&post.sigma2_trace);
    let theta = kept(&post.theta_trace);
    let tx: Vec<f64> = post.t_trace[post.burnin..].iter().map(|t| t.x).collect();
    let ty: Vec<f64> = post.t_trace[post.burnin..].iter().map(|t| t.y).collect();
    println!("sigma  {:.3} (truth {:.3})", stats::mean(&sigma2).sqrt(), d.config.sigma_obs);
    println!("theta  {:.4} (truth {:.4})", stats::mean(&theta), d.truth.theta);
    println!("t      ({:.3}, {:.3}) (truth ({:.3}, {:.3}))", stats::mean(&tx), stats::mean(&ty), d.truth.t.x, d.truth.t.y);
    println!("theta acceptance {:.2}", post.diagnostics.theta_acceptance);

    let truth = pairs_from_partition(&d.truth.latent_ids(&d.first, &d.second)?);
    let eval = eval_posterior_links(&post.draws, &truth);
    println!(
        "precision {:.3} (IQR {:.3} to {:.3})  recall {:.3} (IQR {:.3} to {:.3})  over {} draws",
        eval.precision.mean,
        eval.precision.q25,
        eval.precision.q75,
        eval.recall.mean,
        eval.recall.q25,
        eval.recall.q75,
        post.draws.len()
    );
    Ok(())
}
