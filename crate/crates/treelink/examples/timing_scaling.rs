//! Seconds per sweep of the linkage sampler as the number of records grows,
//! with a 3 m candidate box and with every latent as a candidate.

use treelink::eval::{timing_report, RunArchive};
use treelink::linkage::{run_gibbs, CandidateMode, LinkagePriors, SamplerConfig};
use treelink::sim::{generate_dataset, SimConfig};

fn main() -> treelink::Result<()> {
    let mut archives = Vec::new();
    for n in [200usize, 400, 800] {
        let side = (n as f64 / 0.12).sqrt();
        let d = generate_dataset(&SimConfig {
            window_side: side,
            domain_side: side + 30.0,
            ..SimConfig::default()
        })?;
        for mode in [CandidateMode::BoundingBox, CandidateMode::Exhaustive] {
            let sampler = SamplerConfig {
                iterations: 20,
                burnin: 10,
                thin: 1,
                candidate_mode: mode,
                record_timing: true,
                ..SamplerConfig::default()
            };
            let post = run_gibbs(&d.first, &d.second, d.domain, &LinkagePriors::default(), &sampler)?;
            archives.push(RunArchive::from_linkage(&post, &sampler, serde_json::Value::Null)?);
        }
    }
    println!("records  box           s/sweep   speedup");
    for row in timing_report(&archives)? {
        let b = row.box_half_width.map_or("unrestricted".to_string(), |b| format!("{b} m"));
        println!("{:7}  {b:12}  {:.2e}  {:7.1}", row.n_records, row.seconds_per_iteration, row.speedup);
    }
    Ok(())
}
