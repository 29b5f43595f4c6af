//! Writes a linkage run to an archive directory, reads it back and checks
//! that nothing was lost.

use treelink::eval::RunArchive;
use treelink::linkage::{run_gibbs, LinkagePriors, SamplerConfig};
use treelink::sim::{generate_dataset, SimConfig};

fn main() -> treelink::Result<()> {
    let d = generate_dataset(&SimConfig {
        window_side: 30.0,
        domain_side: 60.0,
        ..SimConfig::default()
    })?;
    let sampler = SamplerConfig {
        iterations: 200,
        burnin: 100,
        thin: 10,
        ..SamplerConfig::default()
    };
    let post = run_gibbs(&d.first, &d.second, d.domain, &LinkagePriors::default(), &sampler)?;
    let archive = RunArchive::from_linkage(&post, &sampler, serde_json::to_value(&sampler)?)?;

    let dir = std::env::temp_dir().join("treelink-archive");
    archive.write(&dir)?;
    for entry in std::fs::read_dir(&dir)? {
        let entry = entry?;
        println!("{:>10} bytes  {}", entry.metadata()?.len(), entry.file_name().to_string_lossy());
    }
    let back = RunArchive::read(&dir)?.linkage_posterior()?;
    assert_eq!(back, post);
    println!("{} draws restored exactly", back.draws.len());
    Ok(())
}
