//! A small replicated simulation study: interval coverage and link quality
//! of linkage averaging against the nearest-distance baseline.

use rayon::prelude::*;
use treelink::eval::{coverage_csv, coverage_tables, run_replicate, ReplicateDesign, SuiteCell};
use treelink::linkage::SamplerConfig;
use treelink::pipeline::LAConfig;
use treelink::rng::derive_seed;
use treelink::sim::SimConfig;

fn main() -> treelink::Result<()> {
    let replicates = 6;
    let design = ReplicateDesign {
        sampler: SamplerConfig {
            iterations: 900,
            burnin: 400,
            thin: 10,
            ..SamplerConfig::default()
        },
        la: LAConfig {
            k: 10,
            l: 40,
            r1: 0.5,
            r2: 3.0,
            ..LAConfig::default()
        },
        ..ReplicateDesign::default()
    };
    let results = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let sim = SimConfig {
                seed: derive_seed(99, r),
                ..SimConfig::default()
            };
            run_replicate(&sim, &design)
        })
        .collect::<treelink::Result<Vec<_>>>()?;

    for (r, rep) in results.iter().enumerate() {
        println!(
            "rep {r}: {:>3}+{:>3} records  LA p/r {:.3}/{:.3}  NDM p/r {:.3}/{:.3}",
            rep.n_records[0],
            rep.n_records[1],
            rep.la_links.precision.mean,
            rep.la_links.recall.mean,
            rep.ndm_links.precision,
            rep.ndm_links.recall
        );
    }
    let cells = [SuiteCell {
        label: "medium".into(),
        replicates: &results,
    }];
    print!("{}", coverage_csv(&coverage_tables(&cells))?);
    Ok(())
}
