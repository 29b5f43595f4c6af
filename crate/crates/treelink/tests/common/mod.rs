#![allow(dead_code)]

use treelink::growth::GrowthMcmcConfig;
use treelink::linkage::{LinkageDiagnostics, LinkageDraw, LinkagePosterior};
use treelink::pipeline::{fixed_linkage_draw, LAConfig};
use treelink::sim::{generate_dataset, Dataset, SimConfig};

/// A dataset about a third of the default area.
pub fn small_dataset(seed: u64) -> Dataset {
    generate_dataset(&SimConfig {
        domain_side: 80.0,
        window_side: 60.0,
        seed,
        ..SimConfig::default()
    })
    .unwrap()
}

pub fn truth_draw(d: &Dataset) -> LinkageDraw {
    let (lambda, _) = d.truth.linkage(&d.first, &d.second).unwrap();
    fixed_linkage_draw(&lambda, &d.first, &d.second).unwrap()
}

/// A linkage posterior whose retained draws are all `draw`.
pub fn constant_posterior(draw: &LinkageDraw, n: [usize; 2], draws: usize) -> LinkagePosterior {
    LinkagePosterior {
        draws: (0..draws)
            .map(|i| LinkageDraw {
                iteration: 100 + i,
                ..draw.clone()
            })
            .collect(),
        sigma2_trace: vec![],
        theta_trace: vec![],
        t_trace: vec![],
        iterations: 100 + draws,
        burnin: 100,
        thin: 1,
        seed: 0,
        n_records: n,
        n_latent: draw.s.len(),
        diagnostics: LinkageDiagnostics::default(),
        sweep_seconds: None,
    }
}

pub fn quick_la(k: usize, l: usize, thin: usize) -> LAConfig {
    LAConfig {
        k,
        l,
        r1: 0.5,
        r2: 3.0,
        boundary_buffer: 5.0,
        growth: GrowthMcmcConfig {
            burnin: 1500,
            thin,
            ..GrowthMcmcConfig::default()
        },
        seed: 9,
    }
}
