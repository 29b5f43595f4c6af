use std::time::Instant;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::updates::{rebuild_indices, UpdateCounters};
use super::{
    build_indices, init_state, update_lambda, update_s, update_sigma2, update_theta,
    update_translation, LinkageData, LinkagePriors, SamplerConfig, ThetaAdapter,
};
use crate::error::{Error, Result};
use crate::records::RecordFile;
use crate::rng::SimRng;
use crate::spatial::{Domain, Point2};

/// A retained sweep: the assignments and latent locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkageDraw {
    pub iteration: usize,
    pub lambda: Vec<u32>,
    pub s: Vec<Point2>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkageDiagnostics {
    pub counters: UpdateCounters,
    /// Acceptance rate of the rotation step after burn-in.
    pub theta_acceptance: f64,
    /// Final rotation step size.
    pub theta_step: f64,
}

/// Output of a linkage run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkagePosterior {
    pub draws: Vec<LinkageDraw>,
    /// Noise variance after every sweep, burn-in included.
    pub sigma2_trace: Vec<f64>,
    /// Second survey's rotation after every sweep.
    pub theta_trace: Vec<f64>,
    /// Second survey's translation after every sweep.
    pub t_trace: Vec<Point2>,
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub n_records: [usize; 2],
    pub n_latent: usize,
    pub diagnostics: LinkageDiagnostics,
    /// Wall-clock seconds per sweep when timing was requested.
    pub sweep_seconds: Option<Vec<f64>>,
}

impl LinkagePosterior {
    pub fn n_total(&self) -> usize {
        self.n_records[0] + self.n_records[1]
    }

    pub fn mean_sweep_seconds(&self) -> Option<f64> {
        self.sweep_seconds
            .as_ref()
            .filter(|v| !v.is_empty())
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Runs the Gibbs sampler on two surveys over the analysis domain `domain`.
pub fn run_gibbs(
    first: &RecordFile,
    second: &RecordFile,
    domain: Domain,
    priors: &LinkagePriors,
    config: &SamplerConfig,
) -> Result<LinkagePosterior> {
    let data = LinkageData::new(first, second, domain, priors.latent_domain_margin_m);
    run_gibbs_on(&data, priors, config)
}

/// Runs the sampler on pre-assembled data.
pub fn run_gibbs_on(
    data: &LinkageData,
    priors: &LinkagePriors,
    config: &SamplerConfig,
) -> Result<LinkagePosterior> {
    if data.total() == 0 {
        return Err(Error::EmptyInput);
    }
    priors.validate()?;
    config.validate()?;
    let mut rng = SimRng::seed_from_u64(config.seed);
    let mut state = init_state(data, priors, &mut rng)?;
    let mut indices = build_indices(&state, data, config.box_half_width);
    let mut counters = UpdateCounters::default();
    let mut adapter = ThetaAdapter::new(config.theta_step, config.theta_target_acceptance);

    let mut post = LinkagePosterior {
        draws: Vec::with_capacity(config.retained_draws()),
        sigma2_trace: Vec::with_capacity(config.iterations),
        theta_trace: Vec::with_capacity(config.iterations),
        t_trace: Vec::with_capacity(config.iterations),
        iterations: config.iterations,
        burnin: config.burnin,
        thin: config.thin,
        seed: config.seed,
        n_records: data.n,
        n_latent: state.s.len(),
        diagnostics: LinkageDiagnostics::default(),
        sweep_seconds: config
            .record_timing
            .then(|| Vec::with_capacity(config.iterations)),
    };
    let (mut post_props, mut post_accs) = (0u64, 0u64);

    for iter in 0..config.iterations {
        let started = config.record_timing.then(Instant::now);
        adapter.adapting = iter < config.burnin;
        let before = (counters.theta_proposals, counters.theta_accepts);

        update_lambda(&mut state, data, &indices, config, &mut rng, &mut counters)?;
        update_s(&mut state, data, &mut rng, &mut counters);
        let ssr = update_sigma2(&mut state, data, priors, &mut rng);
        update_translation(&mut state, data, priors, &mut rng);
        update_theta(
            &mut state,
            data,
            priors,
            &mut adapter,
            &mut rng,
            &mut counters,
        );
        rebuild_indices(&mut indices, &state, data);

        if !ssr.is_finite() || !(state.sigma2 > 0.0) || !state.sigma2.is_finite() {
            return Err(Error::NumericalFailure {
                iteration: iter,
                what: format!("likelihood (ssr = {ssr}, sigma2 = {})", state.sigma2),
            });
        }
        if !state.t[1].is_finite() || !state.theta[1].is_finite() {
            return Err(Error::NumericalFailure {
                iteration: iter,
                what: "alignment parameters".into(),
            });
        }
        if iter >= config.burnin {
            post_props += counters.theta_proposals - before.0;
            post_accs += counters.theta_accepts - before.1;
        }

        post.sigma2_trace.push(state.sigma2);
        post.theta_trace.push(state.theta[1]);
        post.t_trace.push(state.t[1]);
        if iter >= config.burnin && (iter - config.burnin + 1).is_multiple_of(config.thin) {
            post.draws.push(LinkageDraw {
                iteration: iter,
                lambda: state.lambda.clone(),
                s: state.s.clone(),
            });
        }
        if let (Some(t0), Some(times)) = (started, post.sweep_seconds.as_mut()) {
            times.push(t0.elapsed().as_secs_f64());
        }
    }
    post.diagnostics = LinkageDiagnostics {
        counters,
        theta_acceptance: if post_props > 0 {
            post_accs as f64 / post_props as f64
        } else {
            0.0
        },
        theta_step: adapter.step,
    };
    Ok(post)
}

/// Symmetric matrix of pairwise co-assignment frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.n + b]
    }

    /// Strict upper triangle, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * (self.n.saturating_sub(1)) / 2);
        for a in 0..self.n {
            for b in a + 1..self.n {
                out.push(self.get(a, b));
            }
        }
        out
    }
}

/// Fraction of retained draws in which each pair of records shares a latent.
pub fn posterior_similarity(post: &LinkagePosterior, n: usize) -> SimilarityMatrix {
    assert!(!post.draws.is_empty(), "posterior has no retained draws");
    let mut counts = vec![0u32; n * n];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); post.n_latent.max(1)];
    for draw in &post.draws {
        for m in members.iter_mut() {
            m.clear();
        }
        for (g, &l) in draw.lambda.iter().take(n).enumerate() {
            let l = l as usize;
            if l >= members.len() {
                members.resize_with(l + 1, Vec::new);
            }
            members[l].push(g);
        }
        for m in &members {
            for (i, &a) in m.iter().enumerate() {
                for &b in &m[i + 1..] {
                    counts[a * n + b] += 1;
                    counts[b * n + a] += 1;
                }
            }
        }
    }
    let k = post.draws.len() as f64;
    let mut values: Vec<f64> = counts.into_iter().map(|c| f64::from(c) / k).collect();
    for a in 0..n {
        values[a * n + a] = 1.0;
    }
    SimilarityMatrix { n, values }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn post_with(draws: Vec<Vec<u32>>) -> LinkagePosterior {
        LinkagePosterior {
            draws: draws
                .into_iter()
                .enumerate()
                .map(|(i, lambda)| LinkageDraw {
                    iteration: i,
                    lambda,
                    s: vec![Point2::ORIGIN; 3],
                })
                .collect(),
            sigma2_trace: vec![],
            theta_trace: vec![],
            t_trace: vec![],
            iterations: 3,
            burnin: 0,
            thin: 1,
            seed: 0,
            n_records: [3, 0],
            n_latent: 3,
            diagnostics: Default::default(),
            sweep_seconds: None,
        }
    }

    #[test]
    fn similarity_counts_coassignment() {
        let p = post_with(vec![vec![0, 0, 1], vec![0, 0, 0], vec![2, 1, 0]]);
        let m = posterior_similarity(&p, 3);
        assert!((m.get(0, 1) - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.get(1, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.get(0, 2) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.get(2, 2), 1.0);
    }

    #[test]
    fn always_and_never() {
        let p = post_with(vec![vec![0, 0, 1], vec![2, 2, 0]]);
        let m = posterior_similarity(&p, 3);
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(0, 2), 0.0);
    }

    #[test]
    fn empty_input_is_rejected() {
        let data = LinkageData::from_locations(vec![], [0, 0], Domain::square(0.0, 10.0), 1.0);
        let r = run_gibbs_on(&data, &LinkagePriors::default(), &SamplerConfig::default());
        assert!(matches!(r, Err(Error::EmptyInput)));
    }
}
