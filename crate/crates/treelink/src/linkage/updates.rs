//! Full-conditional updates of the linkage chain.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{CandidateMode, LinkageData, LinkagePriors, LinkageState, SamplerConfig};
use crate::error::{Error, Result};
use crate::spatial::{GridIndex, Point2};
use crate::stats::sample_truncated_inv_gamma;

const MAX_REJECTIONS: usize = 1000;

/// Event counts accumulated over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateCounters {
    /// Latent draws clamped to the latent domain after exhausting rejection.
    pub clamp_events: u64,
    /// Box enlargements needed to reach the minimum candidate count.
    pub box_expansions: u64,
    pub theta_proposals: u64,
    pub theta_accepts: u64,
}

/// One grid per survey over the latent locations mapped into that
/// survey's frame.
pub fn build_indices(state: &LinkageState, data: &LinkageData, cell_size: f64) -> [GridIndex; 2] {
    let mut idx = [
        GridIndex::build(&[], cell_size),
        GridIndex::build(&[], cell_size),
    ];
    rebuild_indices(&mut idx, state, data);
    idx
}

pub(crate) fn rebuild_indices(idx: &mut [GridIndex; 2], state: &LinkageState, data: &LinkageData) {
    idx[0].rebuild(&state.s);
    let tr = state.transform(1, data.mu);
    let moved: Vec<Point2> = state.s.iter().map(|s| tr.apply(s)).collect();
    idx[1].rebuild(&moved);
}

/// Gathers the candidate latents of record `g` into `cand` and their
/// unnormalized weights into `w`. Returns the weight total.
#[allow(clippy::too_many_arguments)]
fn candidate_weights(
    state: &LinkageState,
    data: &LinkageData,
    indices: &[GridIndex; 2],
    config: &SamplerConfig,
    g: usize,
    cand: &mut Vec<usize>,
    w: &mut Vec<f64>,
    counters: &mut UpdateCounters,
) -> Result<f64> {
    let nl = state.s.len();
    let index = &indices[data.file_of(g)];
    let y = data.locations[g];
    match config.candidate_mode {
        CandidateMode::Exhaustive => {
            cand.clear();
            cand.extend(0..nl);
        }
        CandidateMode::BoundingBox => {
            let required = config.min_candidates.min(nl);
            let mut hw = config.box_half_width;
            let limit = index.covering_half_width(&y);
            loop {
                index.query_box_into(&y, hw, cand);
                if cand.len() >= required {
                    break;
                }
                if hw >= limit {
                    return Err(Error::CandidateSearchFailed {
                        record: g,
                        half_width: hw,
                    });
                }
                hw = (hw * config.box_growth_factor).min(limit);
                counters.box_expansions += 1;
            }
        }
    }
    let inv_two_sigma2 = 0.5 / state.sigma2;
    w.clear();
    let mut best = f64::NEG_INFINITY;
    for &j in cand.iter() {
        let lw = -index.point(j).dist2(&y) * inv_two_sigma2;
        best = best.max(lw);
        w.push(lw);
    }
    let mut total = 0.0;
    for x in w.iter_mut() {
        *x = (*x - best).exp();
        total += *x;
    }
    Ok(total)
}

/// Conditional probabilities of record `g` over its candidate latents,
/// exactly as [`update_lambda`] would draw it.
pub fn assignment_probabilities(
    state: &LinkageState,
    data: &LinkageData,
    indices: &[GridIndex; 2],
    config: &SamplerConfig,
    g: usize,
) -> Result<Vec<(usize, f64)>> {
    let (mut cand, mut w) = (Vec::new(), Vec::new());
    let total = candidate_weights(state, data, indices, config, g, &mut cand, &mut w, &mut UpdateCounters::default())?;
    Ok(cand.into_iter().zip(w.into_iter().map(|x| x / total)).collect())
}

/// Redraws every assignment from its conditional restricted to candidate
/// latents. `indices` must hold the latents as seen from each survey.
pub fn update_lambda<R: Rng + ?Sized>(
    state: &mut LinkageState,
    data: &LinkageData,
    indices: &[GridIndex; 2],
    config: &SamplerConfig,
    rng: &mut R,
    counters: &mut UpdateCounters,
) -> Result<()> {
    let mut order: Vec<usize> = (0..data.total()).collect();
    if config.random_scan {
        order.shuffle(rng);
    }
    let mut cand: Vec<usize> = Vec::with_capacity(32);
    let mut w: Vec<f64> = Vec::with_capacity(32);
    for g in order {
        let total = candidate_weights(state, data, indices, config, g, &mut cand, &mut w, counters)?;
        let mut u = rng.random::<f64>() * total;
        let mut pick = cand[cand.len() - 1];
        for (k, x) in w.iter().enumerate() {
            if u < *x {
                pick = cand[k];
                break;
            }
            u -= x;
        }
        state.lambda[g] = pick as u32;
    }
    Ok(())
}

/// Redraws latent locations: a normal centered at the mean of the
/// back-transformed member records with variance `sigma2 / m`, truncated to
/// the latent domain; unoccupied latents are drawn uniformly.
pub fn update_s<R: Rng + ?Sized>(
    state: &mut LinkageState,
    data: &LinkageData,
    rng: &mut R,
    counters: &mut UpdateCounters,
) {
    let nl = state.s.len();
    let mut sums = vec![Point2::ORIGIN; nl];
    let mut counts = vec![0u32; nl];
    let tr = [state.transform(0, data.mu), state.transform(1, data.mu)];
    for (g, &l) in state.lambda.iter().enumerate() {
        let back = tr[data.file_of(g)].invert(&data.locations[g]);
        sums[l as usize] = sums[l as usize] + back;
        counts[l as usize] += 1;
    }
    let dom = data.latent_domain;
    for j in 0..nl {
        let m = counts[j];
        if m == 0 {
            state.s[j] = Point2::new(
                rng.random_range(dom.xmin..=dom.xmax),
                rng.random_range(dom.ymin..=dom.ymax),
            );
            continue;
        }
        let center = sums[j] * (1.0 / f64::from(m));
        let sd = (state.sigma2 / f64::from(m)).sqrt();
        let mut drawn = None;
        for _ in 0..MAX_REJECTIONS {
            let zx: f64 = StandardNormal.sample(rng);
            let zy: f64 = StandardNormal.sample(rng);
            let p = Point2::new(center.x + sd * zx, center.y + sd * zy);
            if dom.contains(&p) {
                drawn = Some(p);
                break;
            }
        }
        state.s[j] = drawn.unwrap_or_else(|| {
            counters.clamp_events += 1;
            dom.clamp(&center)
        });
    }
}

/// Sum over records of squared distances to their transformed latents.
pub fn residual_sum_of_squares(state: &LinkageState, data: &LinkageData) -> f64 {
    let tr = [state.transform(0, data.mu), state.transform(1, data.mu)];
    state
        .lambda
        .iter()
        .enumerate()
        .map(|(g, &l)| data.locations[g].dist2(&tr[data.file_of(g)].apply(&state.s[l as usize])))
        .sum()
}

/// Conjugate draw of the noise variance: inverse-gamma with shape
/// `c + n` and scale `d + SSR / 2`, truncated to `(0, b_sigma]`.
pub fn update_sigma2<R: Rng + ?Sized>(
    state: &mut LinkageState,
    data: &LinkageData,
    priors: &LinkagePriors,
    rng: &mut R,
) -> f64 {
    let ssr = residual_sum_of_squares(state, data);
    let shape = priors.c_sigma + data.total() as f64;
    let scale = priors.d_sigma + 0.5 * ssr;
    state.sigma2 = sample_truncated_inv_gamma(shape, scale, priors.b_sigma, rng);
    ssr
}

/// Conjugate normal draw of the second survey's translation.
pub fn update_translation<R: Rng + ?Sized>(
    state: &mut LinkageState,
    data: &LinkageData,
    priors: &LinkagePriors,
    rng: &mut R,
) {
    if priors.fix_translation {
        return;
    }
    let rot = crate::spatial::RigidTransform::new(state.theta[1], Point2::ORIGIN, data.mu);
    let mut acc = Point2::ORIGIN;
    for g in data.file_range(1) {
        let s = state.s[state.lambda[g] as usize];
        acc = acc + (data.locations[g] - rot.apply(&s));
    }
    let precision = data.n[1] as f64 / state.sigma2 + 1.0 / priors.sigma_t2;
    let mean = acc * (1.0 / (state.sigma2 * precision));
    let sd = precision.recip().sqrt();
    let zx: f64 = StandardNormal.sample(rng);
    let zy: f64 = StandardNormal.sample(rng);
    state.t[1] = Point2::new(mean.x + sd * zx, mean.y + sd * zy);
}

/// Random-walk step-size controller for the rotation update. The step is
/// tuned toward the target acceptance rate while `adapting` is set and
/// frozen otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaAdapter {
    pub step: f64,
    pub target: f64,
    pub adapting: bool,
    rounds: u64,
}

impl ThetaAdapter {
    pub fn new(step: f64, target: f64) -> Self {
        Self {
            step,
            target,
            adapting: true,
            rounds: 0,
        }
    }

    fn record(&mut self, accepted: bool) {
        if !self.adapting {
            return;
        }
        self.rounds += 1;
        let gain = (self.rounds as f64).powf(-0.6);
        let hit = if accepted { 1.0 } else { 0.0 };
        self.step = (self.step.ln() + gain * (hit - self.target))
            .exp()
            .clamp(1e-9, 1.0);
    }
}

/// One Metropolis step on the second survey's rotation under the truncated
/// von Mises prior.
pub fn update_theta<R: Rng + ?Sized>(
    state: &mut LinkageState,
    data: &LinkageData,
    priors: &LinkagePriors,
    adapter: &mut ThetaAdapter,
    rng: &mut R,
    counters: &mut UpdateCounters,
) {
    if priors.fix_theta {
        return;
    }
    // With a = s - mu and u = y - t - mu, the log-likelihood in theta is
    // (cos(theta) A + sin(theta) B) / sigma2 + const, where
    // A = sum u.a and B = sum (u_y a_x - u_x a_y).
    let c = state.t[1] + data.mu;
    let (mut a_sum, mut b_sum) = (0.0, 0.0);
    for g in data.file_range(1) {
        let a = state.s[state.lambda[g] as usize] - data.mu;
        let u = data.locations[g] - c;
        a_sum += u.x * a.x + u.y * a.y;
        b_sum += u.y * a.x - u.x * a.y;
    }
    let log_target = |th: f64| {
        (th.cos() * a_sum + th.sin() * b_sum) / state.sigma2 + priors.kappa * (th - priors.nu).cos()
    };
    let current = state.theta[1];
    let z: f64 = StandardNormal.sample(rng);
    let proposal = current + adapter.step * z;
    counters.theta_proposals += 1;
    let accepted = if proposal.abs() >= priors.b_theta {
        false
    } else {
        let log_ratio = log_target(proposal) - log_target(current);
        log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
    };
    if accepted {
        state.theta[1] = proposal;
        counters.theta_accepts += 1;
    }
    adapter.record(accepted);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::spatial::Domain;

    fn toy(locs: Vec<Point2>, n: [usize; 2]) -> LinkageData {
        LinkageData::from_locations(locs, n, Domain::square(0.0, 100.0), 5.0)
    }

    #[test]
    fn far_candidate_is_practically_never_chosen() {
        // y at latent 0; latent 1 at distance 10 sigma: odds exp(-50).
        let sigma2: f64 = 0.25;
        let d = 10.0 * sigma2.sqrt();
        let data = toy(vec![Point2::new(50.0, 50.0)], [1, 0]);
        let mut st = LinkageState {
            lambda: vec![1],
            s: vec![Point2::new(50.0, 50.0), Point2::new(50.0 + d, 50.0)],
            sigma2,
            theta: [0.0; 2],
            t: [Point2::ORIGIN; 2],
        };
        let idx = build_indices(&st, &data, 3.0);
        let cfg = SamplerConfig {
            box_half_width: 10.0,
            ..Default::default()
        };
        let mut rng = rng_from_seed(1);
        let mut c = UpdateCounters::default();
        for _ in 0..10_000 {
            update_lambda(&mut st, &data, &idx, &cfg, &mut rng, &mut c).unwrap();
            assert_eq!(st.lambda[0], 0);
        }
    }

    #[test]
    fn equidistant_candidates_split_evenly() {
        let data = toy(vec![Point2::new(50.0, 50.0)], [1, 0]);
        let mut st = LinkageState {
            lambda: vec![0],
            s: vec![Point2::new(49.0, 50.0), Point2::new(51.0, 50.0)],
            sigma2: 1.0,
            theta: [0.0; 2],
            t: [Point2::ORIGIN; 2],
        };
        let idx = build_indices(&st, &data, 3.0);
        let cfg = SamplerConfig::default();
        let mut rng = rng_from_seed(2);
        let mut c = UpdateCounters::default();
        let mut hits = 0;
        for _ in 0..10_000 {
            update_lambda(&mut st, &data, &idx, &cfg, &mut rng, &mut c).unwrap();
            hits += st.lambda[0] as usize;
        }
        let frac = hits as f64 / 10_000.0;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn box_grows_until_two_candidates() {
        let data = toy(vec![Point2::new(10.0, 10.0)], [1, 0]);
        let mut st = LinkageState {
            lambda: vec![0],
            s: vec![
                Point2::new(10.5, 10.0),
                Point2::new(40.0, 40.0),
                Point2::new(90.0, 90.0),
            ],
            sigma2: 1.0,
            theta: [0.0; 2],
            t: [Point2::ORIGIN; 2],
        };
        let idx = build_indices(&st, &data, 1.0);
        let cfg = SamplerConfig {
            box_half_width: 1.0,
            ..Default::default()
        };
        let mut c = UpdateCounters::default();
        update_lambda(&mut st, &data, &idx, &cfg, &mut rng_from_seed(3), &mut c).unwrap();
        assert!(c.box_expansions > 0);
        assert_eq!(st.lambda[0], 0);
    }

    #[test]
    fn proposal_beyond_truncation_is_rejected() {
        let data = toy(
            vec![Point2::new(50.0, 50.0), Point2::new(50.0, 50.0)],
            [1, 1],
        );
        let mut st = LinkageState {
            lambda: vec![0, 0],
            s: vec![Point2::new(50.0, 50.0)],
            sigma2: 1.0,
            theta: [0.0, 0.0],
            t: [Point2::ORIGIN; 2],
        };
        let priors = LinkagePriors {
            b_theta: 1e-6,
            ..Default::default()
        };
        // a step of 10 rad lands outside +-1e-6 with overwhelming probability
        let mut ad = ThetaAdapter::new(10.0, 0.4);
        ad.adapting = false;
        let mut c = UpdateCounters::default();
        let mut rng = rng_from_seed(8);
        for _ in 0..100 {
            update_theta(&mut st, &data, &priors, &mut ad, &mut rng, &mut c);
        }
        assert_eq!(st.theta[1], 0.0);
        assert_eq!(c.theta_accepts, 0);
    }

    #[test]
    fn sigma2_scale_from_residuals() {
        // residual norms^2 {1, 4, 9}: SSR = 14, scale d + 7
        let data = toy(
            vec![
                Point2::new(51.0, 50.0),
                Point2::new(50.0, 52.0),
                Point2::new(47.0, 50.0),
            ],
            [3, 0],
        );
        let st = LinkageState {
            lambda: vec![0, 0, 0],
            s: vec![Point2::new(50.0, 50.0)],
            sigma2: 1.0,
            theta: [0.0; 2],
            t: [Point2::ORIGIN; 2],
        };
        let ssr = residual_sum_of_squares(&st, &data);
        assert!((0.5 * ssr - 7.0).abs() < 1e-12);
    }
}
