use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LinkageData, LinkagePriors};
use crate::error::{Error, Result};
use crate::spatial::{GridIndex, Point2, RigidTransform};
use crate::stats::inv_gamma_quantile;

/// Complete state of the linkage chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkageState {
    /// Zero-based latent index of every record, first survey then second.
    pub lambda: Vec<u32>,
    /// Latent locations.
    pub s: Vec<Point2>,
    /// Location noise variance (m²).
    pub sigma2: f64,
    /// Rotation per survey; the first is always zero.
    pub theta: [f64; 2],
    /// Translation per survey; the first is always the origin.
    pub t: [Point2; 2],
}

impl LinkageState {
    pub fn n_latent(&self) -> usize {
        self.s.len()
    }

    pub fn transform(&self, file: usize, mu: Point2) -> RigidTransform {
        RigidTransform::new(self.theta[file], self.t[file], mu)
    }

    /// Checks every structural invariant against the data and priors.
    pub fn check_invariants(
        &self,
        data: &LinkageData,
        priors: &LinkagePriors,
    ) -> std::result::Result<(), String> {
        if self.lambda.len() != data.total() {
            return Err(format!(
                "lambda has {} entries for {} records",
                self.lambda.len(),
                data.total()
            ));
        }
        let nl = self.s.len();
        if let Some(l) = self.lambda.iter().find(|&&l| l as usize >= nl) {
            return Err(format!("latent index {l} out of range (N = {nl})"));
        }
        if !(self.sigma2 > 0.0 && self.sigma2 <= priors.b_sigma) {
            return Err(format!(
                "sigma2 = {} outside (0, {}]",
                self.sigma2, priors.b_sigma
            ));
        }
        if self.theta[0] != 0.0 || self.t[0] != Point2::ORIGIN {
            return Err("first survey must stay anchored".into());
        }
        if self.theta[1].abs() >= priors.b_theta {
            return Err(format!(
                "theta = {} outside (-{b}, {b})",
                self.theta[1],
                b = priors.b_theta
            ));
        }
        if let Some(p) = self.s.iter().find(|p| !data.latent_domain.contains(p)) {
            return Err(format!(
                "latent ({}, {}) outside the latent domain",
                p.x, p.y
            ));
        }
        Ok(())
    }
}

/// Size of the latent population, `ceil(q * max(n1, n2))` capped at `n1 + n2`.
pub fn latent_count(n1: usize, n2: usize, q: f64) -> Result<usize> {
    if n1 + n2 == 0 {
        return Err(Error::EmptyInput);
    }
    assert!(q > 0.0, "q must be positive");
    let raw = (q * n1.max(n2) as f64 - 1e-9).ceil().max(1.0) as usize;
    Ok(raw.min(n1 + n2))
}

/// Starting state: latents seeded at a random subset of the observed
/// locations (topped up with uniform draws on the latent domain), each
/// record assigned to its nearest seed.
pub fn init_state<R: Rng + ?Sized>(
    data: &LinkageData,
    priors: &LinkagePriors,
    rng: &mut R,
) -> Result<LinkageState> {
    let n = data.total();
    let nl = latent_count(data.n[0], data.n[1], priors.q)?;
    let d = &data.latent_domain;
    let mut seeds: Vec<Point2> = sample(rng, n, nl.min(n))
        .into_iter()
        .map(|g| d.clamp(&data.locations[g]))
        .collect();
    while seeds.len() < nl {
        seeds.push(Point2::new(
            rng.random_range(d.xmin..=d.xmax),
            rng.random_range(d.ymin..=d.ymax),
        ));
    }
    let index = GridIndex::build(&seeds, 2.0);
    let lambda = data
        .locations
        .iter()
        .map(|y| index.nearest(y).expect("at least one latent") as u32)
        .collect();
    let median = inv_gamma_quantile(priors.c_sigma, priors.d_sigma, 0.5);
    Ok(LinkageState {
        lambda,
        s: seeds,
        sigma2: median.min(priors.b_sigma),
        theta: [0.0; 2],
        t: [Point2::ORIGIN; 2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::spatial::Domain;

    #[test]
    fn latent_count_examples() {
        assert_eq!(latent_count(100, 110, 1.25).unwrap(), 138);
        assert_eq!(latent_count(50, 50, 1.0).unwrap(), 50);
        assert_eq!(latent_count(10, 10, 3.0).unwrap(), 20);
        assert!(matches!(latent_count(0, 0, 1.25), Err(Error::EmptyInput)));
    }

    #[test]
    fn single_record_links_to_only_latent() {
        let data = LinkageData::from_locations(
            vec![Point2::new(5.0, 5.0)],
            [1, 0],
            Domain::square(0.0, 10.0),
            1.0,
        );
        let st = init_state(&data, &LinkagePriors::default(), &mut rng_from_seed(0)).unwrap();
        assert_eq!(st.lambda, vec![0]);
    }
}
