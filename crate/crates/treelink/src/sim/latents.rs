use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Beta, Cauchy, Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SimConfig;
use crate::error::{Error, Result};
use crate::growth::{sample_raster, Raster};
use crate::spatial::{Domain, Point2};

/// A true individual and its size at the first survey.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentPoint {
    pub location: Point2,
    /// Volume at the first survey (m³).
    pub mark: f64,
}

const MAX_CONSECUTIVE_REJECTIONS: usize = 1_000_000;

/// Bucket grid over the simulation square for inhibition checks.
struct Buckets {
    cell: f64,
    n: usize,
    origin: f64,
    cells: Vec<Vec<Point2>>,
}

impl Buckets {
    fn new(area: &Domain, cell: f64) -> Self {
        let cell = cell.max(area.width() / 512.0);
        let n = (area.width() / cell).ceil() as usize + 1;
        Self {
            cell,
            n,
            origin: area.xmin,
            cells: vec![Vec::new(); n * n],
        }
    }

    fn key(&self, v: f64) -> usize {
        (((v - self.origin) / self.cell).floor().max(0.0) as usize).min(self.n - 1)
    }

    fn insert(&mut self, p: Point2) {
        let (i, j) = (self.key(p.x), self.key(p.y));
        self.cells[j * self.n + i].push(p);
    }

    fn any_within(&self, p: &Point2, r: f64) -> bool {
        let (i, j) = (self.key(p.x), self.key(p.y));
        let r2 = r * r;
        for jj in j.saturating_sub(1)..=(j + 1).min(self.n - 1) {
            for ii in i.saturating_sub(1)..=(i + 1).min(self.n - 1) {
                if self.cells[jj * self.n + ii].iter().any(|q| q.dist2(p) < r2) {
                    return true;
                }
            }
        }
        false
    }
}

/// Sequential soft-core inhibition over the simulation square, with
/// log-normal marks whose log-mean shifts with the first covariates.
pub fn generate_latents<R: Rng + ?Sized>(
    config: &SimConfig,
    covariates: &[Raster],
    rng: &mut R,
) -> Result<Vec<LatentPoint>> {
    let area = config.area();
    let target = (config.density * area.area()).ceil() as usize;
    let mut buckets = Buckets::new(&area, config.hardcore_radius.max(1e-6));
    let mut points = Vec::with_capacity(target);
    let mut rejections = 0usize;
    while points.len() < target {
        let p = Point2::new(
            rng.random_range(area.xmin..area.xmax),
            rng.random_range(area.ymin..area.ymax),
        );
        let close = config.hardcore_radius > 0.0 && buckets.any_within(&p, config.hardcore_radius);
        if close && rng.random::<f64>() >= config.softcore_violation_prob {
            rejections += 1;
            if rejections >= MAX_CONSECUTIVE_REJECTIONS {
                return Err(Error::PackingInfeasible(points.len()));
            }
            continue;
        }
        rejections = 0;
        buckets.insert(p);
        points.push(p);
    }
    let noise = Normal::new(0.0, config.mark_log_sd).map_err(|e| Error::Config(e.to_string()))?;
    points
        .into_iter()
        .map(|p| {
            let mut log_mean = config.mark_log_median;
            for (coef, r) in config.mark_covariate_effects.iter().zip(covariates) {
                log_mean += coef * sample_raster(r, &p)?;
            }
            Ok(LatentPoint {
                location: p,
                mark: (log_mean + noise.sample(rng)).exp(),
            })
        })
        .collect()
}

/// Offspring placed around size-weighted parents with Cauchy offsets.
/// Returns the recruits and the index of each one's parent.
pub fn generate_recruits<R: Rng + ?Sized>(
    latents: &[LatentPoint],
    config: &SimConfig,
    rng: &mut R,
) -> (Vec<LatentPoint>, Vec<usize>) {
    assert!(!latents.is_empty(), "recruits need parents");
    let total: f64 = latents.iter().map(|l| l.mark).sum();
    let count = (config.recruit_rate * total).round() as usize;
    if count == 0 {
        return (Vec::new(), Vec::new());
    }
    let weights = WeightedIndex::new(latents.iter().map(|l| l.mark)).expect("positive marks");
    let offset = Cauchy::new(0.0, config.recruit_offset_scale).expect("positive scale");
    let shrink = Beta::new(1.0, 8.0).expect("valid shape");
    let min_mark = latents.iter().map(|l| l.mark).fold(f64::INFINITY, f64::min);
    let area = config.area();
    let mut recruits = Vec::with_capacity(count);
    let mut parents = Vec::with_capacity(count);
    for _ in 0..count {
        let parent = weights.sample(rng);
        let at = latents[parent].location;
        let location = loop {
            let q = Point2::new(at.x + offset.sample(rng), at.y + offset.sample(rng));
            if area.contains(&q) {
                break q;
            }
        };
        let mark = min_mark * shrink.sample(rng);
        recruits.push(LatentPoint { location, mark });
        parents.push(parent);
    }
    (recruits, parents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn small() -> SimConfig {
        SimConfig {
            domain_side: 40.0,
            window_side: 30.0,
            ..SimConfig::default()
        }
    }

    #[test]
    fn exact_count_and_hard_core() {
        let cfg = SimConfig {
            softcore_violation_prob: 0.0,
            ..small()
        };
        let pts = generate_latents(&cfg, &[], &mut rng_from_seed(1)).unwrap();
        assert_eq!(pts.len(), (cfg.density * 1600.0f64).ceil() as usize);
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                assert!(a.location.dist(&b.location) >= cfg.hardcore_radius);
            }
        }
    }

    #[test]
    fn overpacked_fails() {
        let cfg = SimConfig {
            density: 1.0,
            hardcore_radius: 3.0,
            softcore_violation_prob: 0.0,
            ..small()
        };
        assert!(matches!(
            generate_latents(&cfg, &[], &mut rng_from_seed(1)),
            Err(Error::PackingInfeasible(_))
        ));
    }

    #[test]
    fn no_recruits_at_zero_rate() {
        let cfg = SimConfig {
            recruit_rate: 0.0,
            ..small()
        };
        let pts = generate_latents(&cfg, &[], &mut rng_from_seed(2)).unwrap();
        assert!(generate_recruits(&pts, &cfg, &mut rng_from_seed(3)).0.is_empty());
    }

    #[test]
    fn recruits_smaller_than_every_parent() {
        let cfg = small();
        let pts = generate_latents(&cfg, &[], &mut rng_from_seed(2)).unwrap();
        let min = pts.iter().map(|p| p.mark).fold(f64::INFINITY, f64::min);
        let (rec, _) = generate_recruits(&pts, &cfg, &mut rng_from_seed(3));
        assert!(!rec.is_empty());
        assert!(rec.iter().all(|r| r.mark < min && cfg.area().contains(&r.location)));
    }
}
