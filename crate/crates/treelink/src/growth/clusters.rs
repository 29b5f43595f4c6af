use serde::{Deserialize, Serialize};

use crate::records::{FilePair, RecordRef};
use crate::spatial::{Domain, Point2};

/// Records sharing one latent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub latent: u32,
    pub members: Vec<RecordRef>,
}

impl Cluster {
    pub fn spans_both_files(&self) -> bool {
        self.members.iter().any(|r| r.file == 0) && self.members.iter().any(|r| r.file == 1)
    }
}

/// Groups records by latent index. `lambda` is indexed by global record
/// (first file, then second); clusters come back ordered by latent.
pub fn derive_clusters(lambda: &[u32], n_first: usize) -> Vec<Cluster> {
    let n_latent = lambda.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let mut members: Vec<Vec<RecordRef>> = vec![Vec::new(); n_latent];
    for (g, &l) in lambda.iter().enumerate() {
        let r = if g < n_first {
            RecordRef { file: 0, index: g }
        } else {
            RecordRef {
                file: 1,
                index: g - n_first,
            }
        };
        members[l as usize].push(r);
    }
    members
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(l, members)| Cluster {
            latent: l as u32,
            members,
        })
        .collect()
}

/// One growth observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthCluster {
    pub cluster_id: u32,
    /// Merged first-survey volume (m³).
    pub v_first: f64,
    /// Merged second-survey volume (m³).
    pub v_last: f64,
    pub years_span: f64,
    /// Annual growth (m³/yr).
    pub g: f64,
    pub latent_location: Point2,
    /// Covariate row with a leading 1. Empty until covariates are attached.
    pub covariates: Vec<f64>,
    pub members: Vec<RecordRef>,
}

impl GrowthCluster {
    /// Number of records merged within either survey beyond the first.
    pub fn merged_within_file(&self) -> [usize; 2] {
        let c = |f| self.members.iter().filter(|r| r.file == f).count();
        [c(0).saturating_sub(1), c(1).saturating_sub(1)]
    }
}

fn merged_volume(pair: &FilePair<'_>, members: &[RecordRef], file: usize) -> f64 {
    let mut v: Vec<f64> = members
        .iter()
        .filter(|r| r.file == file)
        .map(|&r| pair.record(r).volume)
        .collect();
    // summation order fixed so the result does not depend on record order
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Keeps clusters seen in both surveys whose merged volumes satisfy
/// `r1 * v_first < v_last < r2 * v_first`. `s` holds the latent locations.
pub fn derive_growth_clusters(
    partition: &[Cluster],
    pair: &FilePair<'_>,
    s: &[Point2],
    r1: f64,
    r2: f64,
) -> Vec<GrowthCluster> {
    assert!(0.0 < r1 && r1 < r2, "need 0 < r1 < r2");
    let years = pair.years_span();
    assert!(years > 0.0, "surveys must be in increasing year order");
    partition
        .iter()
        .filter(|c| c.spans_both_files())
        .filter_map(|c| {
            let v_first = merged_volume(pair, &c.members, 0);
            let v_last = merged_volume(pair, &c.members, 1);
            if !(r1 * v_first < v_last && v_last < r2 * v_first) {
                return None;
            }
            Some(GrowthCluster {
                cluster_id: c.latent,
                v_first,
                v_last,
                years_span: years,
                g: (v_last - v_first) / years,
                latent_location: s[c.latent as usize],
                covariates: Vec::new(),
                members: c.members.clone(),
            })
        })
        .collect()
}

/// Drops clusters whose latent location is within `buffer` of the edge of
/// `domain` (or outside it).
pub fn apply_boundary_buffer(
    clusters: Vec<GrowthCluster>,
    domain: &Domain,
    buffer: f64,
) -> Vec<GrowthCluster> {
    clusters
        .into_iter()
        .filter(|c| domain.distance_to_boundary(&c.latent_location) > buffer)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::{Record, RecordFile};

    fn file(idx: u8, year: i32, vols: &[f64]) -> RecordFile {
        RecordFile::new(
            idx,
            year,
            vols.iter()
                .enumerate()
                .map(|(i, &v)| Record {
                    id: i as u64 + 1,
                    location: Point2::new(50.0, 50.0),
                    volume: v,
                })
                .collect(),
        )
    }

    #[test]
    fn grouping() {
        let c = derive_clusters(&[0, 0, 1], 2);
        assert_eq!(c.len(), 2);
        assert_eq!(
            c[0].members,
            vec![RecordRef { file: 0, index: 0 }, RecordRef { file: 0, index: 1 }]
        );
        assert_eq!(c[1].members, vec![RecordRef { file: 1, index: 0 }]);
    }

    #[test]
    fn rate_bounds() {
        let f1 = file(1, 2015, &[10.0, 10.0]);
        let f2 = file(2, 2019, &[17.0, 12.0]);
        let pair = FilePair::new(&f1, &f2);
        let part = derive_clusters(&[0, 1, 0, 1], 2);
        let s = vec![Point2::new(50.0, 50.0); 2];
        let g = derive_growth_clusters(&part, &pair, &s, 0.9, 1.6);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].cluster_id, 1);
        assert_eq!(g[0].g, 0.5);
    }

    #[test]
    fn single_file_cluster_excluded() {
        let f1 = file(1, 2015, &[10.0]);
        let f2 = file(2, 2019, &[11.0]);
        let pair = FilePair::new(&f1, &f2);
        let part = derive_clusters(&[0, 1], 1);
        let s = vec![Point2::new(50.0, 50.0); 2];
        assert!(derive_growth_clusters(&part, &pair, &s, 0.9, 1.6).is_empty());
    }

    #[test]
    fn within_file_volumes_merge() {
        let f1 = file(1, 2015, &[4.0, 6.0]);
        let f2 = file(2, 2019, &[12.0]);
        let pair = FilePair::new(&f1, &f2);
        let part = derive_clusters(&[0, 0, 0], 2);
        let s = vec![Point2::new(50.0, 50.0)];
        let g = derive_growth_clusters(&part, &pair, &s, 0.9, 1.6);
        assert_eq!(g[0].v_first, 10.0);
        assert_eq!(g[0].merged_within_file(), [1, 0]);
    }

    #[test]
    fn buffer_excludes_edge_and_outside() {
        let mk = |x: f64| GrowthCluster {
            cluster_id: 0,
            v_first: 1.0,
            v_last: 1.1,
            years_span: 4.0,
            g: 0.025,
            latent_location: Point2::new(x, 50.0),
            covariates: vec![],
            members: vec![],
        };
        let d = Domain::square(0.0, 100.0);
        let kept = apply_boundary_buffer(vec![mk(15.0), mk(15.01), mk(-2.0), mk(50.0)], &d, 15.0);
        assert_eq!(kept.len(), 2);
    }
}
