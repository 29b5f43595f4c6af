use serde::{Deserialize, Serialize};

use crate::records::RecordFile;
use crate::spatial::GridIndex;

/// Neighborhood competition measures of one record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompetitionMetrics {
    /// Nearest-neighbor distance over mean neighbor distance. `None` when
    /// the record has no neighbors.
    pub rsi: Option<f64>,
    /// Summed volume of larger neighbors (m³).
    pub lnv: f64,
    /// Neighbors per m².
    pub nd: f64,
}

/// Metrics for every record of `file` using neighbors strictly within
/// `radius` meters.
pub fn competition_metrics(file: &RecordFile, radius: f64) -> Vec<CompetitionMetrics> {
    assert!(radius > 0.0, "radius must be positive");
    let locs: Vec<_> = file.locations().collect();
    let index = GridIndex::build(&locs, radius);
    let area = std::f64::consts::PI * radius * radius;
    let mut buf = Vec::new();
    file.records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            index.query_box_into(&rec.location, radius, &mut buf);
            let (mut count, mut sum_d, mut min_d, mut lnv) = (0usize, 0.0, f64::INFINITY, 0.0);
            for &j in buf.iter().filter(|&&j| j != i) {
                let other = &file.records[j];
                let d = rec.location.dist(&other.location);
                if d >= radius {
                    continue;
                }
                count += 1;
                sum_d += d;
                min_d = min_d.min(d);
                if other.volume > rec.volume {
                    lnv += other.volume;
                }
            }
            CompetitionMetrics {
                rsi: (count > 0).then(|| min_d / (sum_d / count as f64)),
                lnv,
                nd: count as f64 / area,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::Record;
    use crate::spatial::Point2;

    fn rec(id: u64, x: f64, y: f64, v: f64) -> Record {
        Record {
            id,
            location: Point2::new(x, y),
            volume: v,
        }
    }

    #[test]
    fn hand_values() {
        let f = RecordFile::new(
            1,
            2015,
            vec![
                rec(1, 50.0, 50.0, 10.0),
                rec(2, 53.0, 50.0, 5.0),
                rec(3, 50.0, 56.0, 12.0),
                rec(4, 41.0, 50.0, 20.0),
                rec(5, 80.0, 80.0, 1.0),
            ],
        );
        let m = competition_metrics(&f, 15.0);
        assert_eq!(m[0].lnv, 32.0);
        assert!((m[0].nd - 3.0 / (225.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert!((m[0].rsi.unwrap() - 3.0 / 6.0).abs() < 1e-12);
        assert_eq!(m[4].rsi, None);
        assert_eq!(m[4].nd, 0.0);
    }

    #[test]
    fn single_neighbor_ratio_is_one() {
        let f = RecordFile::new(1, 2015, vec![rec(1, 0.0, 0.0, 1.0), rec(2, 3.0, 4.0, 1.0)]);
        let m = competition_metrics(&f, 15.0);
        assert_eq!(m[0].rsi, Some(1.0));
    }

    #[test]
    fn neighbor_on_radius_excluded() {
        let f = RecordFile::new(1, 2015, vec![rec(1, 0.0, 0.0, 1.0), rec(2, 15.0, 0.0, 1.0)]);
        assert_eq!(competition_metrics(&f, 15.0)[0].rsi, None);
    }
}
