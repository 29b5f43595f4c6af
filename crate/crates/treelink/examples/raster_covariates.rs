//! Builds covariate rasters, round-trips them through the ASCII grid
//! format, standardizes them over the analysis window and samples them at
//! tree locations. Competition metrics come from the trees themselves.

use treelink::growth::{competition_metrics, sample_raster, standardize_covariates, Raster};
use treelink::records::{Record, RecordFile};
use treelink::{Domain, Point2};

fn main() -> treelink::Result<()> {
    // elevation-like ramp and a bump, 2 m cells over a 40 m square
    let (ncols, nrows, cell) = (20, 20, 2.0);
    let mut ramp = Vec::new();
    let mut bump = Vec::new();
    for row in 0..nrows {
        for col in 0..ncols {
            let x = (col as f64 + 0.5) * cell;
            let y = (nrows as f64 - row as f64 - 0.5) * cell;
            ramp.push(2400.0 + 0.8 * x + 0.3 * y);
            bump.push((-((x - 20.0).powi(2) + (y - 20.0).powi(2)) / 100.0).exp());
        }
    }
    let rasters = vec![
        Raster::new(ncols, nrows, 0.0, 0.0, cell, ramp)?,
        Raster::new(ncols, nrows, 0.0, 0.0, cell, bump)?,
    ];

    let path = std::env::temp_dir().join("treelink-ramp.asc");
    rasters[0].write(&path)?;
    let back = Raster::read(&path)?;
    assert_eq!(back, rasters[0]);
    println!("{}", back.to_ascii().lines().take(6).collect::<Vec<_>>().join("\n"));

    let window = Domain::new(5.0, 5.0, 35.0, 35.0);
    let (standardized, scales) = standardize_covariates(&rasters, &window)?;
    for (k, s) in scales.iter().enumerate() {
        println!("covariate {k}: mean {:.3} sd {:.3}", s.mean, s.sd);
    }

    let trees = RecordFile::new(
        1,
        2015,
        [(10.0, 10.0, 30.0), (12.0, 11.0, 5.0), (20.0, 20.0, 60.0), (22.5, 19.0, 12.0), (30.0, 28.0, 8.0)]
            .iter()
            .enumerate()
            .map(|(i, &(x, y, v))| Record {
                id: i as u64 + 1,
                location: Point2::new(x, y),
                volume: v,
            })
            .collect(),
    );
    let comp = competition_metrics(&trees, 6.0);
    println!("tree  z_ramp  z_bump    RSI     LNV     ND");
    for (r, c) in trees.records.iter().zip(&comp) {
        let z: Vec<f64> = standardized
            .iter()
            .map(|s| sample_raster(s, &r.location))
            .collect::<treelink::Result<_>>()?;
        let rsi = c.rsi.map_or("   -  ".into(), |v| format!("{v:6.2}"));
        println!("{:4}  {:6.2}  {:6.2}  {rsi}  {:6.1}  {:.4}", r.id, z[0], z[1], c.lnv, c.nd);
    }
    Ok(())
}
