use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::{Domain, Point2};

/// Regular grid in ESRI ASCII layout: the first stored row is the top one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Raster {
    pub ncols: usize,
    pub nrows: usize,
    /// Lower-left corner (m).
    pub xll: f64,
    pub yll: f64,
    pub cellsize: f64,
    pub nodata: f64,
    pub values: Vec<f64>,
}

impl Raster {
    pub fn new(ncols: usize, nrows: usize, xll: f64, yll: f64, cellsize: f64, values: Vec<f64>) -> Result<Self> {
        let r = Self {
            ncols,
            nrows,
            xll,
            yll,
            cellsize,
            nodata: -9999.0,
            values,
        };
        r.check()?;
        Ok(r)
    }

    fn check(&self) -> Result<()> {
        if !(self.cellsize > 0.0) {
            return Err(Error::Config(format!("cellsize must be positive, got {}", self.cellsize)));
        }
        if self.ncols == 0 || self.nrows == 0 || self.values.len() != self.ncols * self.nrows {
            return Err(Error::Config(format!(
                "{} values for a {}x{} raster",
                self.values.len(),
                self.ncols,
                self.nrows
            )));
        }
        Ok(())
    }

    pub fn is_nodata(&self, v: f64) -> bool {
        v == self.nodata || v.is_nan()
    }

    pub fn extent(&self) -> Domain {
        Domain::new(
            self.xll,
            self.yll,
            self.xll + self.ncols as f64 * self.cellsize,
            self.yll + self.nrows as f64 * self.cellsize,
        )
    }

    /// Value at (row from top, column).
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.ncols + col]
    }

    /// Lower-left corner of the cell at (row from top, column).
    pub fn cell_origin(&self, row: usize, col: usize) -> Point2 {
        Point2::new(
            self.xll + col as f64 * self.cellsize,
            self.yll + (self.nrows - 1 - row) as f64 * self.cellsize,
        )
    }

    /// Row from top and column of the half-open cell holding `p`.
    pub fn cell_of(&self, p: &Point2) -> Option<(usize, usize)> {
        let cx = ((p.x - self.xll) / self.cellsize).floor();
        let cy = ((p.y - self.yll) / self.cellsize).floor();
        if !(cx >= 0.0 && cy >= 0.0 && cx < self.ncols as f64 && cy < self.nrows as f64) {
            return None;
        }
        Some((self.nrows - 1 - cy as usize, cx as usize))
    }

    pub fn to_ascii(&self) -> String {
        let mut s = String::new();
        writeln!(s, "ncols {}", self.ncols).unwrap();
        writeln!(s, "nrows {}", self.nrows).unwrap();
        writeln!(s, "xllcorner {}", self.xll).unwrap();
        writeln!(s, "yllcorner {}", self.yll).unwrap();
        writeln!(s, "cellsize {}", self.cellsize).unwrap();
        writeln!(s, "NODATA_value {}", self.nodata).unwrap();
        for row in self.values.chunks(self.ncols) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(s, "{}", line.join(" ")).unwrap();
        }
        s
    }

    pub fn from_ascii(text: &str, origin: &str) -> Result<Self> {
        let schema = |m: String| Error::Schema {
            path: origin.into(),
            message: m,
        };
        let mut lines = text.lines().enumerate();
        let mut header = [f64::NAN; 6];
        let keys = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"];
        for (k, key) in keys.iter().enumerate() {
            let (row, line) = lines
                .next()
                .ok_or_else(|| schema(format!("missing header line `{key}`")))?;
            let mut parts = line.split_whitespace();
            let name = parts.next().unwrap_or("").to_ascii_lowercase();
            if name != *key {
                return Err(schema(format!("expected `{key}` on line {}, found `{name}`", row + 1)));
            }
            header[k] = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse {
                    path: origin.into(),
                    row: row + 1,
                    message: format!("bad value for `{key}`"),
                })?;
        }
        let mut values = Vec::new();
        for (row, line) in lines {
            for tok in line.split_whitespace() {
                values.push(tok.parse::<f64>().map_err(|e| Error::Parse {
                    path: origin.into(),
                    row: row + 1,
                    message: format!("`{tok}`: {e}"),
                })?);
            }
        }
        let r = Self {
            ncols: header[0] as usize,
            nrows: header[1] as usize,
            xll: header[2],
            yll: header[3],
            cellsize: header[4],
            nodata: header[5],
            values,
        };
        r.check().map_err(|e| schema(e.to_string()))?;
        Ok(r)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_ascii(&std::fs::read_to_string(path)?, &path.display().to_string())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_ascii())?;
        Ok(())
    }
}

/// Value of the cell containing `p`.
pub fn sample_raster(r: &Raster, p: &Point2) -> Result<f64> {
    let (row, col) = r.cell_of(p).ok_or_else(|| Error::CovariateUnavailable {
        location: *p,
        reason: "outside raster extent".into(),
    })?;
    let v = r.get(row, col);
    if r.is_nodata(v) {
        return Err(Error::CovariateUnavailable {
            location: *p,
            reason: "no-data cell".into(),
        });
    }
    Ok(v)
}

/// Centering and scaling applied to one covariate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub sd: f64,
}

/// Centers and scales each raster by the mean and SD (n - 1 denominator)
/// of its valid cells that overlap `domain`.
pub fn standardize_covariates(
    rasters: &[Raster],
    domain: &Domain,
) -> Result<(Vec<Raster>, Vec<Standardization>)> {
    let mut out = Vec::with_capacity(rasters.len());
    let mut stats = Vec::with_capacity(rasters.len());
    for (k, r) in rasters.iter().enumerate() {
        let mut vals = Vec::new();
        for row in 0..r.nrows {
            for col in 0..r.ncols {
                let o = r.cell_origin(row, col);
                let overlaps = o.x < domain.xmax
                    && o.x + r.cellsize > domain.xmin
                    && o.y < domain.ymax
                    && o.y + r.cellsize > domain.ymin;
                let v = r.get(row, col);
                if overlaps && !r.is_nodata(v) {
                    vals.push(v);
                }
            }
        }
        if vals.len() < 2 {
            return Err(Error::DegenerateCovariate(format!(
                "covariate {k} has {} valid cells in the domain",
                vals.len()
            )));
        }
        let mean = crate::stats::mean(&vals);
        let sd = crate::stats::sd(&vals);
        if !(sd > 0.0) {
            return Err(Error::DegenerateCovariate(format!("covariate {k} is constant over the domain")));
        }
        let mut z = r.clone();
        for v in z.values.iter_mut() {
            if !r.is_nodata(*v) {
                *v = (*v - mean) / sd;
            }
        }
        out.push(z);
        stats.push(Standardization { mean, sd });
    }
    Ok((out, stats))
}
