use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::{GrowthParams, Raster, Standardization};
use crate::records::{Record, RecordFile};
use crate::sim::{Dataset, TruthLink};
use crate::spatial::{Domain, Point2};

const RECORD_COLUMNS: [&str; 6] = ["file_index", "record_id", "x", "y", "volume", "year"];
const TRUTH_COLUMNS: [&str; 3] = ["file_index", "record_id", "latent_id"];

fn column_positions(headers: &csv::StringRecord, wanted: &[&str], path: &Path) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|w| {
            headers
                .iter()
                .position(|h| h.trim() == *w)
                .ok_or_else(|| Error::Schema {
                    path: path.into(),
                    message: format!("missing column `{w}`"),
                })
        })
        .collect()
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, at: usize, name: &str, path: &Path, line: usize) -> Result<T> {
    let raw = row.get(at).unwrap_or("").trim();
    raw.parse().map_err(|_| Error::Parse {
        path: path.into(),
        row: line,
        message: format!("cannot read {name} from `{raw}`"),
    })
}

/// Parses two surveys from CSV text. Row numbers in errors count the
/// header as row 1.
pub fn parse_records(text: &str, path: &Path) -> Result<(RecordFile, RecordFile)> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let at = column_positions(&headers, &RECORD_COLUMNS, path)?;
    let mut files: BTreeMap<u8, (i32, Vec<Record>)> = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            path: path.into(),
            row: line,
            message: e.to_string(),
        })?;
        let file_index: u8 = field(&row, at[0], "file_index", path, line)?;
        let id: u64 = field(&row, at[1], "record_id", path, line)?;
        let x: f64 = field(&row, at[2], "x", path, line)?;
        let y: f64 = field(&row, at[3], "y", path, line)?;
        let volume: f64 = field(&row, at[4], "volume", path, line)?;
        let year: i32 = field(&row, at[5], "year", path, line)?;
        let invalid = |message: String| Error::Validation {
            row: Some(line),
            message,
        };
        if !(x.is_finite() && y.is_finite()) {
            return Err(invalid(format!("non-finite coordinates for record {id}")));
        }
        if !(volume > 0.0 && volume.is_finite()) {
            return Err(invalid(format!("volume must be positive, got {volume}")));
        }
        let entry = files.entry(file_index).or_insert((year, Vec::new()));
        if entry.0 != year {
            return Err(invalid(format!(
                "file {file_index} mixes years {} and {year}",
                entry.0
            )));
        }
        entry.1.push(Record {
            id,
            location: Point2::new(x, y),
            volume,
        });
    }
    if files.keys().copied().collect::<Vec<_>>() != [1, 2] {
        return Err(Error::Validation {
            row: None,
            message: format!(
                "expected file_index values 1 and 2, found {:?}",
                files.keys().collect::<Vec<_>>()
            ),
        });
    }
    let (y2, r2) = files.remove(&2).expect("checked");
    let (y1, r1) = files.remove(&1).expect("checked");
    let first = RecordFile::new(1, y1, r1);
    let second = RecordFile::new(2, y2, r2);
    first.validate(None)?;
    second.validate(None)?;
    if y2 <= y1 {
        return Err(Error::Validation {
            row: None,
            message: format!("second survey year {y2} does not follow {y1}"),
        });
    }
    Ok((first, second))
}

/// Reads two surveys from a CSV file with columns
/// `file_index,record_id,x,y,volume,year`.
pub fn ingest_records(path: &Path) -> Result<(RecordFile, RecordFile)> {
    let text = std::fs::read_to_string(path)?;
    parse_records(&text, path)
}

pub fn records_to_csv(first: &RecordFile, second: &RecordFile) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RECORD_COLUMNS)?;
    for f in [first, second] {
        for r in &f.records {
            w.write_record([
                f.file_index.to_string(),
                r.id.to_string(),
                r.location.x.to_string(),
                r.location.y.to_string(),
                r.volume.to_string(),
                f.year.to_string(),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf8"))
}

pub fn write_records(path: &Path, first: &RecordFile, second: &RecordFile) -> Result<()> {
    std::fs::write(path, records_to_csv(first, second)?)?;
    Ok(())
}

pub fn truth_to_csv(links: &[TruthLink]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRUTH_COLUMNS)?;
    for l in links {
        w.write_record([
            l.file_index.to_string(),
            l.record_id.to_string(),
            l.latent_id.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf8"))
}

pub fn write_truth(path: &Path, links: &[TruthLink]) -> Result<()> {
    std::fs::write(path, truth_to_csv(links)?)?;
    Ok(())
}

pub fn read_truth(path: &Path) -> Result<Vec<TruthLink>> {
    let text = std::fs::read_to_string(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let at = column_positions(&headers, &TRUTH_COLUMNS, path)?;
    reader
        .records()
        .enumerate()
        .map(|(i, row)| {
            let line = i + 2;
            let row = row.map_err(|e| Error::Parse {
                path: path.into(),
                row: line,
                message: e.to_string(),
            })?;
            Ok(TruthLink {
                file_index: field(&row, at[0], "file_index", path, line)?,
                record_id: field(&row, at[1], "record_id", path, line)?,
                latent_id: field(&row, at[2], "latent_id", path, line)?,
            })
        })
        .collect()
}

/// Truth labels for every record, first survey then second, in file order.
pub fn truth_labels(links: &[TruthLink], first: &RecordFile, second: &RecordFile) -> Result<Vec<u64>> {
    let map: std::collections::HashMap<(u8, u64), u64> = links
        .iter()
        .map(|l| ((l.file_index, l.record_id), l.latent_id))
        .collect();
    let mut out = Vec::with_capacity(first.len() + second.len());
    for f in [first, second] {
        for r in &f.records {
            out.push(*map.get(&(f.file_index, r.id)).ok_or_else(|| Error::Validation {
                row: None,
                message: format!("record {} of file {} is missing from the truth", r.id, f.file_index),
            })?);
        }
    }
    Ok(out)
}

/// Dense 0-based relabeling in order of first appearance.
pub fn dense_labels(labels: &[u64]) -> Vec<u32> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len() as u32;
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// Sidecar describing a simulated dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub domain: Domain,
    pub growth_params: GrowthParams,
    pub theta: f64,
    pub t: Point2,
    pub n_latents: usize,
    pub n_recruits: usize,
    pub standardization: Vec<Standardization>,
    /// Raster paths relative to the dataset directory.
    pub covariates: Vec<String>,
}

/// A dataset directory read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFiles {
    pub first: RecordFile,
    pub second: RecordFile,
    pub truth: Vec<TruthLink>,
    pub covariates: Vec<Raster>,
    pub meta: DatasetMeta,
}

/// Writes `records.csv`, `truth.csv`, `dataset.json` and one ASCII grid
/// per covariate under `covariates/`.
pub fn write_dataset(d: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir.join("covariates"))?;
    write_records(&dir.join("records.csv"), &d.first, &d.second)?;
    write_truth(&dir.join("truth.csv"), &d.truth.links)?;
    let mut names = Vec::new();
    for (k, r) in d.covariates.iter().enumerate() {
        let name = format!("covariates/z{}.asc", k + 1);
        r.write(&dir.join(&name))?;
        names.push(name);
    }
    let meta = DatasetMeta {
        domain: d.domain,
        growth_params: d.truth.growth_params.clone(),
        theta: d.truth.theta,
        t: d.truth.t,
        n_latents: d.truth.latents.len(),
        n_recruits: d.truth.recruits.len(),
        standardization: d.standardization.clone(),
        covariates: names,
    };
    let mut json = serde_json::to_vec_pretty(&meta)?;
    json.push(b'\n');
    std::fs::write(dir.join("dataset.json"), json)?;
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<DatasetFiles> {
    let meta: DatasetMeta = serde_json::from_slice(&std::fs::read(dir.join("dataset.json"))?)?;
    let (first, second) = ingest_records(&dir.join("records.csv"))?;
    let truth = read_truth(&dir.join("truth.csv"))?;
    let covariates = meta
        .covariates
        .iter()
        .map(|c| Raster::read(&dir.join(c)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DatasetFiles {
        first,
        second,
        truth,
        covariates,
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "file_index,record_id,x,y,volume,year\n\
        1,1,0.5,0.5,3.0,2015\n\
        1,2,4.0,1.0,2.5,2015\n\
        2,1,0.6,0.4,3.4,2019\n\
        2,2,4.1,1.1,2.9,2019\n";

    #[test]
    fn four_rows_two_files() {
        let (a, b) = parse_records(FIXTURE, Path::new("f.csv")).unwrap();
        assert_eq!((a.len(), b.len(), a.year, b.year), (2, 2, 2015, 2019));
    }

    #[test]
    fn negative_volume_names_row() {
        let bad = FIXTURE.replace("2,4.0,1.0,2.5", "2,4.0,1.0,-1");
        match parse_records(&bad, Path::new("f.csv")) {
            Err(Error::Validation { row: Some(3), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column() {
        let bad = FIXTURE.replace("volume", "vol");
        assert!(matches!(parse_records(&bad, Path::new("f.csv")), Err(Error::Schema { .. })));
    }

    #[test]
    fn malformed_number() {
        let bad = FIXTURE.replace("0.6,0.4", "zz,0.4");
        assert!(matches!(
            parse_records(&bad, Path::new("f.csv")),
            Err(Error::Parse { row: 4, .. })
        ));
    }
}
