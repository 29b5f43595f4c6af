use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::{Domain, Point2};

/// One observed individual: a crown location and its canopy volume (m³).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: u64,
    pub location: Point2,
    pub volume: f64,
}

/// The records of a single survey.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordFile {
    /// 1 for the earlier survey, 2 for the later one.
    pub file_index: u8,
    pub year: i32,
    pub records: Vec<Record>,
}

impl RecordFile {
    pub fn new(file_index: u8, year: i32, records: Vec<Record>) -> Self {
        Self {
            file_index,
            year,
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn locations(&self) -> impl Iterator<Item = Point2> + '_ {
        self.records.iter().map(|r| r.location)
    }

    /// Checks positive volumes, finite coordinates and unique ids, plus
    /// containment in `domain` when one is given.
    pub fn validate(&self, domain: Option<&Domain>) -> Result<()> {
        if self.file_index != 1 && self.file_index != 2 {
            return Err(Error::Validation {
                row: None,
                message: format!("file index must be 1 or 2, got {}", self.file_index),
            });
        }
        let mut ids: Vec<u64> = self.records.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Validation {
                row: None,
                message: format!("duplicate record id {} in file {}", w[0], self.file_index),
            });
        }
        for r in &self.records {
            if !(r.volume > 0.0) || !r.volume.is_finite() {
                return Err(Error::Validation {
                    row: None,
                    message: format!(
                        "record {} in file {} has volume {}",
                        r.id, self.file_index, r.volume
                    ),
                });
            }
            if !r.location.is_finite() {
                return Err(Error::Validation {
                    row: None,
                    message: format!(
                        "record {} in file {} has a non-finite location",
                        r.id, self.file_index
                    ),
                });
            }
            if let Some(d) = domain {
                if !d.contains(&r.location) {
                    return Err(Error::Validation {
                        row: None,
                        message: format!(
                            "record {} in file {} lies outside the domain",
                            r.id, self.file_index
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Addresses a record by (file slot, position within file); file slot 0 is
/// the earlier survey.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordRef {
    pub file: usize,
    pub index: usize,
}

/// Flattened view over the two files: global record `g` is file 0's
/// records followed by file 1's.
#[derive(Debug, Clone, Copy)]
pub struct FilePair<'a> {
    pub files: [&'a RecordFile; 2],
}

impl<'a> FilePair<'a> {
    pub fn new(first: &'a RecordFile, second: &'a RecordFile) -> Self {
        Self {
            files: [first, second],
        }
    }

    pub fn total(&self) -> usize {
        self.files[0].len() + self.files[1].len()
    }

    pub fn global(&self, r: RecordRef) -> usize {
        if r.file == 0 {
            r.index
        } else {
            self.files[0].len() + r.index
        }
    }

    pub fn local(&self, g: usize) -> RecordRef {
        let n1 = self.files[0].len();
        if g < n1 {
            RecordRef { file: 0, index: g }
        } else {
            RecordRef {
                file: 1,
                index: g - n1,
            }
        }
    }

    pub fn record(&self, r: RecordRef) -> &'a Record {
        &self.files[r.file].records[r.index]
    }

    pub fn years_span(&self) -> f64 {
        f64::from(self.files[1].year - self.files[0].year)
    }
}
