//! Link and coverage metrics, file formats and run archives.

mod archive;
mod io;
mod metrics;
mod suite;

pub use archive::{
    timing_csv, timing_report, Dtype, RunArchive, TimingMeta, TimingRow, Trace, TraceData,
    ARCHIVE_SCHEMA_VERSION,
};
pub use io::{
    dense_labels, ingest_records, parse_records, read_dataset, read_truth, records_to_csv,
    truth_labels, truth_to_csv, write_dataset, write_records, write_truth, DatasetFiles,
    DatasetMeta,
};
pub use metrics::{
    eval_coverage, eval_links, eval_posterior_links, gaussian_truth, pairs_from_ndm,
    pairs_from_partition, CoverageResult, CoverageRow, LinkEvalResult, PairSet,
    PosteriorLinkEval, Spread,
};
pub use suite::{
    coverage_csv, coverage_tables, replicate_csv, run_replicate, ReplicateDesign,
    ReplicateResult, SuiteCell,
};
