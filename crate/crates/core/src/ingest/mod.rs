//! Turning raw feeds into store records: unit normalization, gap filling,
//! dedup and anomaly correction, time alignment, modality fusion, CSV loading.

pub mod align;
pub mod csv;
pub mod fusion;
pub mod rows;
pub mod series;
pub mod units;

use thiserror::Error;

pub use align::{align_spatiotemporal, default_tolerance_ms, nearest_grid_index, Aligned};
pub use csv::{ingest_csv, ingest_csv_reader, ColumnMapping, CsvKind, IngestReport, RejectedRow};
pub use fusion::{
    check_stage_order, default_stages, median3, min_max, resample, run_fusion_pipeline, FusedRepresentation, Modality,
    ModalityStream, PipelineStage,
};
pub use rows::{
    dedup_and_correct, normalize_structured, Anomaly, CorrectedRow, CorrectionConfig, Quantity, RawStructuredRow,
    Source,
};
pub use series::{interpolate_missing, FilledPoint};
pub use units::{Unit, UnknownUnit};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    UnknownUnit(#[from] UnknownUnit),
    #[error("non-finite value in {0}")]
    NonFiniteValue(String),
    #[error("every value in the series is missing")]
    AllMissing,
    #[error("samples are not time-ordered")]
    NotTimeOrdered,
    #[error("reference grid is empty")]
    EmptyGrid,
    #[error("reference grid is not strictly increasing")]
    GridNotIncreasing,
    #[error("modality array is empty")]
    EmptyArray,
    #[error("stage order violation: {0}")]
    StageOrderViolation(String),
    #[error("the two streams share no timestamp")]
    NoOverlappingTimestamps,
    #[error("schema mismatch at line {line}: {detail}")]
    SchemaMismatch { line: u64, detail: String },
    #[error("mapping config: {0}")]
    Mapping(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
