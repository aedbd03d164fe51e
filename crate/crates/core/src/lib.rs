//! Spatiotemporal environmental knowledge base with proactive,
//! retrieval-augmented trajectory prediction.
//!
//! Modules, bottom-up:
//! - [`store`]: indexed record tables with radius/window retrieval and snapshots.
//! - [`ingest`]: unit normalization, gap filling, dedup, alignment, modality fusion, CSV loading.
//! - [`query`]: constrained natural-language queries → typed IR → SQL, plus a SQL validator/interpreter.
//! - [`verbalize`]: deterministic sentences for retrieved rows.
//! - [`rag`]: perception snapshots, prompt assembly, LLM endpoints, the proactive cycle.
//! - [`eval`]: ADE/FDE, scenario enumeration, baseline-vs-retrieval experiments, reports.
//! - [`config`]: TOML run configuration.
//! - [`api`]: request handling shared by the command line and the HTTP service.

pub mod api;
pub mod config;
pub mod eval;
pub mod geom;
pub mod ingest;
pub mod query;
pub mod rag;
pub mod store;
pub mod time;
pub mod verbalize;

pub use geom::Point;
pub use time::Timestamp;
