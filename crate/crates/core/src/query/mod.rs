//! Natural-language queries, typed IR, SQL rendering and execution.

pub mod exec;
pub mod ir;
pub mod parser;
pub mod render;
pub mod sql;

use thiserror::Error;

use crate::store::{StoreError, Table};

pub use exec::{execute, project};
pub use ir::{
    EntityFilter, EntityRef, PointRef, Projection, QueryContext, QueryIr, SpatialFilter, TemporalFilter, TimeRef,
};
pub use parser::{parse_query, parse_query_bytes, parse_query_with, ParserConfig};
pub use render::{normalize_whitespace, render_sql, render_sql_with, Profile, SqlText};
pub use sql::{execute_sql, parse_sql, validate_sql, SqlRows, Violation};

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("parse error at byte {position}: expected {}, found {found:?}", expected.join(" | "))]
    Parse { position: usize, expected: Vec<String>, found: String },
    #[error("unknown field {field} for table {table}")]
    UnknownField { table: Table, field: String },
    #[error("invalid query: {0}")]
    InvalidIr(String),
    #[error("unbound reference {0}")]
    Unbound(String),
    #[error("SQL rejected: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Rejected(Vec<Violation>),
    #[error(transparent)]
    Store(#[from] StoreError),
}
