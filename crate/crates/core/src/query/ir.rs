//! Typed intermediate representation between a natural-language query and SQL.

use serde::{Deserialize, Serialize};

use crate::geom::Point;
use crate::store::Table;
use crate::time::Timestamp;

use super::QueryError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    All,
    Fields(Vec<String>),
}

/// A position that is either given or deferred to the caller's context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointRef {
    At(Point),
    Current,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeRef {
    At(Timestamp),
    Current,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityRef {
    Id(String),
    Ego,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpatialFilter {
    #[default]
    None,
    PointEqual(PointRef),
    Radius {
        center: PointRef,
        radius: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TemporalFilter {
    #[default]
    None,
    Instant(TimeRef),
    Window {
        start: Timestamp,
        end: Timestamp,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EntityFilter {
    #[default]
    None,
    Equals(EntityRef),
    Exclude(EntityRef),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryIr {
    pub table: Table,
    pub projection: Projection,
    #[serde(default)]
    pub spatial: SpatialFilter,
    #[serde(default)]
    pub temporal: TemporalFilter,
    #[serde(default)]
    pub entity_filter: EntityFilter,
    #[serde(default)]
    pub limit: Option<u64>,
}

/// Values for the deferred references (`current position`, `my car`, ...).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QueryContext {
    pub ego_id: Option<String>,
    pub position: Option<Point>,
    pub time: Option<Timestamp>,
}

impl QueryIr {
    pub fn select_all(table: Table) -> Self {
        QueryIr {
            table,
            projection: Projection::All,
            spatial: SpatialFilter::None,
            temporal: TemporalFilter::None,
            entity_filter: EntityFilter::None,
            limit: None,
        }
    }

    /// Resolved column list for the projection.
    pub fn columns(&self) -> Vec<&str> {
        match &self.projection {
            Projection::All => self.table.columns().to_vec(),
            Projection::Fields(f) => f.iter().map(String::as_str).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        if let Projection::Fields(fields) = &self.projection {
            if fields.is_empty() {
                return Err(QueryError::InvalidIr("empty projection".into()));
            }
            for f in fields {
                if !self.table.has_column(f) {
                    return Err(QueryError::UnknownField { table: self.table, field: f.clone() });
                }
            }
        }
        match self.spatial {
            SpatialFilter::None => {}
            SpatialFilter::PointEqual(c) | SpatialFilter::Radius { center: c, .. } => {
                if !self.table.is_spatial() {
                    return Err(QueryError::InvalidIr(format!("{} has no position", self.table)));
                }
                if let PointRef::At(p) = c {
                    if !p.is_finite() {
                        return Err(QueryError::InvalidIr("non-finite coordinate".into()));
                    }
                }
            }
        }
        if let SpatialFilter::Radius { radius, .. } = self.spatial {
            if !(radius >= 0.0 && radius.is_finite()) {
                return Err(QueryError::InvalidIr(format!("radius {radius} must be finite and ≥ 0")));
            }
        }
        if let TemporalFilter::Window { start, end } = self.temporal {
            if start > end {
                return Err(QueryError::InvalidIr("time window is reversed".into()));
            }
        }
        if self.limit == Some(0) {
            return Err(QueryError::InvalidIr("limit must be positive".into()));
        }
        Ok(())
    }

    pub fn is_bound(&self) -> bool {
        self.unbound().is_empty()
    }

    /// Names of deferred references still present.
    pub fn unbound(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        match self.spatial {
            SpatialFilter::PointEqual(PointRef::Current) | SpatialFilter::Radius { center: PointRef::Current, .. } => {
                out.push("current_position")
            }
            _ => {}
        }
        if self.temporal == TemporalFilter::Instant(TimeRef::Current) {
            out.push("current_time");
        }
        match &self.entity_filter {
            EntityFilter::Equals(EntityRef::Ego) | EntityFilter::Exclude(EntityRef::Ego) => out.push("ego_id"),
            _ => {}
        }
        out
    }

    /// Substitute context values for deferred references. References the
    /// context cannot satisfy are an error.
    pub fn bind(&self, ctx: &QueryContext) -> Result<QueryIr, QueryError> {
        let mut ir = self.clone();
        let point = |p: PointRef| -> Result<PointRef, QueryError> {
            match p {
                PointRef::Current => {
                    ctx.position.map(PointRef::At).ok_or_else(|| QueryError::Unbound("current_position".into()))
                }
                other => Ok(other),
            }
        };
        ir.spatial = match ir.spatial {
            SpatialFilter::PointEqual(p) => SpatialFilter::PointEqual(point(p)?),
            SpatialFilter::Radius { center, radius } => SpatialFilter::Radius { center: point(center)?, radius },
            SpatialFilter::None => SpatialFilter::None,
        };
        if ir.temporal == TemporalFilter::Instant(TimeRef::Current) {
            let t = ctx.time.ok_or_else(|| QueryError::Unbound("current_time".into()))?;
            ir.temporal = TemporalFilter::Instant(TimeRef::At(t));
        }
        let ego = || ctx.ego_id.clone().ok_or_else(|| QueryError::Unbound("ego_id".into()));
        ir.entity_filter = match ir.entity_filter {
            EntityFilter::Equals(EntityRef::Ego) => EntityFilter::Equals(EntityRef::Id(ego()?)),
            EntityFilter::Exclude(EntityRef::Ego) => EntityFilter::Exclude(EntityRef::Id(ego()?)),
            other => other,
        };
        Ok(ir)
    }
}
