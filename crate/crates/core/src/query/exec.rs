//! Index-backed execution of a bound IR against the store.

use serde_json::{Map, Value as Json};

use crate::store::{EntityRecord, KnowledgeStore};
use crate::time::Timestamp;

use super::ir::{EntityFilter, EntityRef, PointRef, QueryIr, SpatialFilter, TemporalFilter, TimeRef};
use super::QueryError;

fn window(t: &TemporalFilter) -> Result<(Timestamp, Timestamp), QueryError> {
    match *t {
        TemporalFilter::None => Ok((Timestamp::MIN, Timestamp::MAX)),
        TemporalFilter::Instant(TimeRef::At(ts)) => Ok((ts, ts)),
        TemporalFilter::Instant(TimeRef::Current) => Err(QueryError::Unbound("current_time".into())),
        TemporalFilter::Window { start, end } => Ok((start, end)),
    }
}

/// Rows matching `ir`, in result order `(timestamp, entity, key)`.
pub fn execute<'a>(ir: &QueryIr, store: &'a KnowledgeStore) -> Result<Vec<&'a EntityRecord>, QueryError> {
    ir.validate()?;
    if let Some(name) = ir.unbound().first() {
        return Err(QueryError::Unbound((*name).to_string()));
    }
    let (t0, t1) = window(&ir.temporal)?;
    let mut rows = match ir.spatial {
        SpatialFilter::None => store.query_window(ir.table, t0, t1),
        SpatialFilter::Radius { center: PointRef::At(c), radius } => store.query_radius(ir.table, c, radius, t0, t1)?,
        SpatialFilter::PointEqual(PointRef::At(c)) => store
            .query_radius(ir.table, c, 0.0, t0, t1)?
            .into_iter()
            .filter(|r| r.position().is_some_and(|p| p.x == c.x && p.y == c.y))
            .collect(),
        _ => return Err(QueryError::Unbound("current_position".into())),
    };
    match &ir.entity_filter {
        EntityFilter::None => {}
        EntityFilter::Equals(EntityRef::Id(id)) => rows.retain(|r| r.entity_id() == id),
        EntityFilter::Exclude(EntityRef::Id(id)) => rows.retain(|r| r.entity_id() != id),
        _ => return Err(QueryError::Unbound("ego_id".into())),
    }
    if let Some(n) = ir.limit {
        rows.truncate(n as usize);
    }
    Ok(rows)
}

/// Project rows onto `columns` as JSON objects.
pub fn project<S: AsRef<str>>(rows: &[&EntityRecord], columns: &[S]) -> Vec<Json> {
    rows.iter()
        .map(|r| {
            let mut m = Map::new();
            for c in columns {
                let c = c.as_ref();
                let v = r.field(c).map(|v| v.to_json()).unwrap_or(Json::Null);
                m.insert(c.to_string(), v);
            }
            Json::Object(m)
        })
        .collect()
}
