//! IR → SQL text.
//!
//! The default profile targets the real schema and yields statements the
//! bundled interpreter can execute. Deferred references become named
//! parameters (`:current_x`, `:current_y`, `:current_time`, `:ego_id`).
//!
//! The compatibility profile reproduces the illustrative form used in
//! early documentation of the system: `traffic_signals` is aliased
//! `traffic_data`, `state` is `signal_status`, and deferred position/time
//! references render as the pseudo-literals `location = 'current_position'`
//! and `time = 'current_time'`.

use serde::{Deserialize, Serialize};

use crate::store::Table;

use super::ir::{EntityFilter, EntityRef, PointRef, Projection, QueryIr, SpatialFilter, TemporalFilter, TimeRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Default,
    Compat,
}

/// A single rendered SELECT statement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SqlText(pub String);

impl SqlText {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for SqlText {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Collapse whitespace runs to one space, drop spaces before `;` and trim.
/// Golden SQL comparisons are made on this form.
pub fn normalize_whitespace(sql: &str) -> String {
    sql.split_whitespace().collect::<Vec<_>>().join(" ").replace(" ;", ";")
}

/// Shortest round-trip decimal; negatives parenthesized so `x-(-5)` never
/// forms a `--` comment.
pub fn number_literal(v: f64) -> String {
    if v.is_sign_negative() && v != 0.0 {
        format!("({v})")
    } else if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

pub fn string_literal(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

fn table_name(table: Table, profile: Profile) -> &'static str {
    match (profile, table) {
        (Profile::Compat, Table::TrafficSignals) => "traffic_data",
        _ => table.name(),
    }
}

fn column_name(table: Table, column: &str, profile: Profile) -> String {
    match (profile, table, column) {
        (Profile::Compat, Table::TrafficSignals, "state") => "signal_status".into(),
        (Profile::Compat, Table::TrafficSignals, "timestamp") => "time".into(),
        _ => column.to_string(),
    }
}

pub fn render_sql(ir: &QueryIr) -> SqlText {
    render_sql_with(ir, Profile::Default)
}

pub fn render_sql_with(ir: &QueryIr, profile: Profile) -> SqlText {
    let t = ir.table;
    let select = match &ir.projection {
        Projection::All => "*".to_string(),
        Projection::Fields(f) => f.iter().map(|c| column_name(t, c, profile)).collect::<Vec<_>>().join(", "),
    };
    let mut preds: Vec<String> = Vec::new();

    if let Some((xc, yc)) = t.position_columns() {
        let (xc, yc) = (column_name(t, xc, profile), column_name(t, yc, profile));
        let coords = |p: PointRef| match p {
            PointRef::At(p) => (number_literal(p.x), number_literal(p.y)),
            PointRef::Current => (":current_x".to_string(), ":current_y".to_string()),
        };
        match ir.spatial {
            SpatialFilter::None => {}
            SpatialFilter::PointEqual(PointRef::Current) | SpatialFilter::Radius { center: PointRef::Current, .. }
                if profile == Profile::Compat =>
            {
                preds.push("location = 'current_position'".into())
            }
            SpatialFilter::PointEqual(p) => {
                let (cx, cy) = coords(p);
                preds.push(format!("{xc} = {cx}"));
                preds.push(format!("{yc} = {cy}"));
            }
            SpatialFilter::Radius { center, radius } => {
                let (cx, cy) = coords(center);
                let r = number_literal(radius);
                preds.push(format!("({xc}-{cx})*({xc}-{cx})+({yc}-{cy})*({yc}-{cy}) <= {r}*{r}"));
            }
        }
    }

    if let Some(tc) = t.time_column() {
        let tc = column_name(t, tc, profile);
        match ir.temporal {
            TemporalFilter::None => {}
            TemporalFilter::Instant(TimeRef::Current) if profile == Profile::Compat => {
                preds.push("time = 'current_time'".into())
            }
            TemporalFilter::Instant(TimeRef::Current) => preds.push(format!("{tc} = :current_time")),
            TemporalFilter::Instant(TimeRef::At(ts)) => {
                preds.push(format!("{tc} = {}", string_literal(&ts.to_string())))
            }
            TemporalFilter::Window { start, end } => {
                preds.push(format!("{tc} >= {}", string_literal(&start.to_string())));
                preds.push(format!("{tc} <= {}", string_literal(&end.to_string())));
            }
        }
    }

    let ec = column_name(t, t.entity_column(), profile);
    let entity = |r: &EntityRef| match r {
        EntityRef::Id(id) => string_literal(id),
        EntityRef::Ego => ":ego_id".to_string(),
    };
    match &ir.entity_filter {
        EntityFilter::None => {}
        EntityFilter::Equals(r) => preds.push(format!("{ec} = {}", entity(r))),
        EntityFilter::Exclude(r) => preds.push(format!("{ec} <> {}", entity(r))),
    }

    let mut sql = format!("SELECT {select} FROM {}", table_name(t, profile));
    if !preds.is_empty() {
        sql.push_str(" WHERE ");
        sql.push_str(&preds.join(" AND "));
    }
    if profile == Profile::Default {
        let order: Vec<String> = t
            .time_column()
            .into_iter()
            .map(str::to_string)
            .chain(std::iter::once(t.entity_column().to_string()))
            .collect();
        sql.push_str(" ORDER BY ");
        sql.push_str(&order.join(", "));
    }
    if let Some(n) = ir.limit {
        sql.push_str(&format!(" LIMIT {n}"));
    }
    sql.push(';');
    SqlText(sql)
}
