//! Parser for the closed template grammar of natural-language queries.
//!
//! The grammar is documented in `docs/grammar.md`. Keywords are
//! case-insensitive; positions in errors are byte offsets into the input.

use std::sync::OnceLock;

use regex::Regex;

use crate::geom::Point;
use crate::store::Table;
use crate::time::Timestamp;

use super::ir::{EntityFilter, EntityRef, PointRef, Projection, QueryIr, SpatialFilter, TemporalFilter, TimeRef};
use super::QueryError;

#[derive(Debug, Clone, PartialEq)]
pub struct ParserConfig {
    /// Radius used by "around my car" and "the current road segment" when
    /// the sentence names no distance.
    pub default_radius: f64,
}

impl Default for ParserConfig {
    fn default() -> Self {
        ParserConfig { default_radius: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Number(f64),
    Time(Timestamp),
    Str(String),
    Comma,
    Period,
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn timestamp_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\d{4}-\d{2}-\d{2}(?:[ T]\d{2}:\d{2}(?::\d{2}(?:\.\d{1,9})?)?)?(?:Z|[+-]\d{2}:\d{2})?")
            .expect("valid regex")
    })
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[+-]?(?:\d+(?:\.\d+)?|\.\d+)(?:[eE][+-]?\d+)?").expect("valid regex"))
}

fn err(pos: usize, expected: &[&str], found: impl Into<String>) -> QueryError {
    QueryError::Parse { position: pos, expected: expected.iter().map(|s| s.to_string()).collect(), found: found.into() }
}

fn lex(text: &str) -> Result<Vec<Token>, QueryError> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = text[i..].chars().next().expect("in bounds");
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        let rest = &text[i..];
        let single = match c {
            ',' => Some(Tok::Comma),
            '.' if !rest[1..].starts_with(|d: char| d.is_ascii_digit()) => Some(Tok::Period),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, pos: i });
            i += 1;
            continue;
        }
        if c == '\'' || c == '"' {
            let close = rest[1..].find(c).ok_or_else(|| err(i, &["closing quote"], "end of input"))?;
            out.push(Token { tok: Tok::Str(rest[1..1 + close].to_string()), pos: i });
            i += close + 2;
            continue;
        }
        if c.is_ascii_digit() {
            if let Some(m) = timestamp_re().find(rest) {
                let t = Timestamp::parse(m.as_str()).map_err(|_| err(i, &["timestamp"], m.as_str()))?;
                out.push(Token { tok: Tok::Time(t), pos: i });
                i += m.end();
                continue;
            }
        }
        if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' {
            if let Some(m) = number_re().find(rest) {
                let v: f64 = m.as_str().parse().map_err(|_| err(i, &["number"], m.as_str()))?;
                out.push(Token { tok: Tok::Number(v), pos: i });
                i += m.end();
                continue;
            }
        }
        if c.is_alphabetic() || c == '_' {
            let end = rest
                .char_indices()
                .find(|&(_, ch)| !(ch.is_alphanumeric() || ch == '_' || ch == '-'))
                .map(|(j, _)| j)
                .unwrap_or(rest.len());
            out.push(Token { tok: Tok::Word(rest[..end].to_string()), pos: i });
            i += end;
            continue;
        }
        return Err(err(i, &["word", "number", "timestamp", "punctuation"], c.to_string()));
    }
    Ok(out)
}

const TABLE_NOUNS: &[(&[&str], Table)] = &[
    (&["traffic", "signals"], Table::TrafficSignals),
    (&["traffic", "signal"], Table::TrafficSignals),
    (&["traffic", "lights"], Table::TrafficSignals),
    (&["traffic", "light"], Table::TrafficSignals),
    (&["traffic", "signs"], Table::TrafficSigns),
    (&["traffic", "sign"], Table::TrafficSigns),
    (&["signal", "phases"], Table::Phases),
    (&["signal", "phase"], Table::Phases),
    (&["harmonized", "records"], Table::Harmonized),
    (&["harmonized", "record"], Table::Harmonized),
    (&["vehicles"], Table::Vehicles),
    (&["vehicle"], Table::Vehicles),
    (&["cars"], Table::Vehicles),
    (&["car"], Table::Vehicles),
    (&["pedestrians"], Table::Pedestrians),
    (&["pedestrian"], Table::Pedestrians),
    (&["weather"], Table::Weather),
    (&["signals"], Table::TrafficSignals),
    (&["signal"], Table::TrafficSignals),
    (&["signs"], Table::TrafficSigns),
    (&["sign"], Table::TrafficSigns),
    (&["intersections"], Table::Intersections),
    (&["intersection"], Table::Intersections),
    (&["phases"], Table::Phases),
    (&["phase"], Table::Phases),
];

const VERBS: &[&str] = &["retrieve", "provide", "get", "list", "show"];

/// Words that end a field list.
const FIELD_STOP: &[&str] = &["of", "for", "around", "within", "near", "at", "in", "limit"];

/// Expand a field word (or synonym) into columns of `table`.
fn resolve_field(table: Table, word: &str) -> Option<Vec<String>> {
    let w = word.to_ascii_lowercase();
    let pos = table.position_columns();
    let v = |cols: &[&str]| Some(cols.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    match w.as_str() {
        "location" | "position" | "coordinates" => pos.map(|(x, y)| vec![x.to_string(), y.to_string()]),
        "velocity" | "speed" if table.has_column("vx") => v(&["vx", "vy"]),
        "acceleration" if table.has_column("ax") => v(&["ax", "ay"]),
        "status" if table.has_column("state") => v(&["state"]),
        "time" => table.time_column().map(|c| vec![c.to_string()]),
        "id" | "identifier" => Some(vec![table.entity_column().to_string()]),
        _ if table.has_column(&w) => Some(vec![w]),
        _ => None,
    }
}

/// Fields as written, kept until the table is known.
#[derive(Debug)]
struct RawField {
    word: String,
}

struct Parser<'a> {
    toks: Vec<Token>,
    at: usize,
    end: usize,
    config: &'a ParserConfig,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.at + k).map(|t| &t.tok)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|t| t.pos).unwrap_or(self.end)
    }

    fn found(&self) -> String {
        match self.peek() {
            None => "end of input".into(),
            Some(Tok::Word(w)) => w.clone(),
            Some(Tok::Number(n)) => n.to_string(),
            Some(Tok::Time(t)) => t.to_string(),
            Some(Tok::Str(s)) => format!("'{s}'"),
            Some(Tok::Comma) => ",".into(),
            Some(Tok::Period) => ".".into(),
            Some(Tok::LParen) => "(".into(),
            Some(Tok::RParen) => ")".into(),
        }
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T, QueryError> {
        Err(err(self.pos(), expected, self.found()))
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(x)) if x.eq_ignore_ascii_case(w))
    }

    fn is_word_at(&self, k: usize, w: &str) -> bool {
        matches!(self.peek_at(k), Some(Tok::Word(x)) if x.eq_ignore_ascii_case(w))
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.is_word(w) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self, w: &'static str) -> Result<(), QueryError> {
        if self.eat_word(w) {
            Ok(())
        } else {
            self.fail(&[w])
        }
    }

    fn expect_words(&mut self, ws: &[&'static str]) -> Result<(), QueryError> {
        for w in ws {
            self.expect_word(w)?;
        }
        Ok(())
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Result<f64, QueryError> {
        match self.peek() {
            Some(Tok::Number(n)) => {
                let n = *n;
                self.at += 1;
                Ok(n)
            }
            _ => self.fail(&["number"]),
        }
    }

    fn timestamp(&mut self) -> Result<Timestamp, QueryError> {
        match self.peek() {
            Some(Tok::Time(t)) => {
                let t = *t;
                self.at += 1;
                Ok(t)
            }
            _ => self.fail(&["timestamp"]),
        }
    }

    fn coord(&mut self) -> Result<Point, QueryError> {
        if !self.eat(&Tok::LParen) {
            return self.fail(&["("]);
        }
        let x = self.number()?;
        if !self.eat(&Tok::Comma) {
            return self.fail(&[","]);
        }
        let y = self.number()?;
        if !self.eat(&Tok::RParen) {
            return self.fail(&[")"]);
        }
        Ok(Point::new(x, y))
    }

    fn table_noun(&mut self) -> Option<Table> {
        for (words, table) in TABLE_NOUNS {
            if words.iter().enumerate().all(|(k, w)| self.is_word_at(k, w)) {
                self.at += words.len();
                return Some(*table);
            }
        }
        None
    }

    /// `within R (m|meters)`; `within` already peeked.
    fn within(&mut self) -> Result<f64, QueryError> {
        self.expect_word("within")?;
        let r = self.number()?;
        if !(self.eat_word("m") || self.eat_word("meters") || self.eat_word("meter") || self.eat_word("metres")) {
            return self.fail(&["meters"]);
        }
        Ok(r)
    }

    fn at_end(&self) -> bool {
        self.at >= self.toks.len()
    }
}

#[derive(Default)]
struct Draft {
    table: Option<(Table, usize)>,
    fields: Vec<RawField>,
    all_fields: bool,
    ego_point: Option<Point>,
    spatial: SpatialFilter,
    temporal: Option<TemporalFilter>,
    entity: EntityFilter,
    limit: Option<u64>,
}

impl Draft {
    fn set_table(&mut self, t: Table, pos: usize) -> Result<(), QueryError> {
        match self.table {
            Some((prev, _)) if prev != t => Err(err(pos, &[prev.name()], t.name())),
            _ => {
                self.table = Some((t, pos));
                Ok(())
            }
        }
    }

    fn ego_center(&self) -> PointRef {
        self.ego_point.map(PointRef::At).unwrap_or(PointRef::Current)
    }
}

pub fn parse_query(text: &str) -> Result<QueryIr, QueryError> {
    parse_query_with(text, &ParserConfig::default())
}

/// Parse untrusted bytes. Invalid UTF-8 is a parse error at the first bad byte.
pub fn parse_query_bytes(bytes: &[u8], config: &ParserConfig) -> Result<QueryIr, QueryError> {
    match std::str::from_utf8(bytes) {
        Ok(s) => parse_query_with(s, config),
        Err(e) => Err(err(e.valid_up_to(), &["UTF-8 text"], "invalid byte")),
    }
}

pub fn parse_query_with(text: &str, config: &ParserConfig) -> Result<QueryIr, QueryError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, at: 0, end: text.len(), config };
    let mut d = Draft::default();

    if p.at_end() {
        return p.fail(&["query"]);
    }

    // [ time-clause "," ]
    if p.is_word("at") && p.is_word_at(1, "timestamp") {
        p.at += 2;
        d.temporal = Some(TemporalFilter::Instant(TimeRef::At(p.timestamp()?)));
        if !p.eat(&Tok::Comma) {
            return p.fail(&[","]);
        }
    } else if p.eat_word("between") {
        p.eat_word("timestamp");
        let start = p.timestamp()?;
        p.expect_word("and")?;
        let end_pos = p.pos();
        let end = p.timestamp()?;
        if start > end {
            return Err(err(end_pos, &["timestamp after window start"], end.to_string()));
        }
        d.temporal = Some(TemporalFilter::Window { start, end });
        if !p.eat(&Tok::Comma) {
            return p.fail(&[","]);
        }
    }

    // verb "the"
    if !VERBS.iter().any(|v| p.eat_word(v)) {
        return p.fail(&["at timestamp", "between", "retrieve", "provide", "get", "list", "show"]);
    }
    p.expect_word("the")?;

    let noun_pos = p.pos();
    if let Some(t) = p.table_noun() {
        d.set_table(t, noun_pos)?;
    }

    field_list(&mut p, &mut d)?;

    // [ "of" subject ]
    if p.eat_word("of") {
        subject(&mut p, &mut d)?;
    }

    // { scope }
    loop {
        if p.is_word("for") {
            p.at += 1;
            p.expect_words(&["the", "current", "road", "segment"])?;
            d.spatial = SpatialFilter::Radius { center: PointRef::Current, radius: p.config.default_radius };
        } else if p.is_word("around") && p.is_word_at(1, "my") {
            p.at += 1;
            p.expect_words(&["my", "car"])?;
            let r = if p.is_word("within") { p.within()? } else { p.config.default_radius };
            d.spatial = SpatialFilter::Radius { center: d.ego_center(), radius: r };
            d.entity = EntityFilter::Exclude(EntityRef::Ego);
        } else if p.is_word("around") || p.is_word("near") {
            p.at += 1;
            let c = p.coord()?;
            let r = if p.is_word("within") { p.within()? } else { p.config.default_radius };
            d.spatial = SpatialFilter::Radius { center: PointRef::At(c), radius: r };
        } else if p.is_word("within") {
            let r = p.within()?;
            p.expect_word("of")?;
            let center = if p.eat_word("my") {
                p.expect_word("car")?;
                d.entity = EntityFilter::Exclude(EntityRef::Ego);
                d.ego_center()
            } else if p.eat_word("the") {
                p.expect_words(&["current", "position"])?;
                PointRef::Current
            } else {
                PointRef::At(p.coord()?)
            };
            d.spatial = SpatialFilter::Radius { center, radius: r };
        } else if p.is_word("at") {
            p.at += 1;
            if p.eat_word("the") {
                p.expect_words(&["current", "position"])?;
                d.spatial = SpatialFilter::PointEqual(PointRef::Current);
            } else {
                d.spatial = SpatialFilter::PointEqual(PointRef::At(p.coord()?));
            }
        } else {
            break;
        }
    }

    limit(&mut p, &mut d)?;
    p.eat(&Tok::Period);

    // [ addition ]
    if p.is_word("in") {
        p.at += 1;
        p.expect_word("addition")?;
        if !p.eat(&Tok::Comma) {
            return p.fail(&[","]);
        }
        if !VERBS.iter().any(|v| p.eat_word(v)) {
            return p.fail(&["provide", "retrieve"]);
        }
        p.expect_words(&["the", "same", "information", "for", "other"])?;
        let pos = p.pos();
        let t = match p.table_noun() {
            Some(t) => t,
            None => return p.fail(&["vehicles", "pedestrians"]),
        };
        d.set_table(t, pos)?;
        p.expect_words(&["around", "my", "car"])?;
        let r = if p.is_word("within") { p.within()? } else { p.config.default_radius };
        d.spatial = SpatialFilter::Radius { center: d.ego_center(), radius: r };
        d.entity = EntityFilter::Exclude(EntityRef::Ego);
        limit(&mut p, &mut d)?;
        p.eat(&Tok::Period);
    }

    if !p.at_end() {
        return p.fail(&["end of query"]);
    }
    finish(d, p.pos())
}

fn field_list(p: &mut Parser<'_>, d: &mut Draft) -> Result<(), QueryError> {
    let mut first = true;
    loop {
        if !first {
            let comma = p.eat(&Tok::Comma);
            let and = p.eat_word("and");
            if !comma && !and {
                break;
            }
        }
        match p.peek() {
            Some(Tok::Word(w)) if !FIELD_STOP.iter().any(|s| w.eq_ignore_ascii_case(s)) => {
                let lw = w.to_ascii_lowercase();
                p.at += 1;
                if lw == "all" {
                    p.eat_word("information");
                    d.all_fields = true;
                } else if lw == "information" || lw == "records" || lw == "everything" {
                    d.all_fields = true;
                } else {
                    // Two-word column names such as "wind speed" or "day of week".
                    let mut word = lw;
                    if let Some(Tok::Word(next)) = p.peek() {
                        let joined = format!("{word}_{}", next.to_ascii_lowercase());
                        if Table::ALL.iter().any(|t| t.has_column(&joined)) {
                            word = joined;
                            p.at += 1;
                        }
                    }
                    if word == "day" && p.is_word("of") && p.is_word_at(1, "week") {
                        p.at += 2;
                        word = "day_of_week".into();
                    }
                    d.fields.push(RawField { word });
                }
            }
            _ if first && d.table.is_some() => return Ok(()),
            _ => return p.fail(&["field name"]),
        }
        first = false;
    }
    Ok(())
}

fn subject(p: &mut Parser<'_>, d: &mut Draft) -> Result<(), QueryError> {
    let pos = p.pos();
    if p.eat_word("my") {
        p.expect_word("car")?;
        d.set_table(Table::Vehicles, pos)?;
        d.entity = EntityFilter::Equals(EntityRef::Ego);
        if p.eat_word("located") {
            p.expect_word("at")?;
            d.ego_point = Some(p.coord()?);
        }
        return Ok(());
    }
    let other = p.eat_word("other");
    if !other {
        p.eat_word("all");
        p.eat_word("the");
    }
    let npos = p.pos();
    let Some(t) = p.table_noun() else {
        return p.fail(&["my car", "table noun"]);
    };
    d.set_table(t, npos)?;
    if other {
        d.entity = EntityFilter::Exclude(EntityRef::Ego);
    }
    match p.peek().cloned() {
        Some(Tok::Str(id)) => {
            p.at += 1;
            d.entity = EntityFilter::Equals(EntityRef::Id(id));
        }
        Some(Tok::Word(w)) if w.chars().any(|c| c.is_ascii_digit()) => {
            p.at += 1;
            d.entity = EntityFilter::Equals(EntityRef::Id(w));
        }
        _ => {}
    }
    Ok(())
}

fn limit(p: &mut Parser<'_>, d: &mut Draft) -> Result<(), QueryError> {
    let save = p.at;
    let had_comma = p.eat(&Tok::Comma);
    if p.eat_word("limit") {
        let pos = p.pos();
        let n = p.number()?;
        if n < 1.0 || n.fract() != 0.0 || n > u32::MAX as f64 {
            return Err(err(pos, &["positive integer"], n.to_string()));
        }
        d.limit = Some(n as u64);
    } else if had_comma {
        p.at = save;
    }
    Ok(())
}

fn finish(d: Draft, end: usize) -> Result<QueryIr, QueryError> {
    let Some((table, _)) = d.table else {
        return Err(err(end, &["table noun", "of my car"], "no table"));
    };
    let projection = if d.all_fields || d.fields.is_empty() {
        Projection::All
    } else {
        let mut cols: Vec<String> = Vec::new();
        for f in &d.fields {
            let resolved = resolve_field(table, &f.word)
                .ok_or_else(|| QueryError::UnknownField { table, field: f.word.clone() })?;
            for c in resolved {
                if !cols.contains(&c) {
                    cols.push(c);
                }
            }
        }
        Projection::Fields(cols)
    };
    if !table.is_spatial() && d.spatial != SpatialFilter::None {
        return Err(err(end, &["query without location for this table"], table.name()));
    }
    let temporal = d.temporal.unwrap_or(TemporalFilter::Instant(TimeRef::Current));
    let ir = QueryIr { table, projection, spatial: d.spatial, temporal, entity_filter: d.entity, limit: d.limit };
    ir.validate()?;
    Ok(ir)
}
