//! Allow-listed SQL subset: validation gate and full-scan interpreter.
//!
//! Accepted form:
//!
//! ```text
//! SELECT (* | col {, col}) FROM table
//!   [WHERE cond {AND cond}]
//!   [ORDER BY col [ASC|DESC] {, col [ASC|DESC]}]
//!   [LIMIT n] [;]
//! cond := expr (= | <> | != | < | <= | > | >=) expr
//! expr := term {(+|-) term};  term := unary {(*|/) unary}
//! unary := -unary | number | 'string' | :param | col | (expr)
//! ```
//!
//! The interpreter scans every row of the table; it shares no code with
//! the indexed executor, which makes it usable as a cross-check.

use std::cmp::Ordering;

use serde::Serialize;

use crate::store::{EntityRecord, KnowledgeStore, Table, Value};
use crate::time::Timestamp;

use super::ir::QueryContext;
use super::render::{Profile, SqlText};
use super::QueryError;

const MUTATION_KEYWORDS: &[&str] = &[
    "INSERT",
    "UPDATE",
    "DELETE",
    "DROP",
    "ALTER",
    "CREATE",
    "TRUNCATE",
    "REPLACE",
    "MERGE",
    "UPSERT",
    "GRANT",
    "REVOKE",
    "ATTACH",
    "DETACH",
    "PRAGMA",
    "VACUUM",
    "REINDEX",
    "EXEC",
    "EXECUTE",
    "CALL",
    "COPY",
    "RENAME",
    "INTO",
    "LOAD",
    "SET",
    "LOCK",
    "COMMIT",
    "ROLLBACK",
    "BEGIN",
    "SAVEPOINT",
    "RELEASE",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Empty,
    Syntax { position: usize, message: String },
    Comment { position: usize },
    MultipleStatements,
    Mutation { keyword: String },
    NotSelect,
    UnknownTable { table: String },
    UnknownColumn { table: String, column: String },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Empty => write!(f, "empty statement"),
            Violation::Syntax { position, message } => write!(f, "syntax error at {position}: {message}"),
            Violation::Comment { position } => write!(f, "comment at {position}"),
            Violation::MultipleStatements => write!(f, "more than one statement"),
            Violation::Mutation { keyword } => write!(f, "mutation keyword {keyword}"),
            Violation::NotSelect => write!(f, "statement is not a SELECT"),
            Violation::UnknownTable { table } => write!(f, "unknown table {table}"),
            Violation::UnknownColumn { table, column } => write!(f, "unknown column {table}.{column}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    Param(String),
    Star,
    Comma,
    LParen,
    RParen,
    Semi,
    Plus,
    Minus,
    Slash,
    Op(CmpOp),
    Comment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn lex(sql: &str) -> Result<Vec<Token>, Violation> {
    let b = sql.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let syntax = |position: usize, message: &str| Violation::Syntax { position, message: message.to_string() };
    while i < b.len() {
        let c = b[i];
        let start = i;
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, pos: start });
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'-' if b.get(i + 1) == Some(&b'-') => {
                push(&mut out, Tok::Comment);
                while i < b.len() && b[i] != b'\n' {
                    i += 1;
                }
            }
            b'/' if b.get(i + 1) == Some(&b'*') => {
                push(&mut out, Tok::Comment);
                i += 2;
                while i < b.len() && !(b[i] == b'*' && b.get(i + 1) == Some(&b'/')) {
                    i += 1;
                }
                i = (i + 2).min(b.len());
            }
            b'#' => {
                push(&mut out, Tok::Comment);
                while i < b.len() && b[i] != b'\n' {
                    i += 1;
                }
            }
            b'*' => {
                push(&mut out, Tok::Star);
                i += 1;
            }
            b',' => {
                push(&mut out, Tok::Comma);
                i += 1;
            }
            b'(' => {
                push(&mut out, Tok::LParen);
                i += 1;
            }
            b')' => {
                push(&mut out, Tok::RParen);
                i += 1;
            }
            b';' => {
                push(&mut out, Tok::Semi);
                i += 1;
            }
            b'+' => {
                push(&mut out, Tok::Plus);
                i += 1;
            }
            b'-' => {
                push(&mut out, Tok::Minus);
                i += 1;
            }
            b'/' => {
                push(&mut out, Tok::Slash);
                i += 1;
            }
            b'=' => {
                push(&mut out, Tok::Op(CmpOp::Eq));
                i += if b.get(i + 1) == Some(&b'=') { 2 } else { 1 };
            }
            b'!' if b.get(i + 1) == Some(&b'=') => {
                push(&mut out, Tok::Op(CmpOp::Ne));
                i += 2;
            }
            b'<' => match b.get(i + 1) {
                Some(b'=') => {
                    push(&mut out, Tok::Op(CmpOp::Le));
                    i += 2;
                }
                Some(b'>') => {
                    push(&mut out, Tok::Op(CmpOp::Ne));
                    i += 2;
                }
                _ => {
                    push(&mut out, Tok::Op(CmpOp::Lt));
                    i += 1;
                }
            },
            b'>' => {
                if b.get(i + 1) == Some(&b'=') {
                    push(&mut out, Tok::Op(CmpOp::Ge));
                    i += 2;
                } else {
                    push(&mut out, Tok::Op(CmpOp::Gt));
                    i += 1;
                }
            }
            b'\'' => {
                let mut s = Vec::new();
                i += 1;
                loop {
                    match b.get(i) {
                        None => return Err(syntax(start, "unterminated string")),
                        Some(b'\'') if b.get(i + 1) == Some(&b'\'') => {
                            s.push(b'\'');
                            i += 2;
                        }
                        Some(b'\'') => {
                            i += 1;
                            break;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                let s = String::from_utf8(s).map_err(|_| syntax(start, "invalid UTF-8 in string"))?;
                push(&mut out, Tok::Str(s));
            }
            b':' => {
                i += 1;
                let s = i;
                while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                    i += 1;
                }
                if s == i {
                    return Err(syntax(start, "empty parameter name"));
                }
                push(&mut out, Tok::Param(sql[s..i].to_string()));
            }
            b'0'..=b'9' | b'.' => {
                while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
                    i += 1;
                }
                if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                    let save = i;
                    i += 1;
                    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
                        i += 1;
                    }
                    if i < b.len() && b[i].is_ascii_digit() {
                        while i < b.len() && b[i].is_ascii_digit() {
                            i += 1;
                        }
                    } else {
                        i = save;
                    }
                }
                let v: f64 = sql[start..i].parse().map_err(|_| syntax(start, "bad number"))?;
                push(&mut out, Tok::Number(v));
            }
            c if c.is_ascii_alphabetic() || c == b'_' || c == b'"' || c == b'`' => {
                let quoted = c == b'"' || c == b'`';
                if quoted {
                    i += 1;
                    let s = i;
                    while i < b.len() && b[i] != c {
                        i += 1;
                    }
                    if i >= b.len() {
                        return Err(syntax(start, "unterminated identifier"));
                    }
                    let name = sql[s..i].to_string();
                    i += 1;
                    push(&mut out, Tok::Ident(name));
                } else {
                    while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                        i += 1;
                    }
                    push(&mut out, Tok::Ident(sql[start..i].to_string()));
                }
            }
            _ => return Err(syntax(start, "unexpected character")),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Str(String),
    Param(String),
    Column(String),
    Neg(Box<Expr>),
    Bin(Box<Expr>, char, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cond {
    pub lhs: Expr,
    pub op: CmpOp,
    pub rhs: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Select {
    /// `None` for `*`.
    pub columns: Option<Vec<String>>,
    pub table: String,
    pub conds: Vec<Cond>,
    pub order_by: Vec<(String, bool)>,
    pub limit: Option<u64>,
}

struct P<'a> {
    toks: &'a [Token],
    at: usize,
    end: usize,
}

impl P<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.tok)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|t| t.pos).unwrap_or(self.end)
    }

    fn fail<T>(&self, message: &str) -> Result<T, Violation> {
        Err(Violation::Syntax { position: self.pos(), message: message.to_string() })
    }

    fn kw(&self, k: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s.eq_ignore_ascii_case(k))
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.kw(k) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, Violation> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.at += 1;
                Ok(s)
            }
            _ => self.fail("expected identifier"),
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self, depth: usize) -> Result<Expr, Violation> {
        if depth > 64 {
            return self.fail("expression nested too deeply");
        }
        let mut lhs = self.term(depth)?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => '+',
                Some(Tok::Minus) => '-',
                _ => return Ok(lhs),
            };
            self.at += 1;
            let rhs = self.term(depth)?;
            lhs = Expr::Bin(Box::new(lhs), op, Box::new(rhs));
        }
    }

    fn term(&mut self, depth: usize) -> Result<Expr, Violation> {
        let mut lhs = self.unary(depth)?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => '*',
                Some(Tok::Slash) => '/',
                _ => return Ok(lhs),
            };
            self.at += 1;
            let rhs = self.unary(depth)?;
            lhs = Expr::Bin(Box::new(lhs), op, Box::new(rhs));
        }
    }

    fn unary(&mut self, depth: usize) -> Result<Expr, Violation> {
        if depth > 64 {
            return self.fail("expression nested too deeply");
        }
        match self.peek().cloned() {
            Some(Tok::Minus) => {
                self.at += 1;
                Ok(Expr::Neg(Box::new(self.unary(depth + 1)?)))
            }
            Some(Tok::Number(n)) => {
                self.at += 1;
                Ok(Expr::Number(n))
            }
            Some(Tok::Str(s)) => {
                self.at += 1;
                Ok(Expr::Str(s))
            }
            Some(Tok::Param(s)) => {
                self.at += 1;
                Ok(Expr::Param(s))
            }
            Some(Tok::Ident(s)) if !is_reserved(&s) => {
                self.at += 1;
                Ok(Expr::Column(s))
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let e = self.expr(depth + 1)?;
                if !self.eat(&Tok::RParen) {
                    return self.fail("expected )");
                }
                Ok(e)
            }
            _ => self.fail("expected expression"),
        }
    }

    fn cond(&mut self) -> Result<Cond, Violation> {
        let lhs = self.expr(0)?;
        let op = match self.peek() {
            Some(Tok::Op(op)) => *op,
            _ => return self.fail("expected comparison operator"),
        };
        self.at += 1;
        let rhs = self.expr(0)?;
        Ok(Cond { lhs, op, rhs })
    }

    fn select(&mut self) -> Result<Select, Violation> {
        if !self.eat_kw("SELECT") {
            return Err(Violation::NotSelect);
        }
        let columns = if self.eat(&Tok::Star) {
            None
        } else {
            let mut cols = vec![self.ident()?];
            while self.eat(&Tok::Comma) {
                cols.push(self.ident()?);
            }
            Some(cols)
        };
        if !self.eat_kw("FROM") {
            return self.fail("expected FROM");
        }
        let table = self.ident()?;
        let mut conds = Vec::new();
        if self.eat_kw("WHERE") {
            conds.push(self.cond()?);
            while self.eat_kw("AND") {
                conds.push(self.cond()?);
            }
        }
        let mut order_by = Vec::new();
        if self.eat_kw("ORDER") {
            if !self.eat_kw("BY") {
                return self.fail("expected BY");
            }
            loop {
                let c = self.ident()?;
                let desc = if self.eat_kw("DESC") {
                    true
                } else {
                    self.eat_kw("ASC");
                    false
                };
                order_by.push((c, desc));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        let mut limit = None;
        if self.eat_kw("LIMIT") {
            match self.peek() {
                Some(Tok::Number(n)) if *n >= 1.0 && n.fract() == 0.0 && *n <= u32::MAX as f64 => {
                    limit = Some(*n as u64);
                    self.at += 1;
                }
                _ => return self.fail("expected positive integer"),
            }
        }
        self.eat(&Tok::Semi);
        if self.at != self.toks.len() {
            return self.fail("unexpected trailing input");
        }
        Ok(Select { columns, table, conds, order_by, limit })
    }
}

fn is_reserved(s: &str) -> bool {
    ["SELECT", "FROM", "WHERE", "AND", "OR", "ORDER", "BY", "LIMIT", "ASC", "DESC", "NOT"]
        .iter()
        .any(|k| k.eq_ignore_ascii_case(s))
}

/// Tables and columns a profile accepts.
fn profile_columns(profile: Profile, table: &str) -> Option<Vec<&'static str>> {
    if let Ok(t) = table.parse::<Table>() {
        return Some(t.columns().to_vec());
    }
    match (profile, table.to_ascii_lowercase().as_str()) {
        (Profile::Compat, "traffic_data") => {
            Some(vec!["signal_id", "signal_status", "location", "time", "day_of_week", "x", "y"])
        }
        _ => None,
    }
}

fn expr_columns<'e>(e: &'e Expr, out: &mut Vec<&'e str>) {
    match e {
        Expr::Column(c) => out.push(c),
        Expr::Neg(x) => expr_columns(x, out),
        Expr::Bin(a, _, b) => {
            expr_columns(a, out);
            expr_columns(b, out);
        }
        _ => {}
    }
}

/// Parse one allow-listed SELECT.
pub fn parse_sql(sql: &str) -> Result<Select, Violation> {
    let toks = lex(sql)?;
    if toks.iter().any(|t| t.tok == Tok::Comment) {
        let position = toks.iter().find(|t| t.tok == Tok::Comment).map(|t| t.pos).unwrap_or(0);
        return Err(Violation::Comment { position });
    }
    let mut p = P { toks: &toks, at: 0, end: sql.len() };
    p.select()
}

/// Check a statement against the allow-list. An empty list means accepted.
pub fn validate_sql(sql: &SqlText, profile: Profile) -> Vec<Violation> {
    let text = sql.as_str();
    let mut out = Vec::new();
    let toks = match lex(text) {
        Ok(t) => t,
        Err(v) => {
            // Still look for mutation keywords in the readable prefix.
            for word in text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_')) {
                if let Some(k) = MUTATION_KEYWORDS.iter().find(|k| k.eq_ignore_ascii_case(word)) {
                    out.push(Violation::Mutation { keyword: k.to_string() });
                }
            }
            out.push(v);
            return out;
        }
    };
    if toks.is_empty() || toks.iter().all(|t| t.tok == Tok::Semi) {
        return vec![Violation::Empty];
    }
    for t in &toks {
        match &t.tok {
            Tok::Comment => out.push(Violation::Comment { position: t.pos }),
            Tok::Ident(s) => {
                if let Some(k) = MUTATION_KEYWORDS.iter().find(|k| k.eq_ignore_ascii_case(s)) {
                    let v = Violation::Mutation { keyword: k.to_string() };
                    if !out.contains(&v) {
                        out.push(v);
                    }
                }
            }
            _ => {}
        }
    }
    let statements = toks.split(|t| t.tok == Tok::Semi).filter(|s| s.iter().any(|t| t.tok != Tok::Comment)).count();
    if statements > 1 {
        out.push(Violation::MultipleStatements);
    }
    if !out.is_empty() {
        return out;
    }
    let mut p = P { toks: &toks, at: 0, end: text.len() };
    let sel = match p.select() {
        Ok(s) => s,
        Err(v) => return vec![v],
    };
    let Some(cols) = profile_columns(profile, &sel.table) else {
        return vec![Violation::UnknownTable { table: sel.table }];
    };
    let mut referenced: Vec<&str> = Vec::new();
    if let Some(c) = &sel.columns {
        referenced.extend(c.iter().map(String::as_str));
    }
    for c in &sel.conds {
        expr_columns(&c.lhs, &mut referenced);
        expr_columns(&c.rhs, &mut referenced);
    }
    referenced.extend(sel.order_by.iter().map(|(c, _)| c.as_str()));
    for c in referenced {
        if !cols.iter().any(|k| k.eq_ignore_ascii_case(c)) {
            let v = Violation::UnknownColumn { table: sel.table.clone(), column: c.to_string() };
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    out
}

/// Rows produced by the interpreter, with the selected column names.
#[derive(Debug, Clone, PartialEq)]
pub struct SqlRows<'a> {
    pub table: Table,
    pub columns: Vec<String>,
    pub records: Vec<&'a EntityRecord>,
}

#[derive(Debug, Clone, PartialEq)]
enum V {
    Num(f64),
    Text(String),
    Time(Timestamp),
    Null,
}

fn to_v(v: Value) -> V {
    match v {
        Value::Number(n) => V::Num(n),
        Value::Text(s) => V::Text(s),
        Value::Time(t) => V::Time(t),
        Value::Null => V::Null,
    }
}

fn param(name: &str, ctx: &QueryContext) -> Result<V, QueryError> {
    let missing = || QueryError::Unbound(name.to_string());
    match name {
        "current_x" => ctx.position.map(|p| V::Num(p.x)).ok_or_else(missing),
        "current_y" => ctx.position.map(|p| V::Num(p.y)).ok_or_else(missing),
        "current_time" => ctx.time.map(V::Time).ok_or_else(missing),
        "ego_id" => ctx.ego_id.clone().map(V::Text).ok_or_else(missing),
        _ => Err(missing()),
    }
}

fn eval(e: &Expr, rec: &EntityRecord, ctx: &QueryContext) -> Result<V, QueryError> {
    Ok(match e {
        Expr::Number(n) => V::Num(*n),
        Expr::Str(s) => V::Text(s.clone()),
        Expr::Param(p) => param(p, ctx)?,
        Expr::Column(c) => to_v(rec.field(&c.to_ascii_lowercase()).unwrap_or(Value::Null)),
        Expr::Neg(x) => match eval(x, rec, ctx)? {
            V::Num(n) => V::Num(-n),
            _ => V::Null,
        },
        Expr::Bin(a, op, b) => match (eval(a, rec, ctx)?, eval(b, rec, ctx)?) {
            (V::Num(x), V::Num(y)) => V::Num(match op {
                '+' => x + y,
                '-' => x - y,
                '*' => x * y,
                _ => x / y,
            }),
            _ => V::Null,
        },
    })
}

fn compare(a: &V, b: &V) -> Option<Ordering> {
    match (a, b) {
        (V::Num(x), V::Num(y)) => x.partial_cmp(y),
        (V::Text(x), V::Text(y)) => Some(x.cmp(y)),
        (V::Time(x), V::Time(y)) => Some(x.cmp(y)),
        (V::Time(x), V::Text(s)) => Timestamp::parse(s).ok().map(|y| x.cmp(&y)),
        (V::Text(s), V::Time(y)) => Timestamp::parse(s).ok().map(|x| x.cmp(y)),
        _ => None,
    }
}

fn holds(c: &Cond, rec: &EntityRecord, ctx: &QueryContext) -> Result<bool, QueryError> {
    let ord = compare(&eval(&c.lhs, rec, ctx)?, &eval(&c.rhs, rec, ctx)?);
    Ok(match (ord, c.op) {
        (None, _) => false,
        (Some(o), CmpOp::Eq) => o == Ordering::Equal,
        (Some(o), CmpOp::Ne) => o != Ordering::Equal,
        (Some(o), CmpOp::Lt) => o == Ordering::Less,
        (Some(o), CmpOp::Le) => o != Ordering::Greater,
        (Some(o), CmpOp::Gt) => o == Ordering::Greater,
        (Some(o), CmpOp::Ge) => o != Ordering::Less,
    })
}

fn order_value(v: &V) -> (u8, f64, String, i64) {
    match v {
        V::Null => (0, 0.0, String::new(), 0),
        V::Num(n) => (1, *n, String::new(), 0),
        V::Text(s) => (2, 0.0, s.clone(), 0),
        V::Time(t) => (3, 0.0, String::new(), t.millis()),
    }
}

fn cmp_order(a: &V, b: &V) -> Ordering {
    let (ka, na, sa, ta) = order_value(a);
    let (kb, nb, sb, tb) = order_value(b);
    ka.cmp(&kb).then(na.total_cmp(&nb)).then_with(|| sa.cmp(&sb)).then(ta.cmp(&tb))
}

/// Validate, then evaluate by full scan over the store.
pub fn execute_sql<'a>(
    sql: &SqlText,
    store: &'a KnowledgeStore,
    ctx: &QueryContext,
) -> Result<SqlRows<'a>, QueryError> {
    let violations = validate_sql(sql, Profile::Default);
    if !violations.is_empty() {
        return Err(QueryError::Rejected(violations));
    }
    let sel = parse_sql(sql.as_str()).map_err(|v| QueryError::Rejected(vec![v]))?;
    let table: Table = sel.table.parse()?;
    let mut rows: Vec<&EntityRecord> = store.records(table).collect();
    rows.sort_by_cached_key(|r| r.key());
    let mut kept = Vec::with_capacity(rows.len());
    for r in rows {
        let mut ok = true;
        for c in &sel.conds {
            if !holds(c, r, ctx)? {
                ok = false;
                break;
            }
        }
        if ok {
            kept.push(r);
        }
    }
    if !sel.order_by.is_empty() {
        let keys: Vec<(String, bool)> = sel.order_by.iter().map(|(c, d)| (c.to_ascii_lowercase(), *d)).collect();
        kept.sort_by(|a, b| {
            for (c, desc) in &keys {
                let va = to_v(a.field(c).unwrap_or(Value::Null));
                let vb = to_v(b.field(c).unwrap_or(Value::Null));
                let o = cmp_order(&va, &vb);
                let o = if *desc { o.reverse() } else { o };
                if o != Ordering::Equal {
                    return o;
                }
            }
            Ordering::Equal
        });
    }
    if let Some(n) = sel.limit {
        kept.truncate(n as usize);
    }
    let columns = match sel.columns {
        Some(c) => c.into_iter().map(|s| s.to_ascii_lowercase()).collect(),
        None => table.columns().iter().map(|s| s.to_string()).collect(),
    };
    Ok(SqlRows { table, columns, records: kept })
}
