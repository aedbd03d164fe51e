//! Metric reports and their JSON, CSV and Markdown renderings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::rag::Mode;

use super::EvalError;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics {
    pub horizon: usize,
    /// `None` when no scenario succeeded.
    pub ade: Option<f64>,
    pub fde: Option<f64>,
    /// Successful scenarios averaged.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub arm: Mode,
    pub successes: usize,
    /// Failed scenarios per error class.
    pub failures: BTreeMap<String, usize>,
    pub metrics: Vec<HorizonMetrics>,
}

impl ArmReport {
    pub fn failure_count(&self) -> usize {
        self.failures.values().sum()
    }

    pub fn at(&self, horizon: usize) -> Option<&HorizonMetrics> {
        self.metrics.iter().find(|m| m.horizon == horizon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema_version: u32,
    pub scenario_count: usize,
    pub horizons: Vec<usize>,
    pub arms: Vec<ArmReport>,
}

impl MetricReport {
    pub fn empty(horizons: Vec<usize>) -> Self {
        MetricReport { schema_version: REPORT_SCHEMA_VERSION, scenario_count: 0, horizons, arms: Vec::new() }
    }

    pub fn arm(&self, mode: Mode) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.arm == mode)
    }

    /// Relative reduction of `metric` from baseline to senserag per horizon.
    pub fn improvements(&self, metric: Metric) -> Vec<(usize, f64)> {
        let (Some(b), Some(s)) = (self.arm(Mode::Baseline), self.arm(Mode::Senserag)) else {
            return Vec::new();
        };
        self.horizons
            .iter()
            .filter_map(|&h| {
                let (bm, sm) = (b.at(h)?, s.at(h)?);
                let (bv, sv) = (metric.of(bm)?, metric.of(sm)?);
                Some((h, improvement(bv, sv)))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Ade,
    Fde,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Ade => "ADE",
            Metric::Fde => "FDE",
        }
    }

    fn of(self, m: &HorizonMetrics) -> Option<f64> {
        match self {
            Metric::Ade => m.ade,
            Metric::Fde => m.fde,
        }
    }
}

/// `(baseline − enhanced) / baseline`.
pub fn improvement(baseline: f64, enhanced: f64) -> f64 {
    (baseline - enhanced) / baseline
}

/// Mean of the per-horizon improvements.
pub fn mean_improvement(pairs: &[(f64, f64)]) -> f64 {
    pairs.iter().map(|&(b, e)| improvement(b, e)).sum::<f64>() / pairs.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(format!("unknown report format {s:?}")),
        }
    }
}

fn render_csv(r: &MetricReport) -> Result<String, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| EvalError::Io(std::io::Error::other(e));
    w.write_record(["horizon", "arm", "metric", "value", "n", "failures"]).map_err(io)?;
    for &h in &r.horizons {
        for a in &r.arms {
            let Some(m) = a.at(h) else { continue };
            for metric in [Metric::Ade, Metric::Fde] {
                let value = metric.of(m).map(|v| v.to_string()).unwrap_or_default();
                w.write_record([
                    h.to_string(),
                    a.arm.name().to_string(),
                    metric.name().to_string(),
                    value,
                    m.n.to_string(),
                    a.failure_count().to_string(),
                ])
                .map_err(io)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| EvalError::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn render_markdown(r: &MetricReport) -> String {
    let mut out = String::new();
    for (i, metric) in [Metric::Ade, Metric::Fde].into_iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("{} ↓ ({} scenarios)\n\n| Horizon |", metric.name(), r.scenario_count));
        let gains: BTreeMap<usize, f64> = r.improvements(metric).into_iter().collect();
        let with_gain = r.arm(Mode::Baseline).is_some() && r.arm(Mode::Senserag).is_some();
        for a in &r.arms {
            out.push_str(&format!(" {} |", a.arm.name()));
        }
        if with_gain {
            out.push_str(" improvement |");
        }
        out.push_str("\n|---|");
        for _ in 0..r.arms.len() + usize::from(with_gain) {
            out.push_str("---|");
        }
        out.push('\n');
        for &h in &r.horizons {
            out.push_str(&format!("| {h} |"));
            for a in &r.arms {
                let v = a.at(h).and_then(|m| metric.of(m));
                match v {
                    Some(v) => out.push_str(&format!(" {v:.4} |")),
                    None => out.push_str(" n/a |"),
                }
            }
            if with_gain {
                match gains.get(&h).filter(|g| g.is_finite()) {
                    Some(g) => out.push_str(&format!(" {:.1}% |", g * 100.0)),
                    None => out.push_str(" n/a |"),
                }
            }
            out.push('\n');
        }
    }
    out
}

pub fn render_report(r: &MetricReport, format: ReportFormat) -> Result<String, EvalError> {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(r).map_err(|e| EvalError::Io(std::io::Error::other(e)))?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => render_csv(r),
        ReportFormat::Markdown => Ok(render_markdown(r)),
    }
}

/// Render `r` and write it to `path`.
pub fn emit_report(r: &MetricReport, format: ReportFormat, path: &Path) -> Result<(), EvalError> {
    let body = render_report(r, format)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, body)?;
    Ok(())
}
