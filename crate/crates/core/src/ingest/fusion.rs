//! Fusion of paired modality streams into fixed-length normalized vectors:
//! per-modality denoise then standardize, timestamp pairing with
//! concatenation, then resampling to a fixed length.

use serde::{Deserialize, Serialize};

use crate::time::Timestamp;

use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Image,
    Lidar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityStream {
    pub modality: Modality,
    pub samples: Vec<(Timestamp, Vec<f64>)>,
}

impl ModalityStream {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.samples.windows(2).any(|w| w[0].0 > w[1].0) {
            return Err(IngestError::NotTimeOrdered);
        }
        for (_, a) in &self.samples {
            if a.is_empty() {
                return Err(IngestError::EmptyArray);
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(IngestError::NonFiniteValue(format!("{:?} sample", self.modality)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedRepresentation {
    pub timestamp: Timestamp,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PipelineStage {
    /// Median filter; `window` 1 is the identity, otherwise 3.
    Denoise { modality: Modality, window: usize },
    /// Min-max scaling to `[0, 1]`.
    Standardize { modality: Modality },
    /// Pair equal timestamps and concatenate image then lidar.
    Align,
    /// Linear resampling to `length` entries.
    Format { length: usize },
}

impl PipelineStage {
    pub fn name(&self) -> &'static str {
        match self {
            PipelineStage::Denoise { modality: Modality::Image, .. } => "D_I",
            PipelineStage::Denoise { modality: Modality::Lidar, .. } => "D_L",
            PipelineStage::Standardize { modality: Modality::Image } => "S_I",
            PipelineStage::Standardize { modality: Modality::Lidar } => "S_L",
            PipelineStage::Align => "C",
            PipelineStage::Format { .. } => "R",
        }
    }
}

pub fn default_stages(length: usize) -> Vec<PipelineStage> {
    vec![
        PipelineStage::Denoise { modality: Modality::Image, window: 3 },
        PipelineStage::Denoise { modality: Modality::Lidar, window: 3 },
        PipelineStage::Standardize { modality: Modality::Image },
        PipelineStage::Standardize { modality: Modality::Lidar },
        PipelineStage::Align,
        PipelineStage::Format { length },
    ]
}

/// 3-point median with replicated edges.
pub fn median3(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    (0..n)
        .map(|i| {
            let (p, c, q) = (a[i.saturating_sub(1)], a[i], a[(i + 1).min(n - 1)]);
            p.max(c).min(p.min(c).max(q))
        })
        .collect()
}

/// Min-max scaling into `[0, 1]`; a constant array maps to 0.5.
pub fn min_max(a: &[f64]) -> Vec<f64> {
    let lo = a.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return vec![0.5; a.len()];
    }
    let range = hi - lo;
    a.iter()
        .map(|&v| {
            let s = if range.is_finite() { (v - lo) / range } else { (v / 2.0 - lo / 2.0) / (hi / 2.0 - lo / 2.0) };
            s.clamp(0.0, 1.0)
        })
        .collect()
}

/// Linear resampling of `a` to `length` evenly spaced points spanning it.
pub fn resample(a: &[f64], length: usize) -> Vec<f64> {
    let n = a.len();
    if n == 1 || length == 1 {
        return vec![a[0]; length];
    }
    (0..length)
        .map(|j| {
            let pos = j as f64 * (n - 1) as f64 / (length - 1) as f64;
            let i = (pos.floor() as usize).min(n - 2);
            let f = pos - i as f64;
            a[i] + (a[i + 1] - a[i]) * f
        })
        .collect()
}

struct Plan {
    denoise: [usize; 2],
    length: usize,
}

fn slot(m: Modality) -> usize {
    match m {
        Modality::Image => 0,
        Modality::Lidar => 1,
    }
}

/// Each of D_I, D_L, S_I, S_L, C, R exactly once; D before S per modality;
/// every S before C; C before R.
fn plan(stages: &[PipelineStage]) -> Result<Plan, IngestError> {
    let violation = |msg: String| Err(IngestError::StageOrderViolation(msg));
    let mut seen_d = [false; 2];
    let mut seen_s = [false; 2];
    let mut seen_c = false;
    let mut length = None;
    let mut denoise = [1; 2];
    for st in stages {
        let name = st.name();
        if length.is_some() {
            return violation(format!("{name} after R"));
        }
        match *st {
            PipelineStage::Denoise { modality, window } => {
                let k = slot(modality);
                if seen_d[k] || seen_s[k] || seen_c {
                    return violation(format!("{name} out of order"));
                }
                if window != 1 && window != 3 {
                    return violation(format!("{name} window must be 1 or 3"));
                }
                seen_d[k] = true;
                denoise[k] = window;
            }
            PipelineStage::Standardize { modality } => {
                let k = slot(modality);
                if !seen_d[k] || seen_s[k] || seen_c {
                    return violation(format!("{name} out of order"));
                }
                seen_s[k] = true;
            }
            PipelineStage::Align => {
                if seen_c || !seen_s.iter().all(|&s| s) {
                    return violation("C before both S stages".into());
                }
                seen_c = true;
            }
            PipelineStage::Format { length: l } => {
                if !seen_c {
                    return violation("R before C".into());
                }
                if l == 0 {
                    return violation("R length must be positive".into());
                }
                length = Some(l);
            }
        }
    }
    match length {
        Some(length) => Ok(Plan { denoise, length }),
        None => violation("pipeline must end with R".into()),
    }
}

pub fn check_stage_order(stages: &[PipelineStage]) -> Result<(), IngestError> {
    plan(stages).map(|_| ())
}

fn per_modality(a: &[f64], window: usize) -> Vec<f64> {
    if window == 3 {
        min_max(&median3(a))
    } else {
        min_max(a)
    }
}

/// Fuse `image` and `lidar` at every timestamp present in both.
pub fn run_fusion_pipeline(
    image: &ModalityStream,
    lidar: &ModalityStream,
    stages: &[PipelineStage],
) -> Result<Vec<FusedRepresentation>, IngestError> {
    let p = plan(stages)?;
    if image.modality != Modality::Image || lidar.modality != Modality::Lidar {
        return Err(IngestError::StageOrderViolation("streams must be (image, lidar)".into()));
    }
    image.validate()?;
    lidar.validate()?;
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < image.samples.len() && j < lidar.samples.len() {
        let (ti, a) = &image.samples[i];
        let (tl, b) = &lidar.samples[j];
        match ti.cmp(tl) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                let mut joined = per_modality(a, p.denoise[0]);
                joined.extend(per_modality(b, p.denoise[1]));
                let vector = resample(&joined, p.length).into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
                out.push(FusedRepresentation { timestamp: *ti, vector });
                i += 1;
                j += 1;
            }
        }
    }
    if out.is_empty() {
        return Err(IngestError::NoOverlappingTimestamps);
    }
    Ok(out)
}
