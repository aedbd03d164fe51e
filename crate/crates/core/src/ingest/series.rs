//! Gap filling for timestamped scalar series.

use serde::{Deserialize, Serialize};

use crate::time::Timestamp;

use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilledPoint {
    pub t: Timestamp,
    pub value: f64,
    pub filled: bool,
}

/// Fill `None` values: interior gaps by linear interpolation in time,
/// leading and trailing gaps with the nearest known value. Input must be
/// time-ordered.
pub fn interpolate_missing(series: &[(Timestamp, Option<f64>)]) -> Result<Vec<FilledPoint>, IngestError> {
    if series.windows(2).any(|w| w[0].0 > w[1].0) {
        return Err(IngestError::NotTimeOrdered);
    }
    let known: Vec<usize> =
        series.iter().enumerate().filter(|(_, (_, v))| v.is_some_and(f64::is_finite)).map(|(i, _)| i).collect();
    let (Some(&first), Some(&last)) = (known.first(), known.last()) else {
        return Err(IngestError::AllMissing);
    };
    let mut out = Vec::with_capacity(series.len());
    let mut next = 0;
    for (i, &(t, v)) in series.iter().enumerate() {
        if let Some(v) = v.filter(|v| v.is_finite()) {
            out.push(FilledPoint { t, value: v, filled: false });
            continue;
        }
        let value = if i < first {
            series[first].1.unwrap()
        } else if i > last {
            series[last].1.unwrap()
        } else {
            while known[next + 1] < i {
                next += 1;
            }
            let (a, b) = (known[next], known[next + 1]);
            let (ta, va) = (series[a].0.millis() as f64, series[a].1.unwrap());
            let (tb, vb) = (series[b].0.millis() as f64, series[b].1.unwrap());
            if tb == ta {
                va
            } else {
                va + (vb - va) * ((t.millis() as f64 - ta) / (tb - ta))
            }
        };
        out.push(FilledPoint { t, value, filled: true });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: i64) -> Timestamp {
        Timestamp::from_millis(s * 1000)
    }

    #[test]
    fn midpoint() {
        let out = interpolate_missing(&[(t(0), Some(0.0)), (t(1), None), (t(2), Some(2.0))]).unwrap();
        assert_eq!(out[1], FilledPoint { t: t(1), value: 1.0, filled: true });
        assert!(!out[0].filled && !out[2].filled);
    }

    #[test]
    fn edges_copy_nearest() {
        let out = interpolate_missing(&[(t(-1), None), (t(0), Some(4.0)), (t(1), None)]).unwrap();
        assert_eq!(out[0].value, 4.0);
        assert_eq!(out[2].value, 4.0);
        assert!(out[0].filled && out[2].filled);
    }

    #[test]
    fn all_missing() {
        assert!(matches!(interpolate_missing(&[(t(0), None)]), Err(IngestError::AllMissing)));
        assert!(matches!(interpolate_missing(&[]), Err(IngestError::AllMissing)));
    }
}
