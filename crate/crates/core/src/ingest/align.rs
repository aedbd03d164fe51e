//! Snapping rows onto a reference time grid.

use serde::{Deserialize, Serialize};

use crate::time::Timestamp;

use super::IngestError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aligned<T> {
    /// `(grid instant, row)` pairs in input order.
    pub rows: Vec<(Timestamp, T)>,
    pub dropped: usize,
}

/// Index of the grid instant nearest to `t`, preferring the earlier one on
/// ties. `grid` must be non-empty and strictly increasing.
pub fn nearest_grid_index(grid: &[Timestamp], t: Timestamp) -> usize {
    let i = grid.partition_point(|g| *g < t);
    if i == 0 {
        return 0;
    }
    if i == grid.len() {
        return grid.len() - 1;
    }
    let before = t.millis().abs_diff(grid[i - 1].millis());
    let after = grid[i].millis().abs_diff(t.millis());
    if after < before {
        i
    } else {
        i - 1
    }
}

/// Default tolerance: half the smallest grid step (0 for a single instant).
pub fn default_tolerance_ms(grid: &[Timestamp]) -> u64 {
    grid.windows(2).map(|w| w[1].millis().abs_diff(w[0].millis())).min().map(|s| s / 2).unwrap_or(0)
}

/// Snap each row's timestamp to the nearest grid instant. Rows further than
/// `tolerance_ms` (inclusive) from every instant are dropped and counted.
pub fn align_spatiotemporal<T>(
    rows: Vec<T>,
    timestamp: impl Fn(&T) -> Timestamp,
    grid: &[Timestamp],
    tolerance_ms: Option<u64>,
) -> Result<Aligned<T>, IngestError> {
    if grid.is_empty() {
        return Err(IngestError::EmptyGrid);
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(IngestError::GridNotIncreasing);
    }
    let tol = tolerance_ms.unwrap_or_else(|| default_tolerance_ms(grid));
    let mut out = Aligned { rows: Vec::with_capacity(rows.len()), dropped: 0 };
    for r in rows {
        let t = timestamp(&r);
        let g = grid[nearest_grid_index(grid, t)];
        if g.millis().abs_diff(t.millis()) <= tol {
            out.rows.push((g, r));
        } else {
            out.dropped += 1;
        }
    }
    Ok(out)
}
