//! Uniform grid over planar meters with per-cell time buckets.

use std::collections::{BTreeMap, HashMap};

use crate::geom::Point;
use crate::time::Timestamp;

pub type Slot = u32;
pub type CellKey = (i64, i64);

#[derive(Debug, Clone, Default)]
struct Cell {
    timed: BTreeMap<i64, Vec<Slot>>,
    timeless: Vec<Slot>,
}

impl Cell {
    fn is_empty(&self) -> bool {
        self.timed.is_empty() && self.timeless.is_empty()
    }
}

/// Where an indexed slot lives: its cell and its time bucket
/// (`None` for rows without a timestamp).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IndexEntry {
    pub cell: CellKey,
    pub bucket: Option<i64>,
    pub slot: Slot,
}

#[derive(Debug, Clone)]
pub struct GridIndex {
    cell_size: f64,
    bucket_ms: i64,
    cells: HashMap<CellKey, Cell>,
}

impl GridIndex {
    pub fn new(cell_size: f64, bucket_secs: f64) -> Self {
        assert!(cell_size > 0.0 && cell_size.is_finite(), "cell size must be positive");
        let bucket_ms = ((bucket_secs * 1000.0).round() as i64).max(1);
        GridIndex { cell_size, bucket_ms, cells: HashMap::new() }
    }

    pub fn cell_of(&self, p: Point) -> CellKey {
        ((p.x / self.cell_size).floor() as i64, (p.y / self.cell_size).floor() as i64)
    }

    pub fn bucket_of(&self, t: Timestamp) -> i64 {
        t.millis().div_euclid(self.bucket_ms)
    }

    pub fn insert(&mut self, p: Point, t: Option<Timestamp>, slot: Slot) {
        let key = self.cell_of(p);
        let bucket = t.map(|t| self.bucket_of(t));
        let cell = self.cells.entry(key).or_default();
        match bucket {
            Some(b) => cell.timed.entry(b).or_default().push(slot),
            None => cell.timeless.push(slot),
        }
    }

    pub fn remove(&mut self, p: Point, t: Option<Timestamp>, slot: Slot) {
        let key = self.cell_of(p);
        let bucket = t.map(|t| self.bucket_of(t));
        let Some(cell) = self.cells.get_mut(&key) else {
            return;
        };
        match bucket {
            Some(b) => {
                if let Some(v) = cell.timed.get_mut(&b) {
                    v.retain(|s| *s != slot);
                    if v.is_empty() {
                        cell.timed.remove(&b);
                    }
                }
            }
            None => cell.timeless.retain(|s| *s != slot),
        }
        if cell.is_empty() {
            self.cells.remove(&key);
        }
    }

    /// Slots whose cell intersects the query box and whose bucket overlaps
    /// `[t0, t1]`. Timeless slots are always candidates. The caller applies
    /// the exact distance and time predicates.
    pub fn candidates(&self, center: Point, radius: f64, t0: Timestamp, t1: Timestamp) -> Vec<Slot> {
        let (x0, y0) = self.cell_of(Point::new(center.x - radius, center.y - radius));
        let (x1, y1) = self.cell_of(Point::new(center.x + radius, center.y + radius));
        let b0 = self.bucket_of(t0);
        let b1 = self.bucket_of(t1);
        let mut out = Vec::new();
        if b0 > b1 {
            return out;
        }
        let mut take = |cell: &Cell| {
            for v in cell.timed.range(b0..=b1).map(|(_, v)| v) {
                out.extend_from_slice(v);
            }
            out.extend_from_slice(&cell.timeless);
        };
        let w = x1.saturating_sub(x0).saturating_add(1);
        let h = y1.saturating_sub(y0).saturating_add(1);
        if w.saturating_mul(h) as u128 > self.cells.len() as u128 {
            for (&(cx, cy), cell) in &self.cells {
                if (x0..=x1).contains(&cx) && (y0..=y1).contains(&cy) {
                    take(cell);
                }
            }
        } else {
            for cx in x0..=x1 {
                for cy in y0..=y1 {
                    if let Some(cell) = self.cells.get(&(cx, cy)) {
                        take(cell);
                    }
                }
            }
        }
        out
    }

    pub fn entries(&self) -> Vec<IndexEntry> {
        let mut out = Vec::new();
        for (&cell, c) in &self.cells {
            for (&b, slots) in &c.timed {
                out.extend(slots.iter().map(|&slot| IndexEntry { cell, bucket: Some(b), slot }));
            }
            out.extend(c.timeless.iter().map(|&slot| IndexEntry { cell, bucket: None, slot }));
        }
        out
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_coordinates_floor() {
        let idx = GridIndex::new(50.0, 1.0);
        assert_eq!(idx.cell_of(Point::new(-0.1, 49.9)), (-1, 0));
        assert_eq!(idx.bucket_of(Timestamp::from_millis(-1)), -1);
    }

    #[test]
    fn insert_remove_leaves_no_cells() {
        let mut idx = GridIndex::new(50.0, 1.0);
        let p = Point::new(10.0, 10.0);
        idx.insert(p, Some(Timestamp::from_millis(1500)), 3);
        idx.insert(p, None, 4);
        assert_eq!(idx.entries().len(), 2);
        idx.remove(p, Some(Timestamp::from_millis(1500)), 3);
        idx.remove(p, None, 4);
        assert_eq!(idx.cell_count(), 0);
    }

    #[test]
    fn huge_radius_does_not_enumerate_empty_cells() {
        let mut idx = GridIndex::new(50.0, 1.0);
        idx.insert(Point::new(0.0, 0.0), None, 1);
        let c = idx.candidates(Point::new(0.0, 0.0), 1e12, Timestamp::MIN, Timestamp::MAX);
        assert_eq!(c, vec![1]);
    }
}
