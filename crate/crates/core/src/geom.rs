use serde::{Deserialize, Serialize};

/// A position in a planar metric frame (e.g. UTM easting/northing).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    /// Squared distance, evaluated in the same operation order as the SQL
    /// radius predicate so both paths agree bit-for-bit.
    pub fn dist2(self, other: Point) -> f64 {
        (self.x - other.x) * (self.x - other.x) + (self.y - other.y) * (self.y - other.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point { x, y }
    }
}

/// True when `p` lies within `radius` of `center`, boundary included.
pub fn within_radius(p: Point, center: Point, radius: f64) -> bool {
    p.dist2(center) <= radius * radius
}
