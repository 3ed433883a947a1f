//! 3-D points in centimeters. `y` is the body's vertical axis.

use serde::{Deserialize, Serialize};

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        math::sqrt(dx * dx + dy * dy + dz * dz)
    }

    /// Linear interpolation, `t = 0` gives `self`.
    pub fn lerp(&self, other: &Point3, t: f64) -> Point3 {
        Point3 {
            x: self.x + (other.x - self.x) * t,
            y: self.y + (other.y - self.y) * t,
            z: self.z + (other.z - self.z) * t,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<[f64; 3]> for Point3 {
    fn from([x, y, z]: [f64; 3]) -> Self {
        Point3 { x, y, z }
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

/// Sum of segment lengths of a polyline.
pub fn arc_length(path: &[Point3]) -> f64 {
    path.windows(2).map(|w| w[0].distance(&w[1])).sum()
}

/// Point at arc-length `s` along `path`, clamped to the ends.
pub fn point_at(path: &[Point3], s: f64) -> Point3 {
    let mut remaining = s.max(0.0);
    for w in path.windows(2) {
        let seg = w[0].distance(&w[1]);
        if remaining <= seg {
            if seg == 0.0 {
                return w[0];
            }
            return w[0].lerp(&w[1], remaining / seg);
        }
        remaining -= seg;
    }
    *path.last().expect("non-empty path")
}

/// Shortest distance from `p` to any segment of `path`.
pub fn distance_to_path(path: &[Point3], p: &Point3) -> f64 {
    if path.len() == 1 {
        return path[0].distance(p);
    }
    path.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let ab = [b.x - a.x, b.y - a.y, b.z - a.z];
            let ap = [p.x - a.x, p.y - a.y, p.z - a.z];
            let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
            let t = if len2 == 0.0 { 0.0 } else { ((ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2).clamp(0.0, 1.0) };
            a.lerp(&b, t).distance(p)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Arithmetic mean of the vertices.
pub fn centroid(path: &[Point3]) -> Point3 {
    let n = path.len() as f64;
    let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
    for p in path {
        x += p.x;
        y += p.y;
        z += p.z;
    }
    Point3::new(x / n, y / n, z / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_at_walks_segments() {
        let path = [Point3::new(0.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0), Point3::new(2.0, 3.0, 0.0)];
        assert_eq!(arc_length(&path), 5.0);
        assert_eq!(point_at(&path, 1.0), Point3::new(1.0, 0.0, 0.0));
        assert_eq!(point_at(&path, 4.0), Point3::new(2.0, 2.0, 0.0));
        assert_eq!(point_at(&path, 9.0), Point3::new(2.0, 3.0, 0.0));
    }
}
