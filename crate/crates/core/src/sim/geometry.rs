use alloc::vec::Vec;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Simple (non-self-intersecting) polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidParameter(alloc::format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("polygon vertex is not finite".into()));
        }
        Ok(Self { vertices })
    }

    pub fn rectangle(x: (f64, f64), y: (f64, f64)) -> Result<Self> {
        if !(x.0 < x.1 && y.0 < y.1) {
            return Err(Error::InvalidParameter(alloc::format!("empty rectangle {x:?} x {y:?}")));
        }
        Self::new(alloc::vec![[x.0, y.0], [x.1, y.0], [x.1, y.1], [x.0, y.1]])
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Even-odd rule; points on the lower/left edges count as inside.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        let n = self.vertices.len();
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[j]);
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// `((x_min, x_max), (y_min, y_max))`.
    pub fn bounding_box(&self) -> ((f64, f64), (f64, f64)) {
        let mut bb = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
        for v in &self.vertices {
            bb.0 .0 = bb.0 .0.min(v[0]);
            bb.0 .1 = bb.0 .1.max(v[0]);
            bb.1 .0 = bb.1 .0.min(v[1]);
            bb.1 .1 = bb.1 .1.max(v[1]);
        }
        bb
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let twice: f64 = (0..n)
            .map(|i| {
                let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum();
        twice.abs() / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn containment() {
        let sq = Polygon::rectangle((0.0, 2.0), (0.0, 1.0)).unwrap();
        assert!(sq.contains([1.0, 0.5]));
        assert!(!sq.contains([2.5, 0.5]));
        assert!(!sq.contains([1.0, -0.1]));
        assert_eq!(sq.area(), 2.0);
        let tri = Polygon::new(alloc::vec![[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]]).unwrap();
        assert!(tri.contains([1.0, 1.0]));
        assert!(!tri.contains([3.0, 3.0]));
        assert_eq!(tri.bounding_box(), ((0.0, 4.0), (0.0, 4.0)));
        assert!(Polygon::new(alloc::vec![[0.0, 0.0], [1.0, 1.0]]).is_err());
    }
}
