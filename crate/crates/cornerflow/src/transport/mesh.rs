//! Uniform triangulation of the half-domain `0 ≤ η ≤ ξ ≤ 1`.

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Uniform triangulation with spacing `h = 1/M` in rotated coordinates:
/// `M²` congruent right triangles of area `h²/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfMesh {
    pub m: usize,
    pub h: f64,
    pub vertices: Vec<Point>,
    /// Counter-clockwise vertex indices.
    pub triangles: Vec<[u32; 3]>,
}

impl HalfMesh {
    /// Requires `h = 2⁻ᵏ` with `0 ≤ k ≤ 12`.
    pub fn new(h: f64) -> Result<Self> {
        let m = (1.0 / h).round();
        let ok =
            h.is_finite() && h > 0.0 && (1.0..=4096.0).contains(&m) && (m * h - 1.0).abs() < 1e-12;
        let m = m as usize;
        if !ok || !m.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "mesh spacing h = {h} must be 1/2^k with 2^k <= 4096"
            )));
        }
        let idx = |i: usize, j: usize| (i * (i + 1) / 2 + j) as u32;
        let mut vertices = Vec::with_capacity((m + 1) * (m + 2) / 2);
        for i in 0..=m {
            for j in 0..=i {
                vertices.push(Point::from_unit_square(i as f64 * h, j as f64 * h));
            }
        }
        let mut triangles = Vec::with_capacity(m * m);
        for i in 1..=m {
            for j in 0..i {
                triangles.push([idx(i - 1, j), idx(i, j), idx(i, j + 1)]);
                if j + 2 <= i {
                    triangles.push([idx(i - 1, j), idx(i, j + 1), idx(i - 1, j + 1)]);
                }
            }
        }
        Ok(HalfMesh {
            m,
            h,
            vertices,
            triangles,
        })
    }

    pub fn cell_area(&self) -> f64 {
        0.5 * self.h * self.h
    }

    /// Sum of signed triangle areas with the vertices moved to `positions`.
    pub fn area_with(&self, positions: &[Point]) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| positions[i as usize]);
                0.5 * ((b.x1 - a.x1) * (c.x2 - a.x2) - (b.x2 - a.x2) * (c.x1 - a.x1))
            })
            .sum()
    }

    /// Largest `|f(p) − f(q)| / |p − q|` over mesh edges.
    pub fn lipschitz_estimate<F: Fn(Point) -> f64>(&self, f: F) -> f64 {
        let vals: Vec<f64> = self.vertices.iter().map(|p| f(*p)).collect();
        let mut lip: f64 = 0.0;
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let (a, b) = (a as usize, b as usize);
                let d = self.vertices[a].dist(self.vertices[b]);
                lip = lip.max((vals[a] - vals[b]).abs() / d);
            }
        }
        lip
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_area() {
        let mesh = HalfMesh::new(1.0 / 64.0).unwrap();
        assert_eq!(mesh.triangles.len(), 64 * 64);
        assert_eq!(mesh.vertices.len(), 65 * 66 / 2);
        assert!((mesh.area_with(&mesh.vertices) - 0.5).abs() < 1e-12);
        // every triangle positively oriented with the nominal area
        for t in &mesh.triangles {
            let [a, b, c] = t.map(|i| mesh.vertices[i as usize]);
            let area = 0.5 * ((b.x1 - a.x1) * (c.x2 - a.x2) - (b.x2 - a.x2) * (c.x1 - a.x1));
            assert!((area - mesh.cell_area()).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_dyadic_spacing() {
        assert!(HalfMesh::new(0.3).is_err());
        assert!(HalfMesh::new(1.0 / 48.0).is_err());
        assert!(HalfMesh::new(0.0).is_err());
        assert!(HalfMesh::new(1.0).is_ok());
    }
}
