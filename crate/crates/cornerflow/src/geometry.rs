//! The rotated unit square `D`, its half `D₊ = {x ∈ D : x1 > 0}`, the
//! reflections used by the image construction, and boundary markers.
//!
//! `D = {0 < x1 + x2 < √2, 0 < x2 − x1 < √2}` has corners `(0,0)`,
//! `(√2/2, √2/2)`, `(0, √2)` and `(−√2/2, √2/2)`. In the rotated frame
//! `ξ = (x1 + x2)/√2`, `η = (x2 − x1)/√2` it is the open unit square and
//! `D₊` is the triangle `0 < η < ξ < 1`.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const SQRT2: f64 = std::f64::consts::SQRT_2;
pub const FRAC_1_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Slack used when deciding membership of a closed set.
pub const CLOSURE_TOL: f64 = 1e-12;

/// A position in the domain frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x1: f64,
    pub x2: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x1: 0.0, x2: 0.0 };

    pub const fn new(x1: f64, x2: f64) -> Self {
        Point { x1, x2 }
    }

    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x2)
    }

    pub fn norm_sqr(self) -> f64 {
        self.x1 * self.x1 + self.x2 * self.x2
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x1 * other.x1 + self.x2 * other.x2
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.x1, self.x2)
    }

    pub fn from_complex(z: Complex64) -> Self {
        Point::new(z.re, z.im)
    }

    /// Build a point from rotated-square coordinates.
    pub fn from_unit_square(xi: f64, eta: f64) -> Self {
        Point::new((xi - eta) * FRAC_1_SQRT2, (xi + eta) * FRAC_1_SQRT2)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x1 + o.x1, self.x2 + o.x2)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x1 - o.x1, self.x2 - o.x2)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x1, -self.x2)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x1 * s, self.x2 * s)
    }
}

impl Mul<Point> for f64 {
    type Output = Point;
    fn mul(self, p: Point) -> Point {
        p * self
    }
}

/// The three elementary reflections.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Reflection {
    /// `(x1, x2) ↦ (−x1, x2)`, across the vertical axis.
    Tilde,
    /// `(x1, x2) ↦ (x1, −x2)`.
    Bar,
    /// `(x1, x2) ↦ (x2, x1)`, across the diagonal.
    Star,
}

pub fn reflect(p: Point, kind: Reflection) -> Point {
    match kind {
        Reflection::Tilde => Point::new(-p.x1, p.x2),
        Reflection::Bar => Point::new(p.x1, -p.x2),
        Reflection::Star => Point::new(p.x2, p.x1),
    }
}

/// Index `n = (n1, n2)` of the image lattice.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct LatticeIndex {
    pub n1: i32,
    pub n2: i32,
}

impl LatticeIndex {
    pub const ZERO: LatticeIndex = LatticeIndex { n1: 0, n2: 0 };

    pub const fn new(n1: i32, n2: i32) -> Self {
        LatticeIndex { n1, n2 }
    }

    /// Max-norm `max(|n1|, |n2|)`, the shell the index belongs to.
    pub fn shell(self) -> u32 {
        self.n1.unsigned_abs().max(self.n2.unsigned_abs())
    }
}

/// `m = ((n1 − n2)/√2, (n1 + n2)/√2)`.
pub fn lattice_shift(n: LatticeIndex) -> Point {
    let (n1, n2) = (f64::from(n.n1), f64::from(n.n2));
    Point::new((n1 - n2) * FRAC_1_SQRT2, (n1 + n2) * FRAC_1_SQRT2)
}

/// Sub-regions of the square.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RegionSpec {
    Full,
    Half,
    Cone { a: f64 },
}

impl RegionSpec {
    /// The cone `D_a = {x ∈ D₊ : a·x1 ≥ x2}`; requires `a > 1`.
    pub fn cone(a: f64) -> Result<Self> {
        if a.is_finite() && a > 1.0 {
            Ok(RegionSpec::Cone { a })
        } else {
            Err(Error::InvalidParameter(format!(
                "cone slope a = {a} must exceed 1"
            )))
        }
    }
}

pub fn contains(p: Point, r: RegionSpec) -> bool {
    let in_square = {
        let s = p.x1 + p.x2;
        let d = p.x2 - p.x1;
        s > 0.0 && s < SQRT2 && d > 0.0 && d < SQRT2
    };
    match r {
        RegionSpec::Full => in_square,
        RegionSpec::Half => in_square && p.x1 > 0.0,
        RegionSpec::Cone { a } => in_square && p.x1 > 0.0 && a * p.x1 >= p.x2,
    }
}

/// Rotated coordinates `(ξ, η)`; `D` maps onto the open unit square.
pub fn to_unit_square(p: Point) -> (f64, f64) {
    ((p.x1 + p.x2) * FRAC_1_SQRT2, (p.x2 - p.x1) * FRAC_1_SQRT2)
}

/// Whether `p` lies in the closed square, up to `tol` in rotated coordinates.
pub fn in_closed_domain(p: Point, tol: f64) -> bool {
    let (xi, eta) = to_unit_square(p);
    xi >= -tol && xi <= 1.0 + tol && eta >= -tol && eta <= 1.0 + tol
}

/// Whether `p` lies in the closed half-domain `0 ≤ η ≤ ξ ≤ 1`, up to `tol`.
pub fn in_closed_half(p: Point, tol: f64) -> bool {
    let (xi, eta) = to_unit_square(p);
    eta >= -tol && xi <= 1.0 + tol && p.x1 >= -tol
}

/// Representative of `p` in the closed right half together with the sign
/// an odd field picks up: `f(p) = sign · f(rep)`.
pub fn odd_representative(p: Point) -> Result<(Point, f64)> {
    if !p.is_finite() || !in_closed_domain(p, CLOSURE_TOL) {
        return Err(Error::OutsideDomain { x1: p.x1, x2: p.x2 });
    }
    if p.x1 < 0.0 {
        Ok((reflect(p, Reflection::Tilde), -1.0))
    } else {
        Ok((p, 1.0))
    }
}

/// The four edges of the square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Edge {
    /// `x2 = x1`, from the origin towards `(√2/2, √2/2)`.
    LowerRight,
    /// `x2 = −x1`, from the origin towards `(−√2/2, √2/2)`.
    LowerLeft,
    /// `x1 + x2 = √2`, from `(0, √2)` towards `(√2/2, √2/2)`.
    UpperRight,
    /// `x2 − x1 = √2`, from `(0, √2)` towards `(−√2/2, √2/2)`.
    UpperLeft,
}

impl Edge {
    pub const ALL: [Edge; 4] = [
        Edge::LowerRight,
        Edge::LowerLeft,
        Edge::UpperRight,
        Edge::UpperLeft,
    ];

    /// The corner the arc coordinate is measured from.
    pub fn corner(self) -> Point {
        match self {
            Edge::LowerRight | Edge::LowerLeft => Point::ORIGIN,
            Edge::UpperRight | Edge::UpperLeft => Point::new(0.0, SQRT2),
        }
    }

    /// Unit direction pointing away from [`Edge::corner`].
    pub fn direction(self) -> Point {
        match self {
            Edge::LowerRight => Point::new(FRAC_1_SQRT2, FRAC_1_SQRT2),
            Edge::LowerLeft => Point::new(-FRAC_1_SQRT2, FRAC_1_SQRT2),
            Edge::UpperRight => Point::new(FRAC_1_SQRT2, -FRAC_1_SQRT2),
            Edge::UpperLeft => Point::new(-FRAC_1_SQRT2, -FRAC_1_SQRT2),
        }
    }

    /// Outward unit normal.
    pub fn outward_normal(self) -> Point {
        match self {
            Edge::LowerRight => Point::new(FRAC_1_SQRT2, -FRAC_1_SQRT2),
            Edge::LowerLeft => Point::new(-FRAC_1_SQRT2, -FRAC_1_SQRT2),
            Edge::UpperRight => Point::new(FRAC_1_SQRT2, FRAC_1_SQRT2),
            Edge::UpperLeft => Point::new(-FRAC_1_SQRT2, FRAC_1_SQRT2),
        }
    }

    /// Point at arc distance `s` from the corner (no range check).
    pub fn at(self, s: f64) -> Point {
        self.corner() + self.direction() * s
    }

    /// Arc coordinate of the orthogonal projection of `p` onto the edge line.
    pub fn project(self, p: Point) -> f64 {
        (p - self.corner()).dot(self.direction())
    }
}

/// A material point on the boundary, tracked by its arc coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryMarker {
    pub edge: Edge,
    pub s: f64,
    pub omega0: f64,
}

impl BoundaryMarker {
    pub fn new(edge: Edge, s: f64, omega0: f64) -> Result<Self> {
        check_arc(s)?;
        Ok(BoundaryMarker { edge, s, omega0 })
    }
}

fn check_arc(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::ArcOutOfRange(s))
    }
}

pub fn marker_position(m: &BoundaryMarker) -> Result<Point> {
    check_arc(m.s)?;
    Ok(m.edge.at(m.s))
}

/// Corners of the closed half-domain triangle, counter-clockwise.
pub const HALF_DOMAIN_CORNERS: [Point; 3] = [
    Point::new(0.0, 0.0),
    Point::new(FRAC_1_SQRT2, FRAC_1_SQRT2),
    Point::new(0.0, SQRT2),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflections_match_definitions() {
        assert_eq!(
            reflect(Point::new(1.0, 2.0), Reflection::Tilde),
            Point::new(-1.0, 2.0)
        );
        assert_eq!(
            reflect(Point::new(1.0, 2.0), Reflection::Bar),
            Point::new(1.0, -2.0)
        );
        assert_eq!(
            reflect(Point::new(0.3, 0.3), Reflection::Star),
            Point::new(0.3, 0.3)
        );
    }

    #[test]
    fn lattice_shift_examples() {
        assert_eq!(lattice_shift(LatticeIndex::ZERO), Point::ORIGIN);
        let m = lattice_shift(LatticeIndex::new(1, 0));
        assert!((m.x1 - FRAC_1_SQRT2).abs() < 1e-15);
        assert!((m.x2 - FRAC_1_SQRT2).abs() < 1e-15);
        let m = lattice_shift(LatticeIndex::new(1, 1));
        assert_eq!(m.x1, 0.0);
        assert!((m.x2 - SQRT2).abs() < 1e-15);
    }

    #[test]
    fn region_membership_examples() {
        assert!(!contains(Point::ORIGIN, RegionSpec::Full));
        assert!(contains(
            Point::new(0.1, 0.15),
            RegionSpec::cone(2.0).unwrap()
        ));
        assert!(!contains(Point::new(-0.1, 0.2), RegionSpec::Half));
        assert!(contains(Point::new(-0.1, 0.2), RegionSpec::Full));
        assert!(RegionSpec::cone(1.0).is_err());
    }

    #[test]
    fn rotated_corners() {
        let (a, b) = to_unit_square(Point::ORIGIN);
        assert_eq!((a, b), (0.0, 0.0));
        let (a, b) = to_unit_square(Point::new(SQRT2 / 2.0, SQRT2 / 2.0));
        assert!((a - 1.0).abs() < 1e-15 && b.abs() < 1e-15);
        let (a, b) = to_unit_square(Point::new(0.0, SQRT2));
        assert!((a - 1.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
    }

    #[test]
    fn odd_representative_examples() {
        assert_eq!(
            odd_representative(Point::new(0.2, 0.5)).unwrap(),
            (Point::new(0.2, 0.5), 1.0)
        );
        assert_eq!(
            odd_representative(Point::new(-0.2, 0.5)).unwrap(),
            (Point::new(0.2, 0.5), -1.0)
        );
        assert_eq!(
            odd_representative(Point::new(0.0, 0.5)).unwrap(),
            (Point::new(0.0, 0.5), 1.0)
        );
        assert!(odd_representative(Point::new(0.9, 0.1)).is_err());
    }

    #[test]
    fn marker_examples() {
        let m = BoundaryMarker::new(Edge::LowerRight, 0.5, 0.0).unwrap();
        let p = marker_position(&m).unwrap();
        assert!((p.x1 - 0.35355339059327373).abs() < 1e-15);
        assert!((p.x2 - 0.35355339059327373).abs() < 1e-15);
        let m = BoundaryMarker::new(Edge::LowerLeft, 0.5, 0.0).unwrap();
        let p = marker_position(&m).unwrap();
        assert!((p.x1 + 0.35355339059327373).abs() < 1e-15);
        let tiny = BoundaryMarker {
            edge: Edge::LowerRight,
            s: 1e-9,
            omega0: 0.0,
        };
        assert!((marker_position(&tiny).unwrap().norm() - 1e-9).abs() < 1e-24);
        assert!(BoundaryMarker::new(Edge::UpperLeft, 1.0, 0.0).is_err());
        assert!(marker_position(&BoundaryMarker {
            edge: Edge::UpperLeft,
            s: 0.0,
            omega0: 0.0
        })
        .is_err());
    }

    #[test]
    fn edges_lie_on_the_boundary() {
        for e in Edge::ALL {
            for s in [0.1, 0.5, 0.9] {
                let (xi, eta) = to_unit_square(e.at(s));
                let on = [xi.abs(), (xi - 1.0).abs(), eta.abs(), (eta - 1.0).abs()]
                    .into_iter()
                    .fold(f64::INFINITY, f64::min);
                assert!(on < 1e-15, "{e:?} {s}");
                assert!(e.outward_normal().dot(e.direction()).abs() < 1e-16);
                let inward = e.at(s) - e.outward_normal() * 1e-3;
                assert!(contains(inward, RegionSpec::Full));
            }
        }
    }
}
