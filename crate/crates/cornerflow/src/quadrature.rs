//! Adaptive quadrature over the half-domain triangle for integrands with a
//! weak singularity at a target point.
//!
//! The triangle is fanned into sub-triangles `(x, Cᵢ, Cᵢ₊₁)` with apex at
//! the target `x`, each mapped to the unit square by the Duffy transform
//! `y = x + u((Cᵢ − x) + v(Cᵢ₊₁ − Cᵢ))`, whose Jacobian `2·area·u` cancels
//! a `1/|y − x|` singularity at the apex. Rectangles in `(u, v)` are refined
//! anisotropically: each rectangle is compared against its two halvings in
//! `u` and in `v`, and split along the direction that disagrees most.
//! Rectangles close to any other listed singular point (images of the
//! target lying just outside the triangle) are split regardless of the
//! error estimate until they are `refine_ratio` diameters away.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::geometry::{Point, HALF_DOMAIN_CORNERS};
use crate::summation::Neumaier;

/// Gauss–Legendre rule on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule, nodes by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map [-1, 1] → [0, 1]
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Controls for [`integrate_half_domain`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveOptions {
    /// Gauss points per direction.
    pub order: usize,
    /// Absolute tolerance on the summed error estimate (max over components).
    pub tol: f64,
    /// Maximum number of successive splits of one rectangle.
    pub max_depth: u32,
    /// Split rectangles closer than `refine_ratio × diameter` to a singular point.
    pub refine_ratio: f64,
    /// Safety cap on the number of live rectangles.
    pub max_regions: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions {
            order: 8,
            tol: 1e-10,
            max_depth: 60,
            refine_ratio: 1.0,
            max_regions: 200_000,
        }
    }
}

/// Work counters of one adaptive integration.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QuadStats {
    pub regions: usize,
    pub evaluations: usize,
    pub error_estimate: f64,
}

#[derive(Clone, Copy)]
struct Panel {
    apex: Point,
    e1: Point,
    e2: Point,
    /// `2 × signed area`.
    jac: f64,
}

impl Panel {
    #[inline]
    fn map(&self, u: f64, v: f64) -> Point {
        Point::new(
            self.apex.x1 + u * (self.e1.x1 + v * self.e2.x1),
            self.apex.x2 + u * (self.e1.x2 + v * self.e2.x2),
        )
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    U,
    V,
}

#[derive(Clone, Copy)]
struct Rect {
    panel: usize,
    u0: f64,
    u1: f64,
    v0: f64,
    v1: f64,
    depth: u32,
}

impl Rect {
    fn halves(&self, dir: Dir) -> [Rect; 2] {
        let mut a = *self;
        let mut b = *self;
        a.depth += 1;
        b.depth += 1;
        match dir {
            Dir::U => {
                let m = 0.5 * (self.u0 + self.u1);
                a.u1 = m;
                b.u0 = m;
            }
            Dir::V => {
                let m = 0.5 * (self.v0 + self.v1);
                a.v1 = m;
                b.v0 = m;
            }
        }
        [a, b]
    }
}

struct Region<const M: usize> {
    rect: Rect,
    value: [f64; M],
    err: f64,
    dir: Dir,
    halves: [[f64; M]; 2],
    forced: bool,
}

#[derive(PartialEq)]
struct Key {
    forced: bool,
    err: f64,
    idx: usize,
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.forced
            .cmp(&other.forced)
            .then(self.err.total_cmp(&other.err))
            .then(other.idx.cmp(&self.idx))
    }
}

struct Integrator<'a, const M: usize, F> {
    f: &'a F,
    rule: GaussLegendre,
    panels: Vec<Panel>,
    singular: Vec<Point>,
    opts: AdaptiveOptions,
    evaluations: usize,
}

impl<'a, const M: usize, F> Integrator<'a, M, F>
where
    F: Fn(Point) -> [f64; M],
{
    fn rule(&mut self, r: &Rect) -> [f64; M] {
        let p = self.panels[r.panel];
        let (du, dv) = (r.u1 - r.u0, r.v1 - r.v0);
        let mut acc = [Neumaier::new(); M];
        for (xu, wu) in self.rule.nodes.iter().zip(&self.rule.weights) {
            let u = r.u0 + du * xu;
            let scale = wu * du * dv * p.jac * u;
            for (xv, wv) in self.rule.nodes.iter().zip(&self.rule.weights) {
                let v = r.v0 + dv * xv;
                let val = (self.f)(p.map(u, v));
                for c in 0..M {
                    acc[c].add(scale * wv * val[c]);
                }
            }
        }
        self.evaluations += self.rule.len() * self.rule.len();
        acc.map(|a| a.value())
    }

    fn analyse(&mut self, rect: Rect, coarse: Option<[f64; M]>) -> Region<M> {
        let coarse = match coarse {
            Some(c) => c,
            None => self.rule(&rect),
        };
        let [ua, ub] = rect.halves(Dir::U);
        let [va, vb] = rect.halves(Dir::V);
        let (u_a, u_b) = (self.rule(&ua), self.rule(&ub));
        let (v_a, v_b) = (self.rule(&va), self.rule(&vb));
        let disagreement = |a: &[f64; M], b: &[f64; M]| {
            (0..M)
                .map(|c| (coarse[c] - a[c] - b[c]).abs())
                .fold(0.0, f64::max)
        };
        let eu = disagreement(&u_a, &u_b);
        let ev = disagreement(&v_a, &v_b);
        let forced = self.near_singular(&rect);
        let dir = if forced {
            self.longer_direction(&rect)
        } else if eu >= ev {
            Dir::U
        } else {
            Dir::V
        };
        let halves = match dir {
            Dir::U => [u_a, u_b],
            Dir::V => [v_a, v_b],
        };
        let value = std::array::from_fn(|c| halves[0][c] + halves[1][c]);
        Region {
            rect,
            value,
            err: eu.max(ev),
            dir,
            halves,
            forced,
        }
    }

    fn corners(&self, r: &Rect) -> [Point; 4] {
        let p = self.panels[r.panel];
        [
            p.map(r.u0, r.v0),
            p.map(r.u1, r.v0),
            p.map(r.u1, r.v1),
            p.map(r.u0, r.v1),
        ]
    }

    fn near_singular(&self, r: &Rect) -> bool {
        if self.singular.is_empty() || r.depth >= self.opts.max_depth {
            return false;
        }
        let c = self.corners(r);
        let center = (c[0] + c[1] + c[2] + c[3]) * 0.25;
        let radius = c.iter().map(|p| p.dist(center)).fold(0.0, f64::max);
        let diam = 2.0 * radius;
        self.singular
            .iter()
            .any(|s| s.dist(center) - radius < self.opts.refine_ratio * diam)
    }

    fn longer_direction(&self, r: &Rect) -> Dir {
        let c = self.corners(r);
        let lu = c[0].dist(c[1]).max(c[3].dist(c[2]));
        let lv = c[0].dist(c[3]).max(c[1].dist(c[2]));
        if lu >= lv {
            Dir::U
        } else {
            Dir::V
        }
    }
}

/// Integrate `f` over the closed half-domain triangle with a singularity
/// allowed at `apex` and near-singular behaviour near each of `singular`.
pub fn integrate_half_domain<const M: usize, F>(
    apex: Point,
    f: &F,
    singular: &[Point],
    opts: AdaptiveOptions,
) -> Result<([f64; M], QuadStats)>
where
    F: Fn(Point) -> [f64; M],
{
    if opts.order < 2 || !(opts.tol > 0.0) || opts.max_depth < 1 || !(opts.refine_ratio > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "invalid quadrature options {opts:?}"
        )));
    }
    let corners = HALF_DOMAIN_CORNERS;
    let mut panels = Vec::with_capacity(3);
    for i in 0..3 {
        let (a, b) = (corners[i], corners[(i + 1) % 3]);
        let e1 = a - apex;
        let e2 = b - a;
        let jac = e1.x1 * e2.x2 - e1.x2 * e2.x1;
        if jac.abs() > 1e-15 {
            panels.push(Panel { apex, e1, e2, jac });
        }
    }
    // Points coinciding with the apex are handled by the Duffy map.
    let singular: Vec<Point> = singular
        .iter()
        .copied()
        .filter(|s| s.dist(apex) > 1e-13)
        .collect();
    let mut it = Integrator {
        f,
        rule: GaussLegendre::new(opts.order),
        panels,
        singular,
        opts,
        evaluations: 0,
    };

    let mut regions: Vec<Option<Region<M>>> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut total_err = 0.0;
    for p in 0..it.panels.len() {
        let rect = Rect {
            panel: p,
            u0: 0.0,
            u1: 1.0,
            v0: 0.0,
            v1: 1.0,
            depth: 0,
        };
        let reg = it.analyse(rect, None);
        total_err += reg.err;
        heap.push(Key {
            forced: reg.forced,
            err: reg.err,
            idx: regions.len(),
        });
        regions.push(Some(reg));
    }
    let mut live = regions.len();
    let mut finished: Vec<Region<M>> = Vec::new();

    while let Some(top) = heap.peek() {
        if !top.forced && total_err <= opts.tol {
            break;
        }
        let key = heap.pop().expect("peeked");
        let reg = regions[key.idx].take().expect("live region");
        if reg.rect.depth >= opts.max_depth {
            finished.push(reg);
            continue;
        }
        if live >= opts.max_regions {
            return Err(Error::Quadrature {
                tol: opts.tol,
                estimate: total_err,
                regions: live,
            });
        }
        total_err -= reg.err;
        let children = reg.rect.halves(reg.dir);
        for (child, val) in children.into_iter().zip(reg.halves) {
            let r = it.analyse(child, Some(val));
            total_err += r.err;
            heap.push(Key {
                forced: r.forced,
                err: r.err,
                idx: regions.len(),
            });
            regions.push(Some(r));
        }
        live += 1;
        // Guard against drift of the running sum.
        if total_err < 0.0 {
            total_err = 0.0;
        }
    }

    let leaves = regions.iter().flatten().chain(finished.iter());
    let mut acc = [Neumaier::new(); M];
    let mut err = Neumaier::new();
    for reg in leaves {
        for (a, v) in acc.iter_mut().zip(reg.value) {
            a.add(v);
        }
        err.add(reg.err);
    }
    let estimate = err.value();
    let stats = QuadStats {
        regions: live,
        evaluations: it.evaluations,
        error_estimate: estimate,
    };
    if estimate > opts.tol {
        return Err(Error::Quadrature {
            tol: opts.tol,
            estimate,
            regions: live,
        });
    }
    Ok((acc.map(|a| a.value()), stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FRAC_1_SQRT2, SQRT2};

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [2usize, 5, 8, 16] {
            let g = GaussLegendre::new(n);
            let wsum: f64 = g.weights.iter().sum();
            assert!((wsum - 1.0).abs() < 1e-14);
            let deg = 2 * n - 1;
            let val: f64 = g
                .nodes
                .iter()
                .zip(&g.weights)
                .map(|(x, w)| w * x.powi(deg as i32))
                .sum();
            assert!((val - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn area_and_moments_of_the_half_domain() {
        let opts = AdaptiveOptions {
            tol: 1e-13,
            ..AdaptiveOptions::default()
        };
        let apex = Point::new(0.2, 0.6);
        let (v, _) = integrate_half_domain(apex, &|y: Point| [1.0, y.x1, y.x2], &[], opts).unwrap();
        // centroid (√2/6, √2/2)
        assert!((v[0] - 0.5).abs() < 1e-14);
        assert!((v[1] - 0.5 * SQRT2 / 6.0).abs() < 1e-14);
        assert!((v[2] - 0.5 * FRAC_1_SQRT2).abs() < 1e-14);
    }

    #[test]
    fn apex_on_an_edge_or_corner() {
        let opts = AdaptiveOptions {
            tol: 1e-13,
            ..AdaptiveOptions::default()
        };
        for apex in [Point::new(0.3, 0.3), Point::ORIGIN, Point::new(0.0, 0.7)] {
            let (v, _) = integrate_half_domain(apex, &|_: Point| [1.0], &[], opts).unwrap();
            assert!((v[0] - 0.5).abs() < 1e-14, "{apex:?}");
        }
    }

    /// `∫ 1/|y − x|` over the triangle, against a polar-coordinate reference
    /// computed edge by edge in closed form.
    #[test]
    fn inverse_distance_singularity() {
        let x = Point::new(0.2, 0.6);
        let c = HALF_DOMAIN_CORNERS;
        let mut exact = 0.0;
        for i in 0..3 {
            let (a, b) = (c[i], c[(i + 1) % 3]);
            // ∫ over triangle (x, a, b) of 1/r = d ∫ dθ / cos(θ − θ₀) along the edge
            let t = (b - a) * (1.0 / (b - a).norm());
            let n = Point::new(t.x2, -t.x1);
            let d = (a - x).dot(n).abs();
            let sa = (a - x).dot(t);
            let sb = (b - x).dot(t);
            exact += d * ((sb / d).asinh() - (sa / d).asinh()).abs();
        }
        let opts = AdaptiveOptions {
            tol: 1e-12,
            ..AdaptiveOptions::default()
        };
        let (v, _) = integrate_half_domain(x, &|y: Point| [1.0 / y.dist(x)], &[], opts).unwrap();
        assert!((v[0] - exact).abs() < 1e-11, "{} vs {exact}", v[0]);
    }

    #[test]
    fn near_singular_point_outside_triangle() {
        // log|y − s| with s just across the lower-right edge
        let s = Point::new(0.3 + 1e-4, 0.3 - 1e-4);
        let f = |y: Point| [y.dist(s).ln()];
        let tight = AdaptiveOptions {
            tol: 1e-12,
            ..AdaptiveOptions::default()
        };
        let (a, _) = integrate_half_domain(Point::new(0.2, 0.6), &f, &[s], tight).unwrap();
        let (b, _) = integrate_half_domain(Point::new(0.1, 0.9), &f, &[s], tight).unwrap();
        assert!((a[0] - b[0]).abs() < 5e-12);
    }

    #[test]
    fn rejects_bad_options() {
        let bad = AdaptiveOptions {
            order: 1,
            ..AdaptiveOptions::default()
        };
        assert!(integrate_half_domain(Point::ORIGIN, &|_: Point| [1.0], &[], bad).is_err());
    }
}
