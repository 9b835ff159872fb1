//! The image lattice `2m`, its power sums, and the reflection/rotation
//! classes of the eight-fold image construction.
//!
//! Writing points as complex numbers, the lattice offset is
//! `z_n = 2m = √2(1 + i)(n1 + i n2)`, a scaled and rotated copy of the
//! Gaussian integers. Power sums `Σ' z⁻ʲ` over complete max-norm shells
//! vanish unless `4 | j` because every shell is invariant under a quarter
//! turn, and the surviving ones follow from the Eisenstein series of
//! `Z[i]`. These exact values give the remainder of any truncated image sum
//! beyond a complete shell, and the far-field expansions used by the fast
//! velocity evaluators.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::geometry::{LatticeIndex, FRAC_1_SQRT2, SQRT2};
use crate::summation::ComplexNeumaier;

/// `Σ' w⁻⁴` over the Gaussian integers, `Γ(1/4)⁸ / (960 π²)`.
pub const GAUSSIAN_G4: f64 = 3.151_212_002_153_897_5;

/// Exponents carried by the tail expansions.
pub const TAIL_POWERS: [usize; 4] = [4, 8, 12, 16];

/// The lattice offset `2m` as a complex number.
#[inline]
pub fn image_offset(n: LatticeIndex) -> Complex64 {
    let (n1, n2) = (f64::from(n.n1), f64::from(n.n2));
    Complex64::new(SQRT2 * (n1 - n2), SQRT2 * (n1 + n2))
}

/// Indices with `max(|n1|, |n2|) = r` in a fixed order: bottom row left to
/// right, top row left to right, then the two side columns bottom to top.
pub fn shell(r: u32) -> impl Iterator<Item = LatticeIndex> {
    let r = r as i32;
    let rows = (-r..=r).flat_map(move |n1| {
        let bottom = LatticeIndex::new(n1, -r);
        let top = LatticeIndex::new(n1, r);
        std::iter::once(bottom).chain((r > 0).then_some(top))
    });
    let sides =
        (-r + 1..r).flat_map(move |n2| [LatticeIndex::new(-r, n2), LatticeIndex::new(r, n2)]);
    rows.chain(sides)
}

/// Number of indices in shell `r`.
pub fn shell_len(r: u32) -> usize {
    if r == 0 {
        1
    } else {
        8 * r as usize
    }
}

/// Eisenstein sums `G_{4l} = Σ' w^{-4l}` of the Gaussian integers for
/// `l = 1..=lmax`, from the Weierstrass coefficient recurrence with `g3 = 0`.
pub fn gaussian_eisenstein(lmax: usize) -> Vec<f64> {
    let kmax = 2 * lmax;
    // c_k = (2k − 1) G_{2k}
    let mut c = vec![0.0_f64; kmax + 1];
    if kmax >= 2 {
        c[2] = 3.0 * GAUSSIAN_G4;
    }
    for k in 4..=kmax {
        let s: f64 = (2..=k - 2).map(|m| c[m] * c[k - m]).sum();
        c[k] = 3.0 * s / (((2 * k + 1) * (k - 3)) as f64);
    }
    (1..=lmax)
        .map(|l| c[2 * l] / ((4 * l - 1) as f64))
        .collect()
}

/// Exact `S_j = Σ' z_n^{-j}` for `j` a positive multiple of 4 (zero otherwise).
pub fn lattice_power_sum(j: usize) -> f64 {
    if j == 0 || !j.is_multiple_of(4) {
        return 0.0;
    }
    let l = j / 4;
    let g = gaussian_eisenstein(l)[l - 1];
    // z⁴ = −16 w⁴
    g / (-16.0_f64).powi(l as i32)
}

/// Running partial sums of `z⁻ʲ` over complete shells, giving the exact
/// remainders `T_j(R) = Σ_{|n|∞ > R} z⁻ʲ` for `j ∈ {4, 8, 12, 16}`.
#[derive(Clone, Debug)]
pub struct ShellTails {
    exact: [f64; 4],
    partial: [ComplexNeumaier; 4],
    radius: u32,
}

impl Default for ShellTails {
    fn default() -> Self {
        Self::new()
    }
}

impl ShellTails {
    /// State after shell 0 (which contributes nothing: `z = 0` is excluded).
    pub fn new() -> Self {
        ShellTails {
            exact: TAIL_POWERS.map(lattice_power_sum),
            partial: [ComplexNeumaier::new(); 4],
            radius: 0,
        }
    }

    /// Fold in shell `radius + 1`.
    pub fn advance(&mut self) {
        self.radius += 1;
        for n in shell(self.radius) {
            self.add_point(image_offset(n));
        }
    }

    /// Fold in a single lattice point (callers iterating shells themselves).
    #[inline]
    pub fn add_point(&mut self, z: Complex64) {
        let inv4 = z.inv().powi(4);
        let mut p = inv4;
        for acc in &mut self.partial {
            acc.add(p);
            p *= inv4;
        }
    }

    /// Mark that shell `r` has been folded in through [`Self::add_point`].
    pub fn set_radius(&mut self, r: u32) {
        self.radius = r;
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// `T_j(R)` for the four tracked exponents.
    pub fn remainders(&self) -> [f64; 4] {
        // Partial sums are real up to rounding; the imaginary parts cancel by symmetry.
        std::array::from_fn(|i| self.exact[i] - self.partial[i].value().re)
    }
}

/// One of the eight isometries `v ↦ λv` (rotation) or `v ↦ λv̄`
/// (reflection) generated by tilde, bar and star.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImageClass {
    pub lambda: Complex64,
    pub reflection: bool,
}

impl ImageClass {
    pub const fn new(lambda: Complex64, reflection: bool) -> Self {
        ImageClass { lambda, reflection }
    }

    #[inline]
    pub fn apply(&self, v: Complex64) -> Complex64 {
        if self.reflection {
            self.lambda * v.conj()
        } else {
            self.lambda * v
        }
    }

    #[inline]
    pub fn apply_inverse(&self, v: Complex64) -> Complex64 {
        if self.reflection {
            self.lambda * v.conj()
        } else {
            self.lambda.conj() * v
        }
    }

    /// `+1` for rotations (numerator terms of the log image sum), `−1` for reflections.
    #[inline]
    pub fn sign(&self) -> f64 {
        if self.reflection {
            -1.0
        } else {
            1.0
        }
    }

    /// Image of the unit vector `e1`.
    #[inline]
    pub fn e1(&self) -> Complex64 {
        self.lambda
    }

    /// Image of the unit vector `e2`.
    #[inline]
    pub fn e2(&self) -> Complex64 {
        if self.reflection {
            Complex64::new(self.lambda.im, -self.lambda.re)
        } else {
            Complex64::new(-self.lambda.im, self.lambda.re)
        }
    }

    /// `self ∘ tilde`.
    pub fn compose_tilde(&self) -> ImageClass {
        ImageClass::new(-self.lambda, !self.reflection)
    }
}

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Identity `x`.
pub const ID: ImageClass = ImageClass::new(ONE, false);
/// `x* = (x2, x1)`.
pub const STAR: ImageClass = ImageClass::new(I, true);
/// `x̄ = (x1, −x2)`.
pub const BAR: ImageClass = ImageClass::new(ONE, true);
/// `x̃* = (−x2, x1)`.
pub const TILDE_STAR: ImageClass = ImageClass::new(I, false);

/// The four pair bases; each is paired with `base ∘ tilde`. Their signs
/// reproduce `A − B − C + D`.
pub const PAIR_BASES: [ImageClass; 4] = [ID, STAR, BAR, TILDE_STAR];

/// Circumcentre `(0, √2/2)` of the half-domain triangle; both halves of the
/// square lie within distance `√2/2` of it.
pub const HALF_CENTER: Complex64 = Complex64::new(0.0, FRAC_1_SQRT2);

/// Expansion data shared by a pair `(base, base ∘ tilde)`.
#[derive(Clone, Debug)]
pub struct ImagePair {
    pub base: ImageClass,
    pub partner: ImageClass,
    /// `base(y_c) − y_c`, shared by both members since `y_c` is on the axis.
    pub center: Complex64,
    /// Indices whose images can meet the closed half-domains.
    pub near: Vec<LatticeIndex>,
    /// `coeffs[k] = Σ_{far n} (z_n − center)^{−(k+1)}`, shell-summed.
    pub coeffs: Vec<Complex64>,
    /// Convergence ratio `√2 / min_far |z_n − center|`.
    pub ratio: f64,
}

impl ImagePair {
    /// Both members with the pair's sign convention `(class, sign)`.
    pub fn members(&self) -> [ImageClass; 2] {
        [self.base, self.partner]
    }

    /// Pair sign (`+1` for `A`, `D`; `−1` for `B`, `C`).
    pub fn sign(&self) -> f64 {
        self.base.sign()
    }

    /// Number of retained expansion terms.
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }
}

const NEAR_RADIUS: f64 = SQRT2 * (1.0 + 1e-9);
const DIRECT_RADIUS: u32 = 32;
const SERIES_EPS: f64 = 1e-17;

fn build_pair(base: ImageClass) -> ImagePair {
    let center = base.apply(HALF_CENTER) - HALF_CENTER;
    let mut near = Vec::new();
    let mut far_min = f64::INFINITY;
    for r in 0..=3 {
        for n in shell(r) {
            let d = (image_offset(n) - center).norm();
            if d <= NEAR_RADIUS {
                near.push(n);
            } else {
                far_min = far_min.min(d);
            }
        }
    }
    let ratio = SQRT2 / far_min;
    let order = (SERIES_EPS.ln() / ratio.ln()).ceil() as usize + 1;

    let mut sums = vec![ComplexNeumaier::new(); order];
    let mut tails = ShellTails::new();
    for r in 0..=DIRECT_RADIUS {
        for n in shell(r) {
            let z = image_offset(n);
            if r > 0 {
                tails.add_point(z);
            }
            if near.contains(&n) {
                continue;
            }
            let inv = (z - center).inv();
            let mut p = inv;
            for acc in &mut sums {
                acc.add(p);
                p *= inv;
            }
        }
    }
    tails.set_radius(DIRECT_RADIUS);
    let t = tails.remainders();

    let coeffs = (0..order)
        .map(|idx| {
            let k = idx + 1;
            let mut tail = Complex64::new(0.0, 0.0);
            for (m, tm) in TAIL_POWERS.iter().zip(t) {
                if *m >= k {
                    tail += center.powi((m - k) as i32) * binomial(m - 1, m - k) * tm;
                }
            }
            sums[idx].value() + tail
        })
        .collect();

    ImagePair {
        base,
        partner: base.compose_tilde(),
        center,
        near,
        coeffs,
        ratio,
    }
}

/// The four image pairs with their far-field data, built once.
pub fn image_pairs() -> &'static [ImagePair; 4] {
    static PAIRS: OnceLock<[ImagePair; 4]> = OnceLock::new();
    PAIRS.get_or_init(|| PAIR_BASES.map(build_pair))
}

/// Binomial coefficient as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Table `C(k, j)` for `0 ≤ j ≤ k < n`, row-major by `k`.
pub fn binomial_table(n: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut row = vec![1.0; k + 1];
        for j in 1..k {
            row[j] = rows[k - 1][j - 1] + rows[k - 1][j];
        }
        rows.push(row);
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{lattice_shift, reflect, Point, Reflection};

    #[test]
    fn shells_are_complete_and_distinct() {
        for r in 0..6 {
            let v: Vec<_> = shell(r).collect();
            assert_eq!(v.len(), shell_len(r));
            assert!(v.iter().all(|n| n.shell() == r));
            let mut s = v.clone();
            s.sort_by_key(|n| (n.n1, n.n2));
            s.dedup();
            assert_eq!(s.len(), v.len());
        }
    }

    #[test]
    fn offset_is_twice_the_shift() {
        for n in shell(3) {
            let m = lattice_shift(n);
            let z = image_offset(n);
            assert!((z.re - 2.0 * m.x1).abs() < 1e-14 && (z.im - 2.0 * m.x2).abs() < 1e-14);
        }
    }

    #[test]
    fn eisenstein_relations() {
        let g = gaussian_eisenstein(3);
        assert!((g[0] - GAUSSIAN_G4).abs() < 1e-15);
        assert!((g[1] - 3.0 * GAUSSIAN_G4 * GAUSSIAN_G4 / 7.0).abs() < 1e-14);
        assert!((g[2] - 18.0 * GAUSSIAN_G4.powi(3) / 143.0).abs() < 1e-13);
    }

    /// Brute shell sums of `w⁻⁸` converge like `R⁻⁶`, so a moderate radius
    /// pins `G₈` independently of the recurrence.
    #[test]
    fn eisenstein_g8_matches_brute_sum() {
        let mut acc = ComplexNeumaier::new();
        for r in 1..=60 {
            for n in shell(r) {
                acc.add(Complex64::new(f64::from(n.n1), f64::from(n.n2)).powi(-8));
            }
        }
        assert!((acc.value().re - gaussian_eisenstein(2)[1]).abs() < 1e-11);
    }

    /// `G₄` by two-stage Richardson extrapolation of shell partial sums,
    /// whose remainder behaves like `aR⁻² + bR⁻³ + …`.
    #[test]
    fn eisenstein_g4_matches_extrapolated_brute_sum() {
        let partial = |rmax: u32| {
            let mut acc = ComplexNeumaier::new();
            for r in 1..=rmax {
                for n in shell(r) {
                    acc.add(Complex64::new(f64::from(n.n1), f64::from(n.n2)).powi(-4));
                }
            }
            acc.value().re
        };
        let (p1, p2, p3) = (partial(100), partial(200), partial(400));
        let (e1, e2) = ((4.0 * p2 - p1) / 3.0, (4.0 * p3 - p2) / 3.0);
        let extrapolated = (8.0 * e2 - e1) / 7.0;
        assert!((extrapolated - GAUSSIAN_G4).abs() < 1e-10, "{extrapolated}");
    }

    #[test]
    fn remainders_shrink_and_match_direct_difference() {
        let mut t = ShellTails::new();
        for _ in 0..10 {
            t.advance();
        }
        let r10 = t.remainders();
        let mut direct = ComplexNeumaier::new();
        for r in 11..=40 {
            for n in shell(r) {
                direct.add(image_offset(n).powi(-8));
            }
        }
        for _ in 10..40 {
            t.advance();
        }
        let r40 = t.remainders();
        assert!((r10[1] - direct.value().re - r40[1]).abs() < 1e-17);
        assert!(r10[0].abs() < 1e-3 && r10[0].abs() > r40[0].abs() * 10.0);
    }

    #[test]
    fn class_actions_match_reflections() {
        let x = Point::new(0.3, -0.7);
        let xc = x.to_complex();
        let as_pt = |z: Complex64| Point::from_complex(z);
        let star = reflect(x, Reflection::Star);
        let bar = reflect(x, Reflection::Bar);
        let tilde = reflect(x, Reflection::Tilde);
        assert_eq!(as_pt(ID.apply(xc)), x);
        assert_eq!(as_pt(STAR.apply(xc)), star);
        assert_eq!(as_pt(BAR.apply(xc)), bar);
        assert_eq!(
            as_pt(TILDE_STAR.apply(xc)),
            reflect(star, Reflection::Tilde)
        );
        assert_eq!(as_pt(ID.compose_tilde().apply(xc)), tilde);
        assert_eq!(
            as_pt(STAR.compose_tilde().apply(xc)),
            reflect(tilde, Reflection::Star)
        );
        for c in PAIR_BASES.iter().flat_map(|b| [*b, b.compose_tilde()]) {
            assert_eq!(c.apply_inverse(c.apply(xc)), xc);
            assert_eq!(c.apply(ONE), c.e1());
            assert_eq!(c.apply(I), c.e2());
        }
    }

    #[test]
    fn near_sets_are_the_adjacent_images() {
        let pairs = image_pairs();
        let sets: Vec<Vec<(i32, i32)>> = pairs
            .iter()
            .map(|p| {
                let mut v: Vec<_> = p.near.iter().map(|n| (n.n1, n.n2)).collect();
                v.sort();
                v
            })
            .collect();
        assert_eq!(sets[0], vec![(0, 0)]);
        assert_eq!(sets[1], vec![(0, -1), (0, 0)]);
        assert_eq!(sets[2], vec![(-1, -1), (-1, 0), (0, -1), (0, 0)]);
        assert_eq!(sets[3], vec![(-1, 0), (0, 0)]);
        for p in pairs {
            assert!(p.ratio < 0.71);
        }
    }

    /// Far coefficients against a brute shell sum carried to a larger radius
    /// with its own remainder correction.
    #[test]
    fn far_coefficients_match_brute_sums() {
        let pair = &image_pairs()[1];
        for k in [1usize, 2, 3, 4, 7] {
            let mut acc = ComplexNeumaier::new();
            let mut tails = ShellTails::new();
            let rmax = 90;
            for r in 0..=rmax {
                for n in shell(r) {
                    let z = image_offset(n);
                    if r > 0 {
                        tails.add_point(z);
                    }
                    if !pair.near.contains(&n) {
                        acc.add((z - pair.center).powi(-(k as i32)));
                    }
                }
            }
            tails.set_radius(rmax);
            let t = tails.remainders();
            let mut tail = Complex64::new(0.0, 0.0);
            for (m, tm) in TAIL_POWERS.iter().zip(t) {
                if *m >= k {
                    tail += pair.center.powi((m - k) as i32) * binomial(m - 1, m - k) * tm;
                }
            }
            let brute = acc.value() + tail;
            assert!((brute - pair.coeffs[k - 1]).norm() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(3, 5), 0.0);
        let t = binomial_table(8);
        assert_eq!(t[7][3], 35.0);
        assert_eq!(t[0][0], 1.0);
    }
}
