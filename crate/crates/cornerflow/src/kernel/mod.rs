//! Symmetry-reduced Biot–Savart kernel and velocity evaluation.
//!
//! For an odd vorticity the stream function is
//! `ψ(x) = −∫_{D₊} [G_D(x, y) − G_D(x̃, y)] ω(y) dy`, and the velocity is
//! `u = (∂₂ψ, −∂₁ψ)`. Differentiating the eight-term log image sum gives
//! `u1 = (2x1/π) ∫ K ω` with `K = Σ_n (A_n − B_n − C_n + D_n)` and
//! `u2 = −(1/2π) ∫ Σ_n Σ_s σ_s (a_s·e_s)/|a_s|² ω`, where `a_s = R_s x − 2m − y`.
//!
//! The eight classes `R_s` come in four pairs `(R, R∘tilde)`, one per letter
//! `A..D`. Each pair combines into `σ G (x1 − a·e) / (|a|²|b|²)` with
//! `e = R e1`, `g = R e2`, `G = a·g` and `b = a − 2x1 e`, which carries the
//! factor `x1` analytically. Lattice indices whose images can come close to
//! the half-domains are summed directly; the rest of the lattice enters
//! through a power series about the pair centre with exact lattice sums
//! (see [`crate::lattice::image_pairs`]).

mod particles;
mod sweep;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{
    in_closed_domain, lattice_shift, reflect, to_unit_square, LatticeIndex, Point, Reflection,
    CLOSURE_TOL,
};
use crate::greens::{green_image, ShellPolicy, SINGULAR_GUARD};
use crate::lattice::{
    binomial_table, image_offset, image_pairs, shell, ShellTails, HALF_CENTER, PAIR_BASES,
};
use crate::quadrature::{integrate_half_domain, AdaptiveOptions};
use crate::summation::Neumaier;

pub use particles::{velocity_particles, ParticleField, ParticleSolver};
pub use sweep::{ratio_rays, ratio_sweep, ratio_sweep_with, RatioEntry, RatioReport, RAY_COUNT};

const FRAC_1_2PI: f64 = 0.5 * std::f64::consts::FRAC_1_PI;

/// Vorticity as a function on the half-domain.
pub trait VorticityField: Sync {
    fn omega(&self, y: Point) -> f64;
}

impl<F: Fn(Point) -> f64 + Sync> VorticityField for F {
    fn omega(&self, y: Point) -> f64 {
        self(y)
    }
}

/// Anything that yields a velocity at a point of the closed square.
pub trait VelocityField: Sync {
    fn velocity_at(&self, x: Point) -> Result<VelocitySample>;
}

impl<F: Fn(Point) -> Result<VelocitySample> + Sync> VelocityField for F {
    fn velocity_at(&self, x: Point) -> Result<VelocitySample> {
        self(x)
    }
}

impl VelocityField for ParticleField {
    fn velocity_at(&self, x: Point) -> Result<VelocitySample> {
        self.velocity(x)
    }
}

/// Numerical controls for velocity evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelConfig {
    /// Truncation of the lattice sums evaluated shell by shell (the combined
    /// kernel and the Green function used for the stream function).
    pub shell_policy: ShellPolicy,
    /// Blob radius `δ_b` of the particle velocity.
    pub blob_radius: f64,
    /// Gauss points per direction in dense quadrature.
    pub quad_order: usize,
    /// Refine quadrature cells within `refine_ratio` diameters of an image
    /// singularity.
    pub refine_ratio: f64,
    pub max_depth: u32,
    /// Absolute error target of the dense quadrature.
    pub quad_tol: f64,
    pub max_regions: usize,
    pub particle_solver: ParticleSolver,
    /// Terms kept in the tree-code multipole expansions.
    pub multipole_order: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            shell_policy: ShellPolicy::default(),
            blob_radius: 0.8 / 64.0,
            quad_order: 8,
            refine_ratio: 1.0,
            max_depth: 60,
            quad_tol: 1e-10,
            max_regions: 200_000,
            particle_solver: ParticleSolver::Tree,
            multipole_order: 36,
        }
    }
}

impl KernelConfig {
    /// Default configuration with `δ_b = 0.8 h`.
    pub fn for_mesh(h: f64) -> Self {
        KernelConfig {
            blob_radius: 0.8 * h,
            ..KernelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.shell_policy.validate()?;
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.blob_radius >= 0.0) || !self.blob_radius.is_finite() {
            return bad("blob_radius must be finite and non-negative");
        }
        if self.quad_order < 2 {
            return bad("quad_order must be at least 2");
        }
        if !(self.refine_ratio > 0.0) {
            return bad("refine_ratio must be positive");
        }
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1");
        }
        if !(self.quad_tol > 0.0) {
            return bad("quad_tol must be positive");
        }
        if self.multipole_order < 4 {
            return bad("multipole_order must be at least 4");
        }
        Ok(())
    }

    pub(crate) fn quad_options(&self) -> AdaptiveOptions {
        AdaptiveOptions {
            order: self.quad_order,
            tol: self.quad_tol,
            max_depth: self.max_depth,
            refine_ratio: self.refine_ratio,
            max_regions: self.max_regions,
        }
    }
}

/// Velocity at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocitySample {
    pub at: Point,
    pub u1: f64,
    pub u2: f64,
}

impl VelocitySample {
    pub fn zero(at: Point) -> Self {
        VelocitySample {
            at,
            u1: 0.0,
            u2: 0.0,
        }
    }

    pub fn norm(&self) -> f64 {
        self.u1.hypot(self.u2)
    }
}

/// The four kernel terms of the `u1` integrand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Term {
    A,
    B,
    C,
    D,
}

/// One kernel term, exactly as printed.
///
/// With `w = 2m + y`: `A = (x2 − w2) w1 / (|x − w|² |x̃ − w|²)`,
/// `B = (x2 − w1) w2 / (|x* − w|² |x̄* − w|²)`,
/// `C = (x2 + w2) w1 / (|x̄ − w|² |−x − w|²)`,
/// `D = (x2 + w1) w2 / (|x̃* − w|² |−x* − w|²)`.
pub fn kernel_term(x: Point, y: Point, n: LatticeIndex, which: Term) -> Result<f64> {
    let w = y + 2.0 * lattice_shift(n);
    let (num, p, q) = match which {
        Term::A => ((x.x2 - w.x2) * w.x1, x, reflect(x, Reflection::Tilde)),
        Term::B => {
            let s = reflect(x, Reflection::Star);
            ((x.x2 - w.x1) * w.x2, s, reflect(s, Reflection::Bar))
        }
        Term::C => ((x.x2 + w.x2) * w.x1, reflect(x, Reflection::Bar), -x),
        Term::D => {
            let s = reflect(x, Reflection::Star);
            ((x.x2 + w.x1) * w.x2, reflect(s, Reflection::Tilde), -s)
        }
    };
    let (dp, dq) = ((p - w).norm_sqr(), (q - w).norm_sqr());
    let d = dp.min(dq);
    if d < SINGULAR_GUARD * SINGULAR_GUARD {
        return Err(Error::Singular { distance: d.sqrt() });
    }
    Ok(num / (dp * dq))
}

/// `A_n − B_n − C_n + D_n`.
pub fn kernel_combination(x: Point, y: Point, n: LatticeIndex) -> Result<f64> {
    let t = |w| kernel_term(x, y, n, w);
    Ok((t(Term::A)? - t(Term::B)?) - (t(Term::C)? - t(Term::D)?))
}

/// The unfactored eight-term bracket of the `u1` integrand for index `n`,
/// i.e. `Σ_s σ_s ∂x2 log|R_s x − 2m − y|`, so that
/// `u1 = (1/2π) Σ_n ∫ bracket · ω`. The sixth numerator is `x2 + 2m2 + y2`,
/// which is what differentiating `log|−x − 2m − y|` in `x2` produces.
pub fn u1_bracket(x: Point, y: Point, n: LatticeIndex) -> Result<f64> {
    let w = y + 2.0 * lattice_shift(n);
    let xs = reflect(x, Reflection::Star);
    let term = |num: f64, p: Point| -> Result<f64> {
        let d = (p - w).norm_sqr();
        if d < SINGULAR_GUARD * SINGULAR_GUARD {
            return Err(Error::Singular { distance: d.sqrt() });
        }
        Ok(num / d)
    };
    let tilde = |p| reflect(p, Reflection::Tilde);
    let bar = |p| reflect(p, Reflection::Bar);
    // Tilde partners are grouped so that each group is exactly zero on the axis.
    let g1 = term(x.x2 - w.x2, x)? - term(x.x2 - w.x2, tilde(x))?;
    let g2 = term(x.x2 - w.x1, xs)? - term(x.x2 - w.x1, bar(xs))?;
    let g3 = term(x.x2 + w.x2, bar(x))? - term(x.x2 + w.x2, -x)?;
    let g4 = term(x.x2 + w.x1, tilde(xs))? - term(x.x2 + w.x1, -xs)?;
    Ok(((g1 - g2) - g3) + g4)
}

/// Per-pair data for the `x`-dependent series remainders.
struct PairSeries {
    sigma: f64,
    e: Complex64,
    g: Complex64,
    /// `R x − z` and `R x̃ − z` for the directly summed indices.
    near_a: Vec<Complex64>,
    near_b: Vec<Complex64>,
}

/// Target-specific precomputation for dense quadrature at `x` (with `x1 ≥ 0`).
pub struct DenseTarget {
    x: Point,
    pairs: Vec<PairSeries>,
    /// Far remainder of the `D` integrand summed over pairs, as
    /// `Re Σ_j far_d[j] β^j` with `β = y − y_c`.
    far_d: Vec<Complex64>,
    /// Far remainder of `K` in the same form.
    far_k: Vec<Complex64>,
}

impl DenseTarget {
    pub fn new(x: Point) -> Self {
        let xc = x.to_complex();
        let xt = reflect(x, Reflection::Tilde).to_complex();
        let order = image_pairs().iter().map(|p| p.order()).max().unwrap_or(0);
        let mut far_d = vec![Complex64::new(0.0, 0.0); order];
        let mut far_k = vec![Complex64::new(0.0, 0.0); order];
        let pairs = image_pairs()
            .iter()
            .map(|pair| {
                let base = pair.base;
                let xa = base.apply(xc);
                let xb = base.apply(xt);
                let near_a = pair.near.iter().map(|&n| xa - image_offset(n)).collect();
                let near_b = pair.near.iter().map(|&n| xb - image_offset(n)).collect();
                let alpha_a = xa - pair.center - HALF_CENTER;
                let alpha_b = xb - pair.center - HALF_CENTER;
                let order = pair.order();
                let binom = binomial_table(order);
                let u = &pair.coeffs;
                // powers and divided differences E_m(α_a, α_b) = (α_a^m − α_b^m)/(α_a − α_b)
                let mut pa = vec![Complex64::new(1.0, 0.0); order];
                let mut pb = vec![Complex64::new(1.0, 0.0); order];
                let mut dd = vec![Complex64::new(0.0, 0.0); order];
                for m in 1..order {
                    pa[m] = pa[m - 1] * alpha_a;
                    pb[m] = pb[m - 1] * alpha_b;
                    dd[m] = alpha_a * dd[m - 1] + pb[m - 1];
                }
                // per pair the far parts are Re(e Σ h_j β^j) and
                // −½ Re(e g Σ k_j β^j), weighted by σ
                let (sigma, e, g) = (pair.sign(), base.e1(), base.e2());
                for j in 0..order {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    let (mut fh, mut fk) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
                    for kk in j..order {
                        let c = u[kk] * binom[kk][j];
                        fh += c * (pa[kk - j] + pb[kk - j]);
                        fk += c * dd[kk - j];
                    }
                    far_d[j] += -sign * sigma * e * fh;
                    far_k[j] += -0.5 * sign * sigma * e * g * fk;
                }
                PairSeries {
                    sigma,
                    e,
                    g,
                    near_a,
                    near_b,
                }
            })
            .collect();
        DenseTarget {
            x,
            pairs,
            far_d,
            far_k,
        }
    }

    /// Images of `x` that can sit on or near the half-domain; the integrands
    /// are singular there.
    pub fn singular_points(&self) -> Vec<Point> {
        let mut pts: Vec<Point> = Vec::new();
        for p in &self.pairs {
            for z in p.near_a.iter().chain(&p.near_b) {
                let q = Point::from_complex(*z);
                if !pts.iter().any(|s| s.dist(q) < 1e-14) {
                    pts.push(q);
                }
            }
        }
        pts
    }

    /// `(K(x, y), Σ_n Σ_s σ_s (a_s·e_s)/|a_s|²)` at `y`.
    #[inline]
    pub fn integrands(&self, y: Point) -> (f64, f64) {
        let yc = y.to_complex();
        let beta = yc - HALF_CENTER;
        let x1 = self.x.x1;
        let mut kern = 0.0;
        let mut dens = 0.0;
        for p in &self.pairs {
            let mut kp = 0.0;
            let mut dp = 0.0;
            for (za, zb) in p.near_a.iter().zip(&p.near_b) {
                let a = za - yc;
                let b = zb - yc;
                let (na, nb) = (a.norm_sqr(), b.norm_sqr());
                let ae = a.re * p.e.re + a.im * p.e.im;
                let be = b.re * p.e.re + b.im * p.e.im;
                let gg = a.re * p.g.re + a.im * p.g.im;
                kp += gg * (x1 - ae) / (na * nb);
                dp += ae / na + be / nb;
            }
            kern += p.sigma * kp;
            dens += p.sigma * dp;
        }
        kern += horner(&self.far_k, beta).re;
        dens += horner(&self.far_d, beta).re;
        (kern, dens)
    }
}

#[inline]
pub(crate) fn horner(c: &[Complex64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &ci in c.iter().rev() {
        acc = acc * z + ci;
    }
    acc
}

/// Representative of `x` in the closed right half, and whether `u1` flips.
pub(crate) fn half_representative(x: Point, tol: f64) -> Result<(Point, bool)> {
    if !x.is_finite() || !in_closed_domain(x, tol) {
        return Err(Error::OutsideDomain { x1: x.x1, x2: x.x2 });
    }
    if x.x1 < 0.0 {
        Ok((reflect(x, Reflection::Tilde), true))
    } else {
        Ok((x, false))
    }
}

/// Velocity by adaptive quadrature of the dense integrals over `D₊`.
///
/// The lattice sums are evaluated through the near/far split with exact
/// far-field series, so the `shell_policy` of `cfg` is not consulted here.
pub fn velocity_dense<F: VorticityField + ?Sized>(
    x: Point,
    omega: &F,
    cfg: &KernelConfig,
) -> Result<VelocitySample> {
    cfg.validate()?;
    let (xr, flip) = half_representative(x, CLOSURE_TOL)?;
    if xr == Point::ORIGIN {
        return Ok(VelocitySample::zero(x));
    }
    let target = DenseTarget::new(xr);
    let sing = target.singular_points();
    // On the axis `u1` vanishes through its prefactor, and `K` is only
    // integrable there as a principal value, so it is not integrated.
    let on_axis = xr.x1 == 0.0;
    let f = |y: Point| {
        let w = omega.omega(y);
        if w == 0.0 {
            return [0.0, 0.0];
        }
        let (k, d) = target.integrands(y);
        [if on_axis { 0.0 } else { k * w }, d * w]
    };
    let (v, _) = integrate_half_domain(xr, &f, &sing, cfg.quad_options())?;
    let u1 = 2.0 * xr.x1 * std::f64::consts::FRAC_1_PI * v[0];
    let u2 = -FRAC_1_2PI * v[1];
    Ok(VelocitySample {
        at: x,
        u1: if flip { -u1 } else { u1 },
        u2,
    })
}

/// How far outside the square [`stream_function`] continues `ψ`, in
/// rotated coordinates.
pub const STREAM_EXTENSION: f64 = 0.25;

/// Stream function `ψ(x) = −∫_{D₊} [G_D(x, y) − G_D(x̃, y)] ω(y) dy`, with
/// the Green function from the shell-summed image series.
///
/// `G_D` is odd under reflection across every edge, so points up to
/// [`STREAM_EXTENSION`] outside the square are evaluated as `−ψ` of their
/// mirror image. This is the smooth continuation of `ψ` and lets central
/// differences straddle an edge.
pub fn stream_function<F: VorticityField + ?Sized>(
    x: Point,
    omega: &F,
    cfg: &KernelConfig,
) -> Result<f64> {
    cfg.validate()?;
    if !x.is_finite() || !in_closed_domain(x, STREAM_EXTENSION) {
        return Err(Error::OutsideDomain { x1: x.x1, x2: x.x2 });
    }
    let (mut xi, mut eta) = to_unit_square(x);
    let mut sign = 1.0;
    for c in [&mut xi, &mut eta] {
        if *c < 0.0 {
            *c = -*c;
            sign = -sign;
        } else if *c > 1.0 {
            *c = 2.0 - *c;
            sign = -sign;
        }
    }
    let inside = if in_closed_domain(x, 0.0) {
        x
    } else {
        Point::from_unit_square(xi, eta)
    };
    Ok(sign * stream_function_closed(inside, omega, cfg)?)
}

fn stream_function_closed<F: VorticityField + ?Sized>(
    x: Point,
    omega: &F,
    cfg: &KernelConfig,
) -> Result<f64> {
    let (xr, flip) = half_representative(x, CLOSURE_TOL)?;
    let xt = reflect(xr, Reflection::Tilde);
    let sing = DenseTarget::new(xr).singular_points();
    let policy = cfg.shell_policy;
    let f = |y: Point| -> [f64; 1] {
        let w = omega.omega(y);
        if w == 0.0 {
            return [0.0];
        }
        // Nodes never coincide with an image, so errors are not expected;
        // a NaN makes the quadrature fail loudly if one does.
        let g = green_image(xr, y, policy).map(|r| r.0).unwrap_or(f64::NAN);
        let gt = green_image(xt, y, policy).map(|r| r.0).unwrap_or(f64::NAN);
        [-(g - gt) * w]
    };
    let (v, _) = integrate_half_domain(xr, &f, &sing, cfg.quad_options())?;
    if v[0].is_nan() {
        return Err(Error::Singular { distance: 0.0 });
    }
    Ok(if flip { -v[0] } else { v[0] })
}

/// Velocity from central differences of [`stream_function`] with step `h`.
pub fn velocity_from_stream<F: VorticityField + ?Sized>(
    x: Point,
    omega: &F,
    cfg: &KernelConfig,
    h: f64,
) -> Result<VelocitySample> {
    let psi = |p: Point| stream_function(p, omega, cfg);
    let d1 = (psi(x + Point::new(h, 0.0))? - psi(x - Point::new(h, 0.0))?) / (2.0 * h);
    let d2 = (psi(x + Point::new(0.0, h))? - psi(x - Point::new(0.0, h))?) / (2.0 * h);
    Ok(VelocitySample {
        at: x,
        u1: d2,
        u2: -d1,
    })
}

/// Combined kernel `Σ_n (A_n − B_n − C_n + D_n)` by complete shells.
///
/// With `tail_correction` the remainder beyond the last shell is added from
/// exact lattice power sums before the stopping test.
pub fn combined_kernel(x: Point, y: Point, policy: ShellPolicy) -> Result<f64> {
    policy.validate()?;
    let moments = policy.tail_correction.then(|| kernel_tail_moments(x, y));
    let mut raw = Neumaier::new();
    let mut tails = ShellTails::new();
    let mut previous: Option<f64> = None;
    let mut change = f64::INFINITY;
    for r in 0..=policy.r_max {
        let mut inc = Neumaier::new();
        for n in shell(r) {
            if r > 0 && moments.is_some() {
                tails.add_point(image_offset(n));
            }
            inc.add(kernel_combination(x, y, n)?);
        }
        raw.add(inc.value());
        let mut value = raw.value();
        if let Some(m) = &moments {
            tails.set_radius(r);
            let t = tails.remainders();
            value += m.iter().zip(t).map(|(c, tj)| c * tj).sum::<f64>();
        }
        if let Some(p) = previous {
            change = (value - p).abs();
        }
        if r >= policy.r_min && change < policy.tol {
            return Ok(value);
        }
        previous = Some(value);
    }
    Err(Error::ShellNonConvergence {
        r_max: policy.r_max,
        change,
        tol: policy.tol,
    })
}

/// Coefficients `c_j` with `Σ_{|n|>R} (A − B − C + D) ≈ Σ_j c_j T_{j}(R)`,
/// `j ∈ {4, 8, 12, 16}`.
fn kernel_tail_moments(x: Point, y: Point) -> [f64; 4] {
    let xc = x.to_complex();
    let xt = reflect(x, Reflection::Tilde).to_complex();
    let yc = y.to_complex();
    let mut out = [0.0; 4];
    for base in PAIR_BASES {
        let qa = base.apply(xc) - yc;
        let qb = base.apply(xt) - yc;
        let eg = base.e1() * base.e2();
        // E_k(q_a, q_b) for k = 0..=15
        let mut e = [Complex64::new(0.0, 0.0); 16];
        let mut pb = Complex64::new(1.0, 0.0);
        for k in 1..16 {
            e[k] = qa * e[k - 1] + pb;
            pb *= qb;
        }
        for (slot, k) in [3usize, 7, 11, 15].iter().enumerate() {
            out[slot] += -0.5 * base.sign() * (eg * e[*k]).re;
        }
    }
    out
}

/// Complete-shell increments `Σ_{shell r} (A_n − B_n − C_n + D_n)` for
/// `r = 0..=r_max`.
pub fn kernel_shell_increments(x: Point, y: Point, r_max: u32) -> Result<Vec<f64>> {
    (0..=r_max)
        .map(|r| {
            let mut inc = Neumaier::new();
            for n in shell(r) {
                inc.add(kernel_combination(x, y, n)?);
            }
            Ok(inc.value())
        })
        .collect()
}

/// Complete-shell increments of the `u1` integrand,
/// `(1/2π) Σ_{shell r}` [`u1_bracket`], for `r = 0..=r_max`. Off the axis
/// this is `(2x1/π)` times [`kernel_shell_increments`]; on the axis every
/// increment is exactly zero.
pub fn u1_shell_increments(x: Point, y: Point, r_max: u32) -> Result<Vec<f64>> {
    (0..=r_max)
        .map(|r| {
            let mut inc = Neumaier::new();
            for n in shell(r) {
                inc.add(u1_bracket(x, y, n)?);
            }
            Ok(FRAC_1_2PI * inc.value())
        })
        .collect()
}
