//! Dirichlet Green function of the rotated square: the image sum over the
//! lattice, and an independent sine-series oracle.
//!
//! The printed image summand is `(1/2π) log(|x−2m−y||−x−2m−y| /
//! (|x*−2m−y||−x*−2m−y|))`. Summed over all shells it equals minus the
//! positive Green function of `−Δ` (compare [`green_oracle`]), so
//! [`green_term`] returns the summand exactly as printed while
//! [`green_image`] returns the positive Green function `G_D = −Σ_n term`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{
    in_closed_domain, reflect, to_unit_square, LatticeIndex, Point, Reflection, CLOSURE_TOL,
};
use crate::lattice::{image_offset, shell, ShellTails, TAIL_POWERS};
use crate::summation::Neumaier;

/// Squared image distances below `SINGULAR_GUARD²` are rejected.
pub const SINGULAR_GUARD: f64 = 1e-12;

/// Default minimum separation for the sine-series oracle.
pub const DEFAULT_SEPARATION: f64 = 0.05;

const FRAC_1_4PI: f64 = 0.25 * std::f64::consts::FRAC_1_PI;

/// How the lattice sum is truncated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShellPolicy {
    /// Minimum shell radius (index max-norm) before the stopping test applies.
    pub r_min: u32,
    /// Stop once the change over one complete shell is below this.
    pub tol: f64,
    /// Hard cap on the shell radius.
    pub r_max: u32,
    /// Add the exact lattice remainder beyond the last complete shell before
    /// testing convergence. Raw shell increments decay only like `r⁻³`.
    pub tail_correction: bool,
}

impl Default for ShellPolicy {
    fn default() -> Self {
        ShellPolicy {
            r_min: 8,
            tol: 1e-10,
            r_max: 256,
            tail_correction: true,
        }
    }
}

impl ShellPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.r_min < 1 || self.r_min > self.r_max {
            return Err(Error::InvalidParameter(format!(
                "shell policy needs 1 <= r_min <= r_max, got r_min = {}, r_max = {}",
                self.r_min, self.r_max
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "shell tolerance must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Configuration of the sine-series oracle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    /// Number of series terms.
    pub k_max: usize,
    /// Minimum admissible `|x − y|`.
    pub separation: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            k_max: 400,
            separation: DEFAULT_SEPARATION,
        }
    }
}

/// Everything the per-index summand needs, precomputed once per pair.
struct PairGeometry {
    y: Complex64,
    /// `x − x*` as a vector.
    dx: Complex64,
    x: Complex64,
    xs: Complex64,
}

impl PairGeometry {
    fn new(x: Point, y: Point) -> Self {
        let xs = reflect(x, Reflection::Star).to_complex();
        let xc = x.to_complex();
        PairGeometry {
            y: y.to_complex(),
            dx: xc - xs,
            x: xc,
            xs,
        }
    }

    /// Summand for the offset `z = 2m`, with the singularity guard.
    #[inline]
    fn term(&self, z: Complex64, guard: bool) -> Result<f64> {
        let w = z + self.y;
        let s3 = (self.xs - w).norm_sqr();
        let s4 = (self.xs + w).norm_sqr();
        if guard {
            let s1 = (self.x - w).norm_sqr();
            let s2 = (self.x + w).norm_sqr();
            let smin = s1.min(s2).min(s3).min(s4);
            if smin < SINGULAR_GUARD * SINGULAR_GUARD {
                return Err(Error::Singular {
                    distance: smin.sqrt(),
                });
            }
        }
        // |x−w|² − |x*−w|² = −2(x−x*)·w and |x+w|² − |x*+w|² = +2(x−x*)·w,
        // so both log ratios are formed without cancellation and vanish
        // exactly when x = x*.
        let t = 2.0 * (self.dx.re * w.re + self.dx.im * w.im);
        Ok(FRAC_1_4PI * ((-t / s3).ln_1p() + (t / s4).ln_1p()))
    }

    /// `Σ_s σ_s q_s^j` for the tail exponents, with `q ∈ {x−y, −x−y, x*−y, −x*−y}`.
    fn tail_moments(&self) -> [Complex64; 4] {
        let (q1, q2) = (self.x - self.y, -self.x - self.y);
        let (q3, q4) = (self.xs - self.y, -self.xs - self.y);
        // Grouped so that x = x* gives exactly zero.
        TAIL_POWERS.map(|j| {
            let j = j as i32;
            (q1.powi(j) - q3.powi(j)) + (q2.powi(j) - q4.powi(j))
        })
    }
}

/// The `n`-th summand of the printed image series.
pub fn green_term(x: Point, y: Point, n: LatticeIndex) -> Result<f64> {
    PairGeometry::new(x, y).term(image_offset(n), true)
}

/// Dirichlet Green function by complete-shell summation of the image series.
///
/// Returns `(G_D(x, y), shells)` where `shells` counts the complete shells
/// `0..=r` that were summed.
pub fn green_image(x: Point, y: Point, policy: ShellPolicy) -> Result<(f64, u32)> {
    policy.validate()?;
    let geo = PairGeometry::new(x, y);
    let moments = if policy.tail_correction {
        Some(geo.tail_moments())
    } else {
        None
    };
    let mut raw = Neumaier::new();
    let mut tails = ShellTails::new();
    let mut previous: Option<f64> = None;
    let mut change = f64::INFINITY;
    for r in 0..=policy.r_max {
        let guard = r <= 1;
        let mut increment = Neumaier::new();
        for n in shell(r) {
            let z = image_offset(n);
            if r > 0 && moments.is_some() {
                tails.add_point(z);
            }
            increment.add(geo.term(z, guard)?);
        }
        raw.add(increment.value());
        let mut value = raw.value();
        if let Some(q) = &moments {
            tails.set_radius(r);
            value += log_tail(q, &tails.remainders());
        }
        change = match previous {
            Some(p) => (value - p).abs(),
            None => f64::INFINITY,
        };
        if r >= policy.r_min && change < policy.tol {
            // `0.0 - value` keeps an exact zero on the diagonal edge positive
            return Ok((0.0 - value, r + 1));
        }
        previous = Some(value);
    }
    Err(Error::ShellNonConvergence {
        r_max: policy.r_max,
        change,
        tol: policy.tol,
    })
}

/// Remainder of the printed series beyond the current shell:
/// `log|q − z| = log|z| − Re Σ_j qʲ/(j zʲ)` and the signed `log|z|` cancel.
fn log_tail(moments: &[Complex64; 4], remainders: &[f64; 4]) -> f64 {
    let s: f64 = TAIL_POWERS
        .iter()
        .zip(moments)
        .zip(remainders)
        .map(|((j, q), t)| q.re * t / *j as f64)
        .sum();
    -2.0 * FRAC_1_4PI * s
}

/// Green function from the Dirichlet eigen-expansion on the unit square,
/// with one index summed in closed form.
///
/// `G(p, q) = Σ_j 2 sin(jπa₁) sin(jπb₁) · sinh(jπ s<) sinh(jπ(1 − s>)) / (jπ sinh jπ)`
/// where the hyperbolic factor runs along the rotated axis with the larger
/// separation, so terms decay like `exp(−jπ|Δ|)`.
pub fn green_oracle(x: Point, y: Point, cfg: OracleConfig) -> Result<f64> {
    if cfg.k_max < 1 {
        return Err(Error::InvalidParameter(
            "oracle k_max must be at least 1".into(),
        ));
    }
    for p in [x, y] {
        if !in_closed_domain(p, CLOSURE_TOL) {
            return Err(Error::OutsideDomain { x1: p.x1, x2: p.x2 });
        }
    }
    let separation = x.dist(y);
    if separation < cfg.separation {
        return Err(Error::Separation {
            separation,
            threshold: cfg.separation,
        });
    }
    let (p1, p2) = to_unit_square(x);
    let (q1, q2) = to_unit_square(y);
    // (a1, b1): sine direction; (a2, b2): hyperbolic direction.
    let ((a1, b1), (a2, b2)) = if (p2 - q2).abs() >= (p1 - q1).abs() {
        ((p1, q1), (p2, q2))
    } else {
        ((p2, q2), (p1, q1))
    };
    let (lo, hi) = if a2 <= b2 { (a2, b2) } else { (b2, a2) };
    let pi = std::f64::consts::PI;
    let mut acc = Neumaier::new();
    for j in 1..=cfg.k_max {
        let k = j as f64 * pi;
        let sines = 2.0 * (k * a1).sin() * (k * b1).sin();
        let hyper = (-k * (hi - lo)).exp()
            * (-(-2.0 * k * lo).exp_m1())
            * (-(-2.0 * k * (1.0 - hi)).exp_m1())
            / (-2.0 * (-2.0 * k).exp_m1());
        acc.add(sines * hyper / k);
    }
    Ok(acc.value())
}
