//! Initial vorticity fields, odd with respect to the vertical axis.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::{to_unit_square, Point};
use crate::kernel::VorticityField;

/// Ramp width of [`Preset::RampPatch`].
pub const RAMP_EPS: f64 = 0.1;

/// Grid resolution (cells per rotated axis) used for the preset norms.
pub const NORM_GRID: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    /// `ω₀ ≡ 0`.
    Zero,
    /// `ω₀ = 4 sin(πξ) sin(πη) (ξ − η)` in rotated coordinates.
    SinPatch,
    /// `ω₀ = sign(x1) min(1, |x1|/ε)` with `ε = 0.1`.
    RampPatch,
}

/// Sup norm and Lipschitz seminorm of a preset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub sup: f64,
    pub lip: f64,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Zero, Preset::SinPatch, Preset::RampPatch];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Zero => "zero",
            Preset::SinPatch => "sinpatch",
            Preset::RampPatch => "ramppatch",
        }
    }

    /// Value at any point of the closed square.
    pub fn omega(self, p: Point) -> f64 {
        match self {
            Preset::Zero => 0.0,
            Preset::SinPatch => {
                let (xi, eta) = to_unit_square(p);
                let pi = std::f64::consts::PI;
                4.0 * (pi * xi).sin() * (pi * eta).sin() * (xi - eta)
            }
            Preset::RampPatch => (p.x1 / RAMP_EPS).clamp(-1.0, 1.0),
        }
    }

    /// Norms sampled on a `(NORM_GRID + 1)²` node grid in rotated
    /// coordinates; the Lipschitz estimate is the largest difference
    /// quotient over axis and diagonal grid neighbours.
    pub fn norms(self) -> Norms {
        static CACHE: [OnceLock<Norms>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
        let slot = Preset::ALL
            .iter()
            .position(|p| *p == self)
            .expect("listed preset");
        *CACHE[slot].get_or_init(|| grid_norms(|p| self.omega(p), NORM_GRID))
    }
}

/// Sup and Lipschitz estimates of `f` on an `(n + 1)²` node grid of the square.
pub fn grid_norms<F: Fn(Point) -> f64>(f: F, n: usize) -> Norms {
    let d = 1.0 / n as f64;
    let values: Vec<f64> = (0..=n)
        .flat_map(|j| (0..=n).map(move |i| (i, j)))
        .map(|(i, j)| f(Point::from_unit_square(i as f64 * d, j as f64 * d)))
        .collect();
    let at = |i: usize, j: usize| values[j * (n + 1) + i];
    let mut sup: f64 = 0.0;
    let mut lip: f64 = 0.0;
    let diag = d * std::f64::consts::SQRT_2;
    for j in 0..=n {
        for i in 0..=n {
            let v = at(i, j);
            sup = sup.max(v.abs());
            if i < n {
                lip = lip.max((at(i + 1, j) - v).abs() / d);
            }
            if j < n {
                lip = lip.max((at(i, j + 1) - v).abs() / d);
            }
            if i < n && j < n {
                lip = lip.max((at(i + 1, j + 1) - v).abs() / diag);
            }
            if i > 0 && j < n {
                lip = lip.max((at(i - 1, j + 1) - v).abs() / diag);
            }
        }
    }
    Norms { sup, lip }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

impl VorticityField for Preset {
    fn omega(&self, y: Point) -> f64 {
        Preset::omega(*self, y)
    }
}

/// The preset named `name` with its norms.
pub fn preset_omega0(name: &str) -> Result<(Preset, Norms)> {
    let p: Preset = name.parse()?;
    Ok((p, p.norms()))
}
