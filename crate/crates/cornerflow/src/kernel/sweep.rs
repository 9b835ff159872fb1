//! Empirical velocity-ratio sweep over the cone `D_a` near the corner.

use super::{velocity_dense, KernelConfig, VelocityField, VorticityField};
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::geometry::Point;

/// Number of rays in the fan.
pub const RAY_COUNT: usize = 9;

/// One sampled point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioEntry {
    pub scale: f64,
    pub point: Point,
    pub u1: f64,
    pub u2: f64,
    /// `|u1/x1|`
    pub ratio1: f64,
    /// `|u2/x2|`
    pub ratio2: f64,
}

impl RatioEntry {
    pub fn max_ratio(&self) -> f64 {
        self.ratio1.max(self.ratio2)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioReport {
    pub a: f64,
    pub entries: Vec<RatioEntry>,
    /// Largest ratio over all entries divided by `‖ω‖∞` (zero for `ω ≡ 0`).
    pub c1_empirical: f64,
}

impl RatioReport {
    /// `(scale, largest ratio at that scale)` in input order.
    pub fn per_scale_max(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for e in &self.entries {
            match out.iter_mut().find(|(s, _)| *s == e.scale) {
                Some((_, m)) => *m = m.max(e.max_ratio()),
                None => out.push((e.scale, e.max_ratio())),
            }
        }
        out
    }

    /// Largest per-scale maximum divided by the per-scale maximum at the
    /// largest scale; `None` when that reference is zero.
    pub fn scale_variation(&self) -> Option<f64> {
        let per = self.per_scale_max();
        let (_, reference) = per.iter().copied().max_by(|a, b| a.0.total_cmp(&b.0))?;
        if reference == 0.0 {
            return None;
        }
        Some(per.iter().map(|(_, m)| m / reference).fold(0.0, f64::max))
    }
}

/// Direction slopes `x2/x1` of the ray fan, from the edge `x2 = x1` to the
/// cone boundary `x2 = a x1`, evenly spaced in angle.
pub fn ratio_rays(a: f64) -> Vec<f64> {
    let (t0, t1) = (std::f64::consts::FRAC_PI_4, a.atan());
    (0..RAY_COUNT)
        .map(|i| match i {
            0 => 1.0,
            i if i == RAY_COUNT - 1 => a,
            i => (t0 + (t1 - t0) * i as f64 / (RAY_COUNT - 1) as f64).tan(),
        })
        .collect()
}

fn sample_points(a: f64, scales: &[f64]) -> Vec<(f64, Point)> {
    let rays = ratio_rays(a);
    let mut pts = Vec::with_capacity(scales.len() * rays.len());
    for &s in scales {
        for &t in &rays {
            let x1 = s / (1.0 + t * t).sqrt();
            pts.push((s, Point::new(x1, t * x1)));
        }
    }
    pts
}

/// Evaluate `|u1/x1|` and `|u2/x2|` on the fan at each scale, with any
/// velocity evaluator.
pub fn ratio_sweep_with<V: VelocityField + ?Sized>(
    velocity: &V,
    sup_norm: f64,
    a: f64,
    scales: &[f64],
    mode: ExecMode,
) -> Result<RatioReport> {
    if !(a > 1.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "cone slope a = {a} must exceed 1"
        )));
    }
    if let Some(s) = scales.iter().find(|s| !(**s > 0.0 && **s < 0.5)) {
        return Err(Error::InvalidParameter(format!(
            "scale {s} outside (0, 1/2)"
        )));
    }
    let pts = sample_points(a, scales);
    let entries = exec::try_map(mode, &pts, |&(scale, p)| {
        let v = velocity.velocity_at(p)?;
        Ok(RatioEntry {
            scale,
            point: p,
            u1: v.u1,
            u2: v.u2,
            ratio1: (v.u1 / p.x1).abs(),
            ratio2: (v.u2 / p.x2).abs(),
        })
    })?;
    let max = entries
        .iter()
        .map(RatioEntry::max_ratio)
        .fold(0.0, f64::max);
    let c1_empirical = if sup_norm > 0.0 { max / sup_norm } else { 0.0 };
    Ok(RatioReport {
        a,
        entries,
        c1_empirical,
    })
}

/// [`ratio_sweep_with`] using dense quadrature of `omega`.
pub fn ratio_sweep<F: VorticityField + ?Sized>(
    omega: &F,
    sup_norm: f64,
    a: f64,
    scales: &[f64],
    cfg: &KernelConfig,
    mode: ExecMode,
) -> Result<RatioReport> {
    cfg.validate()?;
    let dense = |p: Point| velocity_dense(p, omega, cfg);
    ratio_sweep_with(&dense, sup_norm, a, scales, mode)
}
