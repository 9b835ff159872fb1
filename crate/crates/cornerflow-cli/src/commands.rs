//! The four experiment drivers.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use cornerflow::exec::{self, ExecMode};
use cornerflow::fit::fit_exponential;
use cornerflow::geometry::{BoundaryMarker, Edge, Point};
use cornerflow::greens::{green_image, green_oracle};
use cornerflow::kernel::{self, u1_shell_increments, RatioReport};
use cornerflow::transport::{
    gronwall_check, init_particles, marker_record, Simulation, TrajectoryRecord,
};
use cornerflow::Error;

use crate::config::RunConfig;
use crate::output::{fmt_f64, write_csv, write_json};
use crate::{Check, CliError};

/// Largest admissible Green-function error against the oracle.
pub const GREEN_TOL: f64 = 1e-5;
/// Largest admissible asymmetry `|G(x, y) − G(y, x)|`.
pub const SYMMETRY_TOL: f64 = 1e-6;
/// Shells reported by `kernel-decay`.
pub const DECAY_SHELLS: u32 = 64;
/// Shells entering the decay fit.
pub const DECAY_FIT: std::ops::RangeInclusive<u32> = 4..=64;
pub const DECAY_SLOPE_MAX: f64 = -2.7;
/// Admissible growth of the per-scale maximum ratio from the largest to the
/// smallest scale.
pub const SCALE_VARIATION_MAX: f64 = 3.0;
/// Marker start positions `2⁻³ … 2⁻⁸` on the lower-right edge.
pub const MARKER_EXPONENTS: std::ops::RangeInclusive<i32> = 3..=8;
/// Growth rows are written every this many steps.
pub const SAMPLE_EVERY: usize = 10;
/// Headroom factor on the velocity-ratio constant in the growth bound.
pub const GROWTH_HEADROOM: f64 = 2.0;
/// Marker start sets are halved at most this many times.
const MAX_MARKER_RETRIES: u32 = 6;

fn mode() -> ExecMode {
    ExecMode::default()
}

// ---------------------------------------------------------------- green-validate

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenRowKind {
    /// A seeded random interior pair.
    Pair,
    /// The same pair with `x` and `y` exchanged.
    Swapped,
    /// `x` on the diagonal edge `x2 = x1`.
    Edge,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreenRow {
    pub kind: GreenRowKind,
    pub x: Point,
    pub y: Point,
    pub g_image: f64,
    pub g_oracle: f64,
    pub abs_err: f64,
    pub shells_used: u32,
}

#[derive(Clone, Debug)]
pub struct GreenValidateOutcome {
    pub rows: Vec<GreenRow>,
    pub max_abs_err: f64,
    pub symmetry_max_diff: f64,
    pub edge_max_abs: f64,
    pub all_positive: bool,
    /// Pairs rejected for violating the oracle separation.
    pub redrawn: usize,
    pub checks: Vec<Check>,
    pub csv: PathBuf,
}

fn green_row(kind: GreenRowKind, x: Point, y: Point, cfg: &RunConfig) -> Result<GreenRow, Error> {
    let (g_image, shells_used) = green_image(x, y, cfg.kernel.shell_policy)?;
    let g_oracle = green_oracle(x, y, cfg.oracle)?;
    Ok(GreenRow {
        kind,
        x,
        y,
        g_image,
        g_oracle,
        abs_err: (g_image - g_oracle).abs(),
        shells_used,
    })
}

/// Image-series Green function against the eigenfunction oracle.
pub fn green_validate(cfg: &RunConfig) -> Result<GreenValidateOutcome, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut interior =
        || Point::from_unit_square(rng.random_range(0.02..0.98), rng.random_range(0.02..0.98));
    let mut pairs = Vec::with_capacity(cfg.pairs);
    let mut redrawn = 0;
    while pairs.len() < cfg.pairs {
        let (x, y) = (interior(), interior());
        let sep = x.dist(y);
        if sep < cfg.oracle.separation {
            redrawn += 1;
            eprintln!(
                "green-validate: pair {} redrawn, separation {sep:.3e} below {}",
                pairs.len(),
                cfg.oracle.separation
            );
            continue;
        }
        pairs.push((x, y));
    }
    let mut jobs: Vec<(GreenRowKind, Point, Point)> = Vec::new();
    jobs.extend(pairs.iter().map(|&(x, y)| (GreenRowKind::Pair, x, y)));
    jobs.extend(pairs.iter().map(|&(x, y)| (GreenRowKind::Swapped, y, x)));
    for (i, s) in [0.2, 0.4, 0.6, 0.8].into_iter().enumerate() {
        let x = Edge::LowerRight.at(s);
        let y = pairs[i % pairs.len()].1;
        if x.dist(y) >= cfg.oracle.separation {
            jobs.push((GreenRowKind::Edge, x, y));
        }
    }
    let rows = exec::try_map(mode(), &jobs, |&(kind, x, y)| green_row(kind, x, y, cfg))?;

    let max_abs_err = rows.iter().map(|r| r.abs_err).fold(0.0, f64::max);
    let n = pairs.len();
    let symmetry_max_diff = (0..n)
        .map(|i| (rows[i].g_image - rows[n + i].g_image).abs())
        .fold(0.0, f64::max);
    let edge: Vec<&GreenRow> = rows
        .iter()
        .filter(|r| r.kind == GreenRowKind::Edge)
        .collect();
    let edge_max_abs = edge.iter().map(|r| r.g_image.abs()).fold(0.0, f64::max);
    let all_positive = rows
        .iter()
        .filter(|r| r.kind != GreenRowKind::Edge)
        .all(|r| r.g_image > 0.0);

    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v: Vec<String> = [
                r.x.x1, r.x.x2, r.y.x1, r.y.x2, r.g_image, r.g_oracle, r.abs_err,
            ]
            .iter()
            .map(|f| fmt_f64(*f))
            .collect();
            v.push(r.shells_used.to_string());
            v
        })
        .collect();
    let csv = write_csv(
        &cfg.output_dir,
        "green_validate.csv",
        &[
            "x1",
            "x2",
            "y1",
            "y2",
            "G_image",
            "G_oracle",
            "abs_err",
            "shells_used",
        ],
        &csv_rows,
    )?;

    let checks = vec![
        Check::new(
            "A1",
            max_abs_err <= GREEN_TOL,
            format!(
                "max abs_err {max_abs_err:.3e} over {} rows (limit {GREEN_TOL:e})",
                rows.len()
            ),
        ),
        Check::new(
            "A2",
            edge_max_abs == 0.0 && !edge.is_empty(),
            format!(
                "{} diagonal-edge evaluations, largest |G| {edge_max_abs:e}",
                edge.len()
            ),
        ),
        Check::new(
            "A2",
            symmetry_max_diff <= SYMMETRY_TOL,
            format!("max |G(x,y) - G(y,x)| {symmetry_max_diff:.3e} (limit {SYMMETRY_TOL:e})"),
        ),
        Check::new(
            "A2",
            all_positive,
            format!("G > 0 on all {} interior rows: {all_positive}", 2 * n),
        ),
    ];
    Ok(GreenValidateOutcome {
        rows,
        max_abs_err,
        symmetry_max_diff,
        edge_max_abs,
        all_positive,
        redrawn,
        checks,
        csv,
    })
}

// ---------------------------------------------------------------- kernel-decay

/// Generic pairs in the half-domain, given in rotated coordinates, after the
/// reference pair `x = (0.2, 0.3)`, `y = (0.5, 0.7)`.
pub fn decay_pairs() -> Vec<(Point, Point)> {
    let mut v = vec![(Point::new(0.2, 0.3), Point::new(0.5, 0.7))];
    for (a, b) in [
        ((0.3, 0.1), (0.7, 0.4)),
        ((0.8, 0.5), (0.4, 0.2)),
        ((0.15, 0.05), (0.9, 0.6)),
    ] {
        v.push((
            Point::from_unit_square(a.0, a.1),
            Point::from_unit_square(b.0, b.1),
        ));
    }
    v
}

/// Pair with `x` on the vertical axis.
pub fn decay_axis_pair() -> (Point, Point) {
    (Point::new(0.0, 0.5), Point::from_unit_square(0.6, 0.2))
}

#[derive(Clone, Debug)]
pub struct KernelDecayOutcome {
    /// `(shell, max |increment|)` for shells `1..=64`.
    pub rows: Vec<(u32, f64)>,
    pub slope: f64,
    pub axis_max_abs: f64,
    pub checks: Vec<Check>,
    pub csv: PathBuf,
}

/// Shell increments of the `u1` integrand and their log-log decay slope.
pub fn kernel_decay(cfg: &RunConfig) -> Result<KernelDecayOutcome, CliError> {
    let pairs = decay_pairs();
    let incs = exec::try_map(mode(), &pairs, |&(x, y)| {
        u1_shell_increments(x, y, DECAY_SHELLS)
    })?;
    let rows: Vec<(u32, f64)> = (1..=DECAY_SHELLS)
        .map(|r| {
            (
                r,
                incs.iter().map(|v| v[r as usize].abs()).fold(0.0, f64::max),
            )
        })
        .collect();
    let series: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(r, _)| DECAY_FIT.contains(r))
        .map(|&(r, m)| ((r as f64).ln(), m))
        .collect();
    let slope = fit_exponential(&series)?.rate;
    let (ax, ay) = decay_axis_pair();
    let axis_max_abs = u1_shell_increments(ax, ay, DECAY_SHELLS)?
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(r, m)| vec![r.to_string(), fmt_f64(*m)])
        .collect();
    let csv = write_csv(
        &cfg.output_dir,
        "kernel_decay.csv",
        &["shell", "max_abs_increment"],
        &csv_rows,
    )?;
    let checks = vec![
        Check::new(
            "A3",
            slope <= DECAY_SLOPE_MAX,
            format!("log-log slope {slope:.3} over shells 4-64 (limit {DECAY_SLOPE_MAX})"),
        ),
        Check::new(
            "A3",
            axis_max_abs == 0.0,
            format!("axis pair largest increment {axis_max_abs:e}"),
        ),
    ];
    Ok(KernelDecayOutcome {
        rows,
        slope,
        axis_max_abs,
        checks,
        csv,
    })
}

// ---------------------------------------------------------------- ratio-sweep

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioSummary {
    pub a: f64,
    pub c1_empirical: f64,
    /// `None` when every ratio at the largest scale is zero.
    pub max_scale_variation: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RatioSweepOutcome {
    pub report: RatioReport,
    pub summary: RatioSummary,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

/// Dense-quadrature sweep of the preset without writing files.
pub fn sweep_report(cfg: &RunConfig) -> Result<RatioReport, CliError> {
    let sup = cfg.preset.norms().sup;
    Ok(kernel::ratio_sweep(
        &cfg.preset,
        sup,
        cfg.a,
        &cfg.scales,
        &cfg.kernel,
        mode(),
    )?)
}

/// The smallest-scale maximum may exceed the largest-scale maximum by at
/// most [`SCALE_VARIATION_MAX`].
pub fn smallest_vs_largest(report: &RatioReport) -> (f64, f64) {
    let per = report.per_scale_max();
    let largest = per
        .iter()
        .copied()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map_or(0.0, |p| p.1);
    let smallest = per
        .iter()
        .copied()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map_or(0.0, |p| p.1);
    (smallest, largest)
}

/// Velocity ratios `|u_j/x_j|` on the cone fan near the corner.
pub fn ratio_sweep(cfg: &RunConfig) -> Result<RatioSweepOutcome, CliError> {
    let report = sweep_report(cfg)?;
    let rows: Vec<Vec<String>> = report
        .entries
        .iter()
        .map(|e| {
            [
                report.a, e.scale, e.point.x1, e.point.x2, e.u1, e.u2, e.ratio1, e.ratio2,
            ]
            .iter()
            .map(|f| fmt_f64(*f))
            .collect()
        })
        .collect();
    let csv = write_csv(
        &cfg.output_dir,
        "ratio_sweep.csv",
        &["a", "scale", "x1", "x2", "u1", "u2", "ratio1", "ratio2"],
        &rows,
    )?;
    let summary = RatioSummary {
        a: report.a,
        c1_empirical: report.c1_empirical,
        max_scale_variation: report.scale_variation(),
    };
    let json = write_json(&cfg.output_dir, "ratio_summary.json", &summary)?;
    let (small, large) = smallest_vs_largest(&report);
    let checks = vec![Check::new(
        "A4",
        small <= SCALE_VARIATION_MAX * large,
        format!("max ratio {small:.6e} at the smallest scale vs {large:.6e} at the largest (factor limit {SCALE_VARIATION_MAX})"),
    )];
    Ok(RatioSweepOutcome {
        report,
        summary,
        checks,
        files: vec![csv, json],
    })
}

// ---------------------------------------------------------------- simulate-growth

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthRow {
    pub t: f64,
    pub s0: f64,
    pub abs_x: f64,
    pub omega: f64,
    pub q: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthReport {
    pub rows: Vec<GrowthRow>,
    /// Slope of `log max_s q` against `t` over the second half of the run;
    /// `None` when some sampled maximum is zero and the logarithm is undefined.
    pub fitted_rate: Option<f64>,
    pub lip0: f64,
    pub c1_ref: f64,
    pub bound_satisfied: bool,
    /// Whether `q ≤ lip0 · e^{fitted_rate · t}` at every row.
    pub envelope_holds: Option<bool>,
}

#[derive(Clone, Debug)]
pub struct GrowthOutcome {
    pub report: GrowthReport,
    pub sup_norm: f64,
    /// Marker start positions actually used.
    pub s0: Vec<f64>,
    pub marker_records: Vec<TrajectoryRecord>,
    pub ratio: RatioReport,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

/// Run the particle simulation and test the single-exponential bound at
/// lower-right-edge markers.
pub fn simulate_growth(cfg: &RunConfig) -> Result<GrowthOutcome, CliError> {
    let preset = cfg.preset;
    let norms = preset.norms();
    let (sup, lip0) = (norms.sup, norms.lip);
    let ratio = sweep_report(cfg)?;
    let c1_ref = ratio.c1_empirical;
    let edge = Edge::LowerRight;

    let mut s0: Vec<f64> = MARKER_EXPONENTS.map(|k| 0.5f64.powi(k)).collect();
    let mut attempt = 0;
    let sim = loop {
        let markers = s0
            .iter()
            .map(|&s| BoundaryMarker::new(edge, s, preset.omega(edge.at(s))))
            .collect::<Result<Vec<_>, _>>()?;
        let particles = init_particles(preset, cfg.h)?;
        let mut sim = Simulation::new(particles, markers, Vec::new(), cfg.kernel, mode())?;
        sim.run(cfg.dt, cfg.t_end)?;
        let left = sim
            .marker_tracks
            .iter()
            .flatten()
            .any(|&(_, s)| edge.at(s).norm() >= 0.5);
        if !left {
            break sim;
        }
        attempt += 1;
        if attempt > MAX_MARKER_RETRIES {
            return Err(CliError::Config(
                "markers keep leaving B(0, 1/2); start them closer to the corner".into(),
            ));
        }
        eprintln!("simulate-growth: a marker left B(0, 1/2) before T; rerunning with halved start positions");
        s0.iter_mut().for_each(|s| *s *= 0.5);
    };

    let n_steps = sim.marker_tracks[0].len() - 1;
    let sampled: Vec<usize> = (0..=n_steps)
        .filter(|k| k % SAMPLE_EVERY == 0 || *k == n_steps)
        .collect();
    let mut rows = Vec::with_capacity(sampled.len() * s0.len());
    for &k in &sampled {
        for (m, track) in sim.markers.iter().zip(&sim.marker_tracks) {
            let (t, s) = track[k];
            let abs_x = edge.at(s).norm();
            let omega = m.omega0;
            rows.push(GrowthRow {
                t,
                s0: track[0].1,
                abs_x,
                omega,
                q: omega.abs() / abs_x,
            });
        }
    }

    let half = 0.5 * cfg.t_end;
    let series: Vec<(f64, f64)> = sampled
        .iter()
        .map(|&k| {
            let t = sim.marker_tracks[0][k].0;
            let q = rows
                .iter()
                .filter(|r| r.t == t)
                .map(|r| r.q)
                .fold(0.0, f64::max);
            (t, q)
        })
        .filter(|(t, _)| *t >= half * (1.0 - 1e-12))
        .collect();
    let fitted_rate = match fit_exponential(&series) {
        Ok(f) => Some(f.rate),
        Err(Error::NonPositive { .. }) => None,
        Err(e) => return Err(e.into()),
    };

    let c = GROWTH_HEADROOM * c1_ref;
    let pointwise = rows
        .iter()
        .all(|r| r.omega.abs() <= lip0 * r.abs_x * (c * sup * r.t).exp());
    let rate_ok = fitted_rate.is_none_or(|r| r <= c * sup);
    let bound_satisfied = pointwise && rate_ok;
    let envelope_holds =
        fitted_rate.map(|rate| rows.iter().all(|r| r.q <= lip0 * (rate * r.t).exp()));
    let report = GrowthReport {
        rows,
        fitted_rate,
        lip0,
        c1_ref,
        bound_satisfied,
        envelope_holds,
    };

    let csv_rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            [r.t, r.s0, r.abs_x, r.omega, r.q]
                .iter()
                .map(|f| fmt_f64(*f))
                .collect()
        })
        .collect();
    let csv = write_csv(
        &cfg.output_dir,
        "growth.csv",
        &["t", "s0", "abs_x", "omega", "q"],
        &csv_rows,
    )?;
    let json = write_json(&cfg.output_dir, "growth_report.json", &report)?;

    let marker_records: Vec<TrajectoryRecord> = sim
        .marker_tracks
        .iter()
        .map(|t| marker_record(edge, t))
        .collect();
    let gronwall_ok = marker_records
        .iter()
        .all(|r| gronwall_check(r, c1_ref, sup));
    let rate_text = match fitted_rate {
        Some(r) => format!("fitted_rate {r:.6} vs limit {:.6}", c * sup),
        None => "fitted_rate undefined: max q is zero at a sampled time".to_string(),
    };
    let checks = vec![
        Check::new(
            "A5",
            bound_satisfied,
            format!(
                "pointwise bound at {} rows: {pointwise}; {rate_text}; c = {GROWTH_HEADROOM} * c1 = {c:.6}",
                report.rows.len()
            ),
        ),
        Check::new(
            "A6",
            gronwall_ok,
            format!("Gronwall lower bound at {} markers with c1 = {c1_ref:.6}", marker_records.len()),
        ),
    ];
    Ok(GrowthOutcome {
        report,
        sup_norm: sup,
        s0,
        marker_records,
        ratio,
        checks,
        files: vec![csv, json],
    })
}
