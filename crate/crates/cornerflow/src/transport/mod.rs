//! Lagrangian transport of vorticity particles, boundary markers and
//! passive tracers, with backward characteristics over a recorded history.
//!
//! Particles carry fixed vorticity values, so `‖ω‖∞` is conserved exactly.
//! Each step is a classical RK4 step in which all stages use the velocity
//! of the particle configuration at the beginning of the step. Boundary
//! markers move by the scalar arc equation `ds/dt = u·τ` along their edge.

mod mesh;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::geometry::{
    in_closed_domain, odd_representative, to_unit_square, BoundaryMarker, Edge, Point, FRAC_1_SQRT2,
};
use crate::kernel::{KernelConfig, ParticleField, VorticityField};
use crate::presets::Preset;

pub use mesh::HalfMesh;

/// How far outside the closed half-domain a particle may drift before the
/// step is declared unstable.
pub const ESCAPE_TOL: f64 = 1e-6;

/// Finite-difference step of the velocity-gradient estimate.
const GRAD_STEP: f64 = 1e-3;

/// Stability factor in `dt_max = DT_FACTOR / max|∇u|`.
pub const DT_FACTOR: f64 = 0.2;

/// A particle carrying `ω` and the area of its initial cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VorticityParticle {
    pub pos: Point,
    pub omega: f64,
    pub area: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<VorticityParticle>,
    /// Initial mesh spacing in rotated coordinates.
    pub h: f64,
    pub omega0_spec: Preset,
    /// Largest `|ω|` carried by a particle.
    pub sup_norm: f64,
    /// Largest difference quotient of `ω₀` over mesh edges.
    pub lip_norm: f64,
}

impl ParticleSet {
    pub fn positions(&self) -> Vec<Point> {
        self.particles.iter().map(|p| p.pos).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.omega * p.area).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.particles.iter().map(|p| p.area).sum()
    }
}

/// Particles at the barycentres of the uniform triangulation with spacing `h`.
pub fn init_particles(preset: Preset, h: f64) -> Result<ParticleSet> {
    let mesh = HalfMesh::new(h)?;
    let particles: Vec<VorticityParticle> = mesh
        .triangles
        .iter()
        .map(|t| {
            let [a, b, c] = t.map(|i| mesh.vertices[i as usize]);
            let pos = (a + b + c) * (1.0 / 3.0);
            VorticityParticle {
                pos,
                omega: preset.omega(pos),
                area: mesh.cell_area(),
            }
        })
        .collect();
    let sup_norm = particles.iter().map(|p| p.omega.abs()).fold(0.0, f64::max);
    let lip_norm = mesh.lipschitz_estimate(|p| preset.omega(p));
    Ok(ParticleSet {
        particles,
        h,
        omega0_spec: preset,
        sup_norm,
        lip_norm,
    })
}

/// Classical RK4 step of `dx/dt = u(x)` in a frozen field.
pub fn rk4_point(field: &ParticleField, x: Point, dt: f64) -> Result<Point> {
    let u = |p: Point| -> Result<Point> {
        let v = field.velocity(p)?;
        Ok(Point::new(v.u1, v.u2))
    };
    let k1 = u(x)?;
    let k2 = u(x + k1 * (0.5 * dt))?;
    let k3 = u(x + k2 * (0.5 * dt))?;
    let k4 = u(x + k3 * dt)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Classical RK4 step of the arc equation `ds/dt = u(edge(s))·τ`.
pub fn rk4_marker(field: &ParticleField, m: &BoundaryMarker, dt: f64) -> Result<BoundaryMarker> {
    let dir = m.edge.direction();
    let f = |s: f64| -> Result<f64> {
        let v = field.velocity(m.edge.at(s))?;
        Ok(v.u1 * dir.x1 + v.u2 * dir.x2)
    };
    let k1 = f(m.s)?;
    let k2 = f(m.s + 0.5 * dt * k1)?;
    let k3 = f(m.s + 0.5 * dt * k2)?;
    let k4 = f(m.s + dt * k3)?;
    let s = m.s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    BoundaryMarker::new(m.edge, s, m.omega0)
}

/// Points of the 9-point stencil set for the gradient estimate.
fn stencil_points() -> Vec<Point> {
    let mut pts = Vec::with_capacity(9);
    for xi in [0.3, 0.6, 0.9] {
        for f in [0.15, 0.5, 0.85] {
            pts.push(Point::from_unit_square(xi, f * xi));
        }
    }
    pts
}

/// `DT_FACTOR / max‖∇u‖_F` over the stencil set, or `∞` for a still field.
pub fn estimate_dt_max(field: &ParticleField) -> Result<f64> {
    let mut gmax: f64 = 0.0;
    for p in stencil_points() {
        let e1 = Point::new(GRAD_STEP, 0.0);
        let e2 = Point::new(0.0, GRAD_STEP);
        let (a, b) = (field.velocity(p + e1)?, field.velocity(p - e1)?);
        let (c, d) = (field.velocity(p + e2)?, field.velocity(p - e2)?);
        let h2 = 2.0 * GRAD_STEP;
        let g = [
            (a.u1 - b.u1) / h2,
            (a.u2 - b.u2) / h2,
            (c.u1 - d.u1) / h2,
            (c.u2 - d.u2) / h2,
        ];
        gmax = gmax.max(g.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    Ok(if gmax > 0.0 {
        DT_FACTOR / gmax
    } else {
        f64::INFINITY
    })
}

/// Map a point that drifted at most [`ESCAPE_TOL`] outside the closed
/// half-domain back onto it.
pub fn confine(p: Point) -> Result<Point> {
    let (xi, eta) = to_unit_square(p);
    let outside = (-eta).max(xi - 1.0).max(-p.x1);
    if !p.is_finite() || outside > ESCAPE_TOL {
        return Err(Error::Escape { x1: p.x1, x2: p.x2 });
    }
    if outside <= 0.0 {
        return Ok(p);
    }
    let (xi, eta) = (xi.min(1.0), eta.max(0.0));
    let (xi, eta) = if eta > xi {
        (0.5 * (xi + eta), 0.5 * (xi + eta))
    } else {
        (xi, eta)
    };
    let q = Point::new((xi - eta) * FRAC_1_SQRT2, (xi + eta) * FRAC_1_SQRT2);
    Ok(Point::new(q.x1.max(0.0), q.x2))
}

fn advance_points(
    field: &ParticleField,
    pts: &[Point],
    dt: f64,
    mode: ExecMode,
    confine_pts: bool,
) -> Result<Vec<Point>> {
    exec::try_map(mode, pts, |p| {
        let q = rk4_point(field, *p, dt)?;
        if confine_pts {
            confine(q)
        } else {
            Ok(q)
        }
    })
}

/// One frozen-field RK4 step of particles and markers.
pub fn step(
    state: &ParticleSet,
    markers: &[BoundaryMarker],
    dt: f64,
    cfg: &KernelConfig,
    mode: ExecMode,
) -> Result<(ParticleSet, Vec<BoundaryMarker>)> {
    let field = ParticleField::from_set(state, cfg)?;
    step_in_field(&field, state, markers, dt, mode)
}

fn check_dt(field: &ParticleField, dt: f64) -> Result<f64> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "time step {dt} must be positive"
        )));
    }
    let dt_max = estimate_dt_max(field)?;
    if dt > dt_max {
        return Err(Error::StepTooLarge { dt, dt_max });
    }
    Ok(dt_max)
}

fn step_in_field(
    field: &ParticleField,
    state: &ParticleSet,
    markers: &[BoundaryMarker],
    dt: f64,
    mode: ExecMode,
) -> Result<(ParticleSet, Vec<BoundaryMarker>)> {
    check_dt(field, dt)?;
    let moved = advance_points(field, &state.positions(), dt, mode, true)?;
    let mut next = state.clone();
    for (p, q) in next.particles.iter_mut().zip(moved) {
        p.pos = q;
    }
    let markers = exec::try_map(mode, markers, |m| rk4_marker(field, m, dt))?;
    Ok((next, markers))
}

/// Particle configurations recorded at every step.
#[derive(Clone, Debug)]
pub struct FlowHistory {
    pub times: Vec<f64>,
    /// Particle positions at each time.
    pub snapshots: Vec<Arc<Vec<Point>>>,
    /// Particle weights `ω · area`, constant in time.
    pub weights: Arc<Vec<f64>>,
    pub cfg: KernelConfig,
    /// Smallest stability bound seen while recording.
    pub dt_max: f64,
}

impl FlowHistory {
    pub fn new(initial: &ParticleSet, cfg: KernelConfig) -> Self {
        FlowHistory {
            times: vec![0.0],
            snapshots: vec![Arc::new(initial.positions())],
            weights: Arc::new(initial.weights()),
            cfg,
            dt_max: f64::INFINITY,
        }
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("history starts at t = 0")
    }

    fn push(&mut self, t: f64, positions: Vec<Point>, dt_max: f64) {
        self.times.push(t);
        self.snapshots.push(Arc::new(positions));
        self.dt_max = self.dt_max.min(dt_max);
    }

    /// Velocity evaluator of snapshot `k`.
    pub fn field(&self, k: usize) -> Result<ParticleField> {
        ParticleField::new(&self.snapshots[k], &self.weights, &self.cfg)
    }
}

/// A sampled trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub start: Point,
    pub samples: Vec<(f64, Point)>,
}

/// A running simulation: particles, markers and passive tracers advanced
/// together, with the history recorded at every step.
pub struct Simulation {
    pub particles: ParticleSet,
    pub markers: Vec<BoundaryMarker>,
    pub tracers: Vec<Point>,
    pub history: FlowHistory,
    pub marker_tracks: Vec<Vec<(f64, f64)>>,
    pub tracer_tracks: Vec<TrajectoryRecord>,
    pub t: f64,
    pub cfg: KernelConfig,
    pub mode: ExecMode,
    steps: usize,
}

impl Simulation {
    pub fn new(
        particles: ParticleSet,
        markers: Vec<BoundaryMarker>,
        tracers: Vec<Point>,
        cfg: KernelConfig,
        mode: ExecMode,
    ) -> Result<Self> {
        cfg.validate()?;
        for p in &tracers {
            if !in_closed_domain(*p, ESCAPE_TOL) {
                return Err(Error::OutsideDomain { x1: p.x1, x2: p.x2 });
            }
        }
        let history = FlowHistory::new(&particles, cfg);
        let marker_tracks = markers.iter().map(|m| vec![(0.0, m.s)]).collect();
        let tracer_tracks = tracers
            .iter()
            .map(|p| TrajectoryRecord {
                start: *p,
                samples: vec![(0.0, *p)],
            })
            .collect();
        Ok(Simulation {
            particles,
            markers,
            tracers,
            history,
            marker_tracks,
            tracer_tracks,
            t: 0.0,
            cfg,
            mode,
            steps: 0,
        })
    }

    /// Advance by one step of size `dt`.
    pub fn advance(&mut self, dt: f64) -> Result<()> {
        let field = ParticleField::from_set(&self.particles, &self.cfg)?;
        let dt_max = check_dt(&field, dt)?;
        let (particles, markers) =
            step_in_field(&field, &self.particles, &self.markers, dt, self.mode)?;
        let tracers = advance_points(&field, &self.tracers, dt, self.mode, true)?;
        self.steps += 1;
        // Accumulating `t += dt` would drift from the nominal grid.
        self.t = self.steps as f64 * dt;
        self.particles = particles;
        self.markers = markers;
        self.tracers = tracers;
        for (track, m) in self.marker_tracks.iter_mut().zip(&self.markers) {
            track.push((self.t, m.s));
        }
        for (rec, p) in self.tracer_tracks.iter_mut().zip(&self.tracers) {
            rec.samples.push((self.t, *p));
        }
        self.history
            .push(self.t, self.particles.positions(), dt_max);
        Ok(())
    }

    /// Advance with constant `dt` until `t_end`; the last step is shortened
    /// only if `t_end` is not a multiple of `dt`.
    pub fn run(&mut self, dt: f64, t_end: f64) -> Result<()> {
        let n = (t_end / dt).round() as usize;
        if ((n as f64) * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "T = {t_end} is not a multiple of dt = {dt}"
            )));
        }
        while self.steps < n {
            self.advance(dt)?;
        }
        Ok(())
    }
}

/// `γ_x⁻¹(t)` for many points at once, walking the history backward.
///
/// Between snapshots the velocity is interpolated linearly in time, and each
/// history interval is covered by one RK4 step.
pub fn backward_trajectories(
    xs: &[Point],
    t: f64,
    history: &FlowHistory,
    mode: ExecMode,
) -> Result<Vec<Point>> {
    let t_end = history.t_end();
    if !(t >= 0.0 && t <= t_end * (1.0 + 1e-12)) {
        return Err(Error::TimeOutOfRange { t, t_end });
    }
    for x in xs {
        if !in_closed_domain(*x, ESCAPE_TOL) {
            return Err(Error::OutsideDomain { x1: x.x1, x2: x.x2 });
        }
    }
    let mut pts = xs.to_vec();
    if t == 0.0 {
        return Ok(pts);
    }
    let times = &history.times;
    // last index with times[k] < t
    let mut k = times.partition_point(|s| *s < t).saturating_sub(1);
    let mut tau = t.min(t_end);
    let mut upper: Option<(usize, Arc<ParticleField>)> = None;
    loop {
        let (t0, t1) = (times[k], times[k + 1]);
        let gap = t1 - t0;
        if gap > history.dt_max * (1.0 + 1e-12) {
            return Err(Error::SparseHistory {
                gap,
                limit: history.dt_max,
            });
        }
        let f1 = match upper.take() {
            Some((idx, f)) if idx == k + 1 => f,
            _ => Arc::new(history.field(k + 1)?),
        };
        let f0 = Arc::new(history.field(k)?);
        let lerp = |p: Point, s: f64| -> Result<Point> {
            let th = (s - t0) / gap;
            let (a, b) = (f0.velocity(p)?, f1.velocity(p)?);
            Ok(Point::new(
                (1.0 - th) * a.u1 + th * b.u1,
                (1.0 - th) * a.u2 + th * b.u2,
            ))
        };
        let h = tau - t0;
        if h > 0.0 {
            let mid = t0 + 0.5 * h;
            pts = exec::try_map(mode, &pts, |&x| {
                let k1 = lerp(x, tau)?;
                let k2 = lerp(x - k1 * (0.5 * h), mid)?;
                let k3 = lerp(x - k2 * (0.5 * h), mid)?;
                let k4 = lerp(x - k3 * h, t0)?;
                Ok(x - (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
            })?;
        }
        tau = t0;
        upper = Some((k, f0));
        if k == 0 {
            break;
        }
        k -= 1;
    }
    Ok(pts)
}

/// `γ_x⁻¹(t)` for one point.
pub fn backward_trajectory(x: Point, t: f64, history: &FlowHistory) -> Result<Point> {
    Ok(backward_trajectories(&[x], t, history, ExecMode::Sequential)?[0])
}

/// Nearest point of the closed square, for points within [`ESCAPE_TOL`].
fn into_square(p: Point) -> Result<Point> {
    if !in_closed_domain(p, ESCAPE_TOL) {
        return Err(Error::Escape { x1: p.x1, x2: p.x2 });
    }
    let (xi, eta) = to_unit_square(p);
    let (xi, eta) = (xi.clamp(0.0, 1.0), eta.clamp(0.0, 1.0));
    Ok(Point::new(
        (xi - eta) * FRAC_1_SQRT2,
        (xi + eta) * FRAC_1_SQRT2,
    ))
}

/// `ω(x, t) = ω₀(γ_x⁻¹(t))` through the odd extension.
pub fn vorticity_at<F: VorticityField + ?Sized>(
    x: Point,
    t: f64,
    history: &FlowHistory,
    omega0: &F,
) -> Result<f64> {
    let back = into_square(backward_trajectory(x, t, history)?)?;
    let (rep, sign) = odd_representative(back)?;
    Ok(sign * omega0.omega(rep))
}

/// Whether `γ_{X,1}(t) ≥ X₁ e^{−c‖ω₀‖∞ t} (1 − 0.05)` at every sample.
pub fn gronwall_check(record: &TrajectoryRecord, c: f64, sup_norm: f64) -> bool {
    const SLACK: f64 = 0.05;
    let x1 = record.start.x1;
    record
        .samples
        .iter()
        .all(|(t, p)| p.x1 >= x1 * (-c * sup_norm * t).exp() * (1.0 - SLACK))
}

/// Marker trajectory as a record of positions.
pub fn marker_record(edge: Edge, track: &[(f64, f64)]) -> TrajectoryRecord {
    TrajectoryRecord {
        start: edge.at(track[0].1),
        samples: track.iter().map(|(t, s)| (*t, edge.at(*s))).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_does_not_move() {
        let set = init_particles(Preset::Zero, 1.0 / 8.0).unwrap();
        let m = BoundaryMarker::new(Edge::LowerRight, 0.25, 0.0).unwrap();
        let (next, ms) = step(
            &set,
            &[m],
            0.01,
            &KernelConfig::default(),
            ExecMode::Sequential,
        )
        .unwrap();
        assert_eq!(next, set);
        assert_eq!(ms[0], m);
    }

    #[test]
    fn confine_projects_small_excursions() {
        let p = Point::new(0.3 + 1e-8, 0.3 - 1e-8);
        let q = confine(p).unwrap();
        let (_, eta) = to_unit_square(q);
        assert!((0.0..1e-15).contains(&eta));
        assert!(confine(Point::new(-1e-3, 0.5)).is_err());
        assert_eq!(confine(Point::new(0.1, 0.5)).unwrap(), Point::new(0.1, 0.5));
    }

    #[test]
    fn gronwall_check_trivial_cases() {
        let rec = TrajectoryRecord {
            start: Point::new(0.1, 0.1),
            samples: vec![(0.0, Point::new(0.1, 0.1)), (1.0, Point::new(0.05, 0.05))],
        };
        assert!(!gronwall_check(&rec, 0.0, 1.0));
        assert!(gronwall_check(&rec, 1.0, 1.0));
    }
}
